// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sbr/tensor.hpp"

namespace sbr {

struct ModelConfig {
  int depth = 6;    // L
  int dim = 64;     // d
  int ffn_dim = 128;
  int n_heads = 4;
  int in_dim = 3;
  int out_dim = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Weights of one pre-norm Transformer block. Projections act on row vectors
/// (x * W), so every matrix is (fan_in x fan_out).
template <class T>
struct BlockParams {
  RowVec<T> ln1_gain, ln1_bias;
  Mat<T> w_query, w_key, w_value, w_out;  // d x d
  RowVec<T> ln2_gain, ln2_bias;
  Mat<T> w_ffn1;  // d x d_ff
  RowVec<T> b_ffn1;
  Mat<T> w_ffn2;  // d_ff x d
  RowVec<T> b_ffn2;

  template <class U>
  BlockParams<U> cast() const {
    return {ln1_gain.template cast<U>(), ln1_bias.template cast<U>(),
            w_query.template cast<U>(),  w_key.template cast<U>(),
            w_value.template cast<U>(),  w_out.template cast<U>(),
            ln2_gain.template cast<U>(), ln2_bias.template cast<U>(),
            w_ffn1.template cast<U>(),   b_ffn1.template cast<U>(),
            w_ffn2.template cast<U>(),   b_ffn2.template cast<U>()};
  }
};

/// Encoder, L blocks, decoder and router. Also serves as the gradient
/// container for itself (same shapes).
template <class T>
struct ModelParams {
  ModelConfig config;
  Mat<T> enc_weight;  // d_in x d
  RowVec<T> enc_bias;
  ColVec<T> router;   // d
  std::vector<BlockParams<T>> blocks;
  Mat<T> dec_weight;  // d x d_out
  RowVec<T> dec_bias;

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> m;
    m.config = config;
    m.enc_weight = enc_weight.template cast<U>();
    m.enc_bias = enc_bias.template cast<U>();
    m.router = router.template cast<U>();
    for (const auto& b : blocks) m.blocks.push_back(b.template cast<U>());
    m.dec_weight = dec_weight.template cast<U>();
    m.dec_bias = dec_bias.template cast<U>();
    return m;
  }
};

using OperatorModel = ModelParams<double>;
using ModelGrads = ModelParams<double>;

/// A named contiguous parameter tensor.
struct ParamRef {
  std::string name;
  double* data;
  std::size_t size;
};

/// Parameters in checkpoint order: encoder weight, encoder bias, router, then
/// per block (ln1 gain, ln1 bias, query, key, value, out, ln2 gain, ln2 bias,
/// ffn1 weight, ffn1 bias, ffn2 weight, ffn2 bias), then decoder weight and
/// bias. Matrices are row-major.
std::vector<ParamRef> parameters(OperatorModel& model);
std::size_t parameter_count(const ModelConfig& config);

/// Scaled-normal weights, zero biases, unit layer-norm gains.
OperatorModel init_model(const ModelConfig& config, std::uint64_t seed);

/// Every tensor zero, layer-norm gains included.
OperatorModel zero_model(const ModelConfig& config);

/// Model whose blocks are identities: attention and MLP weights zero,
/// layer-norm gains one. Encoder, decoder and router come from `base`.
OperatorModel with_identity_blocks(OperatorModel base);

void save_model(const OperatorModel& model, const std::filesystem::path& path);
OperatorModel load_model(const std::filesystem::path& path);

}  // namespace sbr
