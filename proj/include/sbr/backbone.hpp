// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sbr/model.hpp"
#include "sbr/router.hpp"
#include "sbr/tensor.hpp"

namespace sbr {

/// Gathers rows `active[j]` of `x` into row j of the result. Indices must be
/// unique and in range.
template <class T>
Mat<T> pack(const Mat<T>& x, std::span<const Index> active);

/// Copy of `x_prev` with row active[j] replaced by row j of `y_packed`.
template <class T>
Mat<T> scatter_residual(const Mat<T>& x_prev, const Mat<T>& y_packed,
                        std::span<const Index> active);

/// Activations kept by a training-mode block forward for the reverse pass.
struct BlockCache {
  MatD input;
  MatD xhat1, ln1_out;
  ColVecD rstd1;
  MatD query, key, value;
  std::vector<MatD> probs;  // one k x k softmax matrix per head
  MatD heads_out;           // concatenated attention heads, before w_out
  MatD mid;                 // x + attention
  MatD xhat2, ln2_out;
  ColVecD rstd2;
  MatD ffn_pre;             // before GELU
  MatD ffn_act;             // after GELU
};

/// Pre-norm block over the k packed rows:
///   h = x + MHSA(LN1(x)),  y = h + W2 GELU(W1 LN2(h) + b1) + b2.
/// Attention is softmax attention among the packed rows only. `layer` is the
/// 1-based index reported in numeric errors.
template <class T>
Mat<T> block_forward(const Mat<T>& x, const BlockParams<T>& params, int n_heads,
                     int layer = 0, BlockCache* cache = nullptr);

/// Reverse pass of block_forward. Accumulates parameter gradients into `grads`
/// and returns the gradient with respect to the block input.
MatD block_backward(const BlockCache& cache, const BlockParams<double>& params,
                    int n_heads, const MatD& d_out, BlockParams<double>& grads);

template <class T>
Mat<T> encode(const Mat<T>& x_in, const ModelParams<T>& model);
template <class T>
Mat<T> decode(const Mat<T>& state, const ModelParams<T>& model);

/// Plain L-block composition with every token active at every layer.
template <class T>
Mat<T> dense_forward(const Mat<T>& x_in, const ModelParams<T>& model);

struct ForwardOptions {
  /// Scale each active token's block update by its router score. Gating is
  /// only meaningful when a router produced the routes.
  bool gating = false;
  /// Keep the activations needed by `backward`.
  bool train_mode = false;
};

/// Everything a forward pass produced: states, packed matrices and routing.
struct ForwardTrace {
  MatD input;
  MatD embedded;                  // X_0
  std::vector<double> scores;     // router scores, empty when unrouted
  std::optional<RoutingPlan> plan;
  std::vector<IndexList> routes;  // per-layer packed row order
  bool gated = false;
  bool train_mode = false;
  std::vector<MatD> layer_inputs;    // X_{l-1}, N x d
  std::vector<MatD> packed_inputs;   // X'_l, k_l x d
  std::vector<MatD> packed_outputs;  // Y'_l before gating
  std::vector<BlockCache> caches;
  MatD final_state;                  // X_L
  MatD output;
};

/// Full routed forward: encode, score and rank once, build the static plan,
/// then pack / block / scatter per layer and decode.
std::pair<MatD, ForwardTrace> sbr_forward(const MatD& x_in, const OperatorModel& model,
                                          const SparsitySchedule& schedule,
                                          const ForwardOptions& options);

/// Forward with externally supplied per-layer active sets (random or
/// exit-layer routing). The router is not consulted and gating is off.
std::pair<MatD, ForwardTrace> routed_forward(const MatD& x_in, const OperatorModel& model,
                                             std::vector<IndexList> routes,
                                             bool train_mode);

/// Gradient of a scalar loss, given d(loss)/d(output), with respect to every
/// model parameter. The trace must come from a train-mode forward of `model`.
ModelGrads backward(const ForwardTrace& trace, const OperatorModel& model,
                    const MatD& d_output);

/// Inference-only routed forward in any precision. With `routes` empty the
/// router ranks tokens and `schedule` sets the counts; otherwise the given
/// routes are used and gating is ignored.
template <class T>
Mat<T> infer(const Mat<T>& x_in, const ModelParams<T>& model,
             const SparsitySchedule& schedule, bool gating,
             const std::vector<IndexList>& routes = {});

/// Router scores on X_0 for one input.
std::vector<double> router_scores(const MatD& x_in, const OperatorModel& model);

}  // namespace sbr
