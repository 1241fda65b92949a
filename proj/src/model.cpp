// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/model.hpp"

#include <cmath>
#include <random>

#include "binary_io.hpp"
#include "sbr/error.hpp"

namespace sbr {

void ModelConfig::validate() const {
  if (depth < 1 || dim < 1 || ffn_dim < 1 || n_heads < 1 || in_dim < 1 || out_dim < 1) {
    throw ParameterError("model dimensions must be positive");
  }
  if (dim % n_heads != 0) throw ParameterError("n_heads must divide dim");
  if (ffn_dim < dim) throw ParameterError("ffn_dim must be >= dim");
}

namespace {

template <class M>
ParamRef ref(std::string name, M& m) {
  return {std::move(name), m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

std::vector<ParamRef> parameters(OperatorModel& m) {
  std::vector<ParamRef> out;
  out.push_back(ref("enc.weight", m.enc_weight));
  out.push_back(ref("enc.bias", m.enc_bias));
  out.push_back(ref("router", m.router));
  for (std::size_t l = 0; l < m.blocks.size(); ++l) {
    auto& b = m.blocks[l];
    const std::string p = "block" + std::to_string(l) + ".";
    out.push_back(ref(p + "ln1.gain", b.ln1_gain));
    out.push_back(ref(p + "ln1.bias", b.ln1_bias));
    out.push_back(ref(p + "attn.query", b.w_query));
    out.push_back(ref(p + "attn.key", b.w_key));
    out.push_back(ref(p + "attn.value", b.w_value));
    out.push_back(ref(p + "attn.out", b.w_out));
    out.push_back(ref(p + "ln2.gain", b.ln2_gain));
    out.push_back(ref(p + "ln2.bias", b.ln2_bias));
    out.push_back(ref(p + "ffn1.weight", b.w_ffn1));
    out.push_back(ref(p + "ffn1.bias", b.b_ffn1));
    out.push_back(ref(p + "ffn2.weight", b.w_ffn2));
    out.push_back(ref(p + "ffn2.bias", b.b_ffn2));
  }
  out.push_back(ref("dec.weight", m.dec_weight));
  out.push_back(ref("dec.bias", m.dec_bias));
  return out;
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t d = c.dim;
  const std::size_t f = c.ffn_dim;
  const std::size_t per_block = 4 * d + 4 * d * d + d * f + f + f * d + d;
  return c.in_dim * d + d + d + c.depth * per_block + d * c.out_dim + c.out_dim;
}

OperatorModel zero_model(const ModelConfig& c) {
  c.validate();
  OperatorModel m;
  m.config = c;
  m.enc_weight = MatD::Zero(c.in_dim, c.dim);
  m.enc_bias = RowVecD::Zero(c.dim);
  m.router = ColVecD::Zero(c.dim);
  for (int l = 0; l < c.depth; ++l) {
    BlockParams<double> b;
    b.ln1_gain = RowVecD::Zero(c.dim);
    b.ln1_bias = RowVecD::Zero(c.dim);
    b.w_query = MatD::Zero(c.dim, c.dim);
    b.w_key = MatD::Zero(c.dim, c.dim);
    b.w_value = MatD::Zero(c.dim, c.dim);
    b.w_out = MatD::Zero(c.dim, c.dim);
    b.ln2_gain = RowVecD::Zero(c.dim);
    b.ln2_bias = RowVecD::Zero(c.dim);
    b.w_ffn1 = MatD::Zero(c.dim, c.ffn_dim);
    b.b_ffn1 = RowVecD::Zero(c.ffn_dim);
    b.w_ffn2 = MatD::Zero(c.ffn_dim, c.dim);
    b.b_ffn2 = RowVecD::Zero(c.dim);
    m.blocks.push_back(std::move(b));
  }
  m.dec_weight = MatD::Zero(c.dim, c.out_dim);
  m.dec_bias = RowVecD::Zero(c.out_dim);
  return m;
}

OperatorModel init_model(const ModelConfig& c, std::uint64_t seed) {
  OperatorModel m = zero_model(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](auto& mat, double scale) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = scale * normal(rng);
  };
  const double residual_scale = 1.0 / std::sqrt(2.0 * c.depth);
  fill(m.enc_weight, 1.0 / std::sqrt(static_cast<double>(c.in_dim)));
  fill(m.router, 1.0 / std::sqrt(static_cast<double>(c.dim)));
  for (auto& b : m.blocks) {
    b.ln1_gain.setOnes();
    b.ln2_gain.setOnes();
    fill(b.w_query, 1.0 / std::sqrt(static_cast<double>(c.dim)));
    fill(b.w_key, 1.0 / std::sqrt(static_cast<double>(c.dim)));
    fill(b.w_value, 1.0 / std::sqrt(static_cast<double>(c.dim)));
    fill(b.w_out, residual_scale / std::sqrt(static_cast<double>(c.dim)));
    fill(b.w_ffn1, 1.0 / std::sqrt(static_cast<double>(c.dim)));
    fill(b.w_ffn2, residual_scale / std::sqrt(static_cast<double>(c.ffn_dim)));
  }
  fill(m.dec_weight, 1.0 / std::sqrt(static_cast<double>(c.dim)));
  return m;
}

OperatorModel with_identity_blocks(OperatorModel m) {
  for (auto& b : m.blocks) {
    b.ln1_gain.setOnes();
    b.ln1_bias.setZero();
    b.w_query.setZero();
    b.w_key.setZero();
    b.w_value.setZero();
    b.w_out.setZero();
    b.ln2_gain.setOnes();
    b.ln2_bias.setZero();
    b.w_ffn1.setZero();
    b.b_ffn1.setZero();
    b.w_ffn2.setZero();
    b.b_ffn2.setZero();
  }
  return m;
}

namespace {
constexpr std::string_view kModelMagic = "SBRMODL1";
}

void save_model(const OperatorModel& model, const std::filesystem::path& path) {
  const auto& c = model.config;
  detail::ByteWriter w;
  w.magic(kModelMagic);
  for (int v : {c.depth, c.dim, c.ffn_dim, c.n_heads, c.in_dim, c.out_dim}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  for (const auto& p : parameters(const_cast<OperatorModel&>(model))) {
    for (std::size_t i = 0; i < p.size; ++i) w.f64(p.data[i]);
  }
  w.save(path);
}

OperatorModel load_model(const std::filesystem::path& path) {
  auto r = detail::ByteReader::load(path);
  r.expect_magic(kModelMagic);
  const auto header_at = r.offset();
  ModelConfig c;
  int* fields[] = {&c.depth, &c.dim, &c.ffn_dim, &c.n_heads, &c.in_dim, &c.out_dim};
  for (int* f : fields) {
    const std::uint32_t v = r.u32("config header");
    if (v == 0 || v > (1u << 20)) throw FormatError("implausible model dimension", r.offset() - 4);
    *f = static_cast<int>(v);
  }
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid model config: ") + e.what(), header_at);
  }
  r.need(static_cast<std::uint64_t>(parameter_count(c)) * 8, "parameters");
  OperatorModel m = zero_model(c);
  for (auto& p : parameters(m)) {
    for (std::size_t i = 0; i < p.size; ++i) p.data[i] = r.f64(p.name.c_str());
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after parameters", r.offset());
  return m;
}

}  // namespace sbr
