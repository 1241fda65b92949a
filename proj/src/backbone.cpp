// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/backbone.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>

#include "sbr/error.hpp"

namespace sbr {

namespace detail {
FlopTally*& active_tally() {
  thread_local FlopTally* tally = nullptr;
  return tally;
}
}  // namespace detail

namespace {

constexpr double kLayerNormEps = 1e-5;

// Per-element operation counts used by the instrumented tally.
constexpr std::uint64_t kSoftmaxOps = 6;  // scale, max, subtract, exp, sum, divide
constexpr std::uint64_t kLayerNormOps = 7;
constexpr std::uint64_t kGeluOps = 8;

FlopTally::Layer* tally_layer(int layer) {
  FlopTally* t = detail::active_tally();
  if (t == nullptr) return nullptr;
  const int idx = layer > 0 ? layer - 1 : 0;
  if (static_cast<int>(t->layers.size()) <= idx) t->layers.resize(idx + 1);
  return &t->layers[idx];
}

void check_indices(std::span<const Index> active, Index n) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (Index i : active) {
    if (i < 0 || i >= n) {
      throw ParameterError("active index " + std::to_string(i) + " out of range [0, " +
                           std::to_string(n) + ")");
    }
    if (seen[i]) throw ParameterError("duplicate active index " + std::to_string(i));
    seen[i] = 1;
  }
}

template <class T>
void layer_norm(const Mat<T>& x, const RowVec<T>& gain, const RowVec<T>& bias, Mat<T>& out,
                Mat<T>* xhat_out, ColVec<T>* rstd_out) {
  const ColVec<T> mean = x.rowwise().mean();
  Mat<T> centered = x.colwise() - mean;
  const ColVec<T> var = centered.array().square().rowwise().mean().matrix();
  const ColVec<T> rstd = (var.array() + static_cast<T>(kLayerNormEps)).rsqrt().matrix();
  centered.array().colwise() *= rstd.array();
  out = (centered.array().rowwise() * gain.array()).rowwise() + bias.array();
  if (xhat_out != nullptr) *xhat_out = std::move(centered);
  if (rstd_out != nullptr) *rstd_out = rstd;
}

MatD layer_norm_backward(const MatD& d_out, const MatD& xhat, const ColVecD& rstd,
                         const RowVecD& gain, RowVecD& d_gain, RowVecD& d_bias) {
  d_gain += (d_out.array() * xhat.array()).colwise().sum().matrix();
  d_bias += d_out.colwise().sum();
  const MatD dxhat = (d_out.array().rowwise() * gain.array()).matrix();
  const ColVecD mean_d = dxhat.rowwise().mean();
  const ColVecD mean_dx = (dxhat.array() * xhat.array()).rowwise().mean().matrix();
  MatD dx = dxhat.colwise() - mean_d;
  dx.array() -= xhat.array().colwise() * mean_dx.array();
  dx.array().colwise() *= rstd.array();
  return dx;
}

template <class T>
T gelu(T x) {
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

template <class T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

}  // namespace

template <class T>
Mat<T> pack(const Mat<T>& x, std::span<const Index> active) {
  check_indices(active, static_cast<Index>(x.rows()));
  Mat<T> out(static_cast<Eigen::Index>(active.size()), x.cols());
  for (std::size_t j = 0; j < active.size(); ++j) out.row(j) = x.row(active[j]);
  return out;
}

template <class T>
Mat<T> scatter_residual(const Mat<T>& x_prev, const Mat<T>& y_packed,
                        std::span<const Index> active) {
  if (y_packed.rows() != static_cast<Eigen::Index>(active.size())) {
    throw ParameterError("scatter_residual: packed rows do not match active count");
  }
  if (!active.empty() && y_packed.cols() != x_prev.cols()) {
    throw ParameterError("scatter_residual: feature widths differ");
  }
  check_indices(active, static_cast<Index>(x_prev.rows()));
  Mat<T> out = x_prev;
  for (std::size_t j = 0; j < active.size(); ++j) out.row(active[j]) = y_packed.row(j);
  return out;
}

template <class T>
Mat<T> block_forward(const Mat<T>& x, const BlockParams<T>& p, int n_heads, int layer,
                     BlockCache* cache) {
  const Eigen::Index k = x.rows();
  const Eigen::Index d = x.cols();
  if (k < 1) throw ParameterError("block_forward: needs at least one token");
  if (n_heads < 1 || d % n_heads != 0) throw ParameterError("block_forward: bad head count");
  const Eigen::Index dh = d / n_heads;
  const Eigen::Index dff = p.w_ffn1.cols();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  FlopTally::Layer* tally = tally_layer(layer);
  auto matmul = [tally](Eigen::Index m, Eigen::Index inner, Eigen::Index n) {
    if (tally == nullptr) return;
    tally->matmul_flops += 2ULL * m * inner * n;
    tally->matmul_rows.push_back(m);
  };

  Mat<T> a;
  Mat<T> xhat1;
  ColVec<T> rstd1;
  layer_norm(x, p.ln1_gain, p.ln1_bias, a, &xhat1, &rstd1);

  Mat<T> q = a * p.w_query;
  Mat<T> kk = a * p.w_key;
  Mat<T> v = a * p.w_value;
  matmul(k, d, d);
  matmul(k, d, d);
  matmul(k, d, d);

  Mat<T> heads(k, d);
  if (cache != nullptr) cache->probs.clear();
  for (int h = 0; h < n_heads; ++h) {
    Mat<T> s = q.middleCols(h * dh, dh) * kk.middleCols(h * dh, dh).transpose();
    matmul(k, dh, k);
    s *= scale;
    softmax_rows(s);
    heads.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    matmul(k, k, dh);
    if constexpr (std::is_same_v<T, double>) {
      if (cache != nullptr) cache->probs.push_back(std::move(s));
    }
  }
  Mat<T> mid = x + heads * p.w_out;
  matmul(k, d, d);

  Mat<T> b;
  Mat<T> xhat2;
  ColVec<T> rstd2;
  layer_norm(mid, p.ln2_gain, p.ln2_bias, b, &xhat2, &rstd2);

  Mat<T> pre = (b * p.w_ffn1).rowwise() + p.b_ffn1;
  matmul(k, d, dff);
  Mat<T> act = pre.unaryExpr([](T z) { return gelu(z); });
  Mat<T> y = (mid + act * p.w_ffn2).rowwise() + p.b_ffn2;
  matmul(k, dff, d);

  if (tally != nullptr) {
    const auto ku = static_cast<std::uint64_t>(k);
    const auto du = static_cast<std::uint64_t>(d);
    const auto fu = static_cast<std::uint64_t>(dff);
    tally->elementwise_flops += kSoftmaxOps * ku * ku * n_heads + 2 * kLayerNormOps * ku * du +
                                kGeluOps * ku * fu + 2 * ku * du + ku * fu + ku * du;
  }

  if (!y.allFinite()) {
    throw NumericError("non-finite activations in block " + std::to_string(layer), layer);
  }

  if constexpr (std::is_same_v<T, double>) {
    if (cache != nullptr) {
      cache->input = x;
      cache->xhat1 = std::move(xhat1);
      cache->ln1_out = std::move(a);
      cache->rstd1 = std::move(rstd1);
      cache->query = std::move(q);
      cache->key = std::move(kk);
      cache->value = std::move(v);
      cache->heads_out = std::move(heads);
      cache->mid = std::move(mid);
      cache->xhat2 = std::move(xhat2);
      cache->ln2_out = std::move(b);
      cache->rstd2 = std::move(rstd2);
      cache->ffn_pre = std::move(pre);
      cache->ffn_act = std::move(act);
    }
  }
  return y;
}

MatD block_backward(const BlockCache& c, const BlockParams<double>& p, int n_heads,
                    const MatD& d_out, BlockParams<double>& g) {
  const Eigen::Index d = c.input.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // MLP branch.
  g.b_ffn2 += d_out.colwise().sum();
  g.w_ffn2.noalias() += c.ffn_act.transpose() * d_out;
  MatD d_pre = d_out * p.w_ffn2.transpose();
  d_pre.array() *= c.ffn_pre.unaryExpr([](double z) { return gelu_grad(z); }).array();
  g.b_ffn1 += d_pre.colwise().sum();
  g.w_ffn1.noalias() += c.ln2_out.transpose() * d_pre;
  const MatD d_ln2 = d_pre * p.w_ffn1.transpose();
  MatD d_mid = d_out + layer_norm_backward(d_ln2, c.xhat2, c.rstd2, p.ln2_gain, g.ln2_gain,
                                           g.ln2_bias);

  // Attention branch.
  g.w_out.noalias() += c.heads_out.transpose() * d_mid;
  const MatD d_heads = d_mid * p.w_out.transpose();
  MatD dq(c.query.rows(), d);
  MatD dk(c.key.rows(), d);
  MatD dv(c.value.rows(), d);
  for (int h = 0; h < n_heads; ++h) {
    const MatD& prob = c.probs[h];
    const auto d_o = d_heads.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = prob.transpose() * d_o;
    MatD d_prob = d_o * c.value.middleCols(h * dh, dh).transpose();
    const ColVecD row_dot = (d_prob.array() * prob.array()).rowwise().sum().matrix();
    d_prob.colwise() -= row_dot;
    d_prob.array() *= prob.array() * scale;
    dq.middleCols(h * dh, dh).noalias() = d_prob * c.key.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = d_prob.transpose() * c.query.middleCols(h * dh, dh);
  }
  g.w_query.noalias() += c.ln1_out.transpose() * dq;
  g.w_key.noalias() += c.ln1_out.transpose() * dk;
  g.w_value.noalias() += c.ln1_out.transpose() * dv;
  MatD d_ln1 = dq * p.w_query.transpose();
  d_ln1.noalias() += dk * p.w_key.transpose();
  d_ln1.noalias() += dv * p.w_value.transpose();
  return d_mid + layer_norm_backward(d_ln1, c.xhat1, c.rstd1, p.ln1_gain, g.ln1_gain,
                                     g.ln1_bias);
}

template <class T>
Mat<T> encode(const Mat<T>& x_in, const ModelParams<T>& m) {
  if (x_in.cols() != m.enc_weight.rows()) {
    throw ParameterError("input width " + std::to_string(x_in.cols()) +
                         " does not match model in_dim " + std::to_string(m.enc_weight.rows()));
  }
  return (x_in * m.enc_weight).rowwise() + m.enc_bias;
}

template <class T>
Mat<T> decode(const Mat<T>& state, const ModelParams<T>& m) {
  return (state * m.dec_weight).rowwise() + m.dec_bias;
}

template <class T>
Mat<T> dense_forward(const Mat<T>& x_in, const ModelParams<T>& m) {
  Mat<T> x = encode(x_in, m);
  for (std::size_t l = 0; l < m.blocks.size(); ++l) {
    x = block_forward(x, m.blocks[l], m.config.n_heads, static_cast<int>(l) + 1);
  }
  return decode(x, m);
}

namespace {

// Layer loop shared by every routed forward. `gate` holds per-token scores
// when gating is on. The trace is filled only in double precision.
template <class T>
Mat<T> run_layers(Mat<T> x, const ModelParams<T>& m, const std::vector<IndexList>& routes,
                  const std::vector<double>* gate, ForwardTrace* trace) {
  const int depth = static_cast<int>(m.blocks.size());
  if (static_cast<int>(routes.size()) != depth) {
    throw ParameterError("routing covers " + std::to_string(routes.size()) +
                         " layers but the model has " + std::to_string(depth));
  }
  const bool keep = trace != nullptr;
  const bool train = keep && trace->train_mode;
  for (int l = 0; l < depth; ++l) {
    const IndexList& idx = routes[l];
    Mat<T> xp = pack(x, std::span<const Index>(idx));
    if (idx.empty()) {
      // Nothing routed here: every token rides the residual path.
      if constexpr (std::is_same_v<T, double>) {
        if (train) trace->caches.emplace_back();
        if (keep) {
          trace->layer_inputs.push_back(x);
          trace->packed_inputs.push_back(xp);
          trace->packed_outputs.push_back(xp);
        }
      }
      tally_layer(l + 1);
      continue;
    }
    BlockCache* cache = nullptr;
    if constexpr (std::is_same_v<T, double>) {
      if (train) cache = &trace->caches.emplace_back();
    }
    Mat<T> yp = block_forward(xp, m.blocks[l], m.config.n_heads, l + 1, cache);
    Mat<T> out = yp;
    if (gate != nullptr) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const T s = static_cast<T>((*gate)[idx[j]]);
        out.row(j) = xp.row(j) + s * (yp.row(j) - xp.row(j));
      }
    }
    Mat<T> next = scatter_residual(x, out, std::span<const Index>(idx));
    if constexpr (std::is_same_v<T, double>) {
      if (keep) {
        trace->layer_inputs.push_back(std::move(x));
        trace->packed_inputs.push_back(std::move(xp));
        trace->packed_outputs.push_back(std::move(yp));
      }
    }
    x = std::move(next);
  }
  return x;
}

}  // namespace

std::vector<double> router_scores(const MatD& x_in, const OperatorModel& model) {
  return score_tokens(encode(x_in, model), model.router);
}

std::pair<MatD, ForwardTrace> sbr_forward(const MatD& x_in, const OperatorModel& model,
                                          const SparsitySchedule& schedule,
                                          const ForwardOptions& options) {
  if (schedule.depth() != model.config.depth) {
    throw ParameterError("schedule length " + std::to_string(schedule.depth()) +
                         " does not match model depth " + std::to_string(model.config.depth));
  }
  ForwardTrace tr;
  tr.train_mode = options.train_mode;
  tr.gated = options.gating;
  tr.input = x_in;
  tr.embedded = encode(x_in, model);
  tr.scores = score_tokens(tr.embedded, model.router);
  tr.plan.emplace(build_plan(rank_tokens(tr.scores),
                             active_counts(schedule, static_cast<Index>(x_in.rows()))));
  for (int l = 0; l < tr.plan->depth(); ++l) tr.routes.push_back(tr.plan->packed_indices(l));
  tr.final_state = run_layers<double>(tr.embedded, model, tr.routes,
                                      options.gating ? &tr.scores : nullptr, &tr);
  tr.output = decode(tr.final_state, model);
  MatD out = tr.output;
  return {std::move(out), std::move(tr)};
}

std::pair<MatD, ForwardTrace> routed_forward(const MatD& x_in, const OperatorModel& model,
                                             std::vector<IndexList> routes, bool train_mode) {
  ForwardTrace tr;
  tr.train_mode = train_mode;
  tr.gated = false;
  tr.input = x_in;
  tr.embedded = encode(x_in, model);
  tr.routes = std::move(routes);
  tr.final_state = run_layers<double>(tr.embedded, model, tr.routes, nullptr, &tr);
  tr.output = decode(tr.final_state, model);
  MatD out = tr.output;
  return {std::move(out), std::move(tr)};
}

ModelGrads backward(const ForwardTrace& tr, const OperatorModel& model, const MatD& d_output) {
  if (!tr.train_mode) throw ParameterError("backward: trace was not recorded in train mode");
  const int depth = model.config.depth;
  if (static_cast<int>(tr.caches.size()) != depth ||
      static_cast<int>(tr.routes.size()) != depth || tr.embedded.cols() != model.config.dim) {
    throw ParameterError("backward: trace does not match the model");
  }
  if (d_output.rows() != tr.output.rows() || d_output.cols() != tr.output.cols()) {
    throw ParameterError("backward: output gradient has the wrong shape");
  }

  ModelGrads g = zero_model(model.config);
  g.dec_weight.noalias() = tr.final_state.transpose() * d_output;
  g.dec_bias = d_output.colwise().sum();
  MatD dx = d_output * model.dec_weight.transpose();

  const Index n = static_cast<Index>(tr.embedded.rows());
  ColVecD d_scores = ColVecD::Zero(n);
  for (int l = depth - 1; l >= 0; --l) {
    const IndexList& idx = tr.routes[l];
    if (idx.empty()) continue;
    MatD d_packed = pack(dx, std::span<const Index>(idx));
    MatD d_direct;
    if (tr.gated) {
      const MatD& xp = tr.packed_inputs[l];
      const MatD& yp = tr.packed_outputs[l];
      d_direct.resize(d_packed.rows(), d_packed.cols());
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const double s = tr.scores[idx[j]];
        d_scores[idx[j]] += d_packed.row(j).dot(yp.row(j) - xp.row(j));
        d_direct.row(j) = (1.0 - s) * d_packed.row(j);
        d_packed.row(j) *= s;
      }
    }
    MatD d_in = block_backward(tr.caches[l], model.blocks[l], model.config.n_heads, d_packed,
                               g.blocks[l]);
    if (tr.gated) d_in += d_direct;
    for (std::size_t j = 0; j < idx.size(); ++j) dx.row(idx[j]) = d_in.row(j);
  }

  if (tr.gated) {
    ColVecD d_logit(n);
    for (Index i = 0; i < n; ++i) {
      const double s = tr.scores[i];
      d_logit[i] = d_scores[i] * s * (1.0 - s);
    }
    g.router.noalias() = tr.embedded.transpose() * d_logit;
    dx.noalias() += d_logit * model.router.transpose();
  }
  g.enc_weight.noalias() = tr.input.transpose() * dx;
  g.enc_bias = dx.colwise().sum();
  return g;
}

template <class T>
Mat<T> infer(const Mat<T>& x_in, const ModelParams<T>& m, const SparsitySchedule& schedule,
             bool gating, const std::vector<IndexList>& routes) {
  Mat<T> x0 = encode(x_in, m);
  if (!routes.empty()) return decode(run_layers<T>(std::move(x0), m, routes, nullptr, nullptr), m);

  if (schedule.depth() != m.config.depth) {
    throw ParameterError("schedule length does not match model depth");
  }
  const ColVec<T> logits = x0 * m.router;
  std::vector<double> scores(static_cast<std::size_t>(logits.size()));
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    scores[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
  }
  RoutingPlan plan = build_plan(rank_tokens(scores),
                                active_counts(schedule, static_cast<Index>(x_in.rows())));
  std::vector<IndexList> plan_routes;
  plan_routes.reserve(plan.depth());
  for (int l = 0; l < plan.depth(); ++l) plan_routes.push_back(plan.packed_indices(l));
  return decode(run_layers<T>(std::move(x0), m, plan_routes, gating ? &plan.ranking().scores : nullptr,
                              nullptr),
                m);
}

#define SBR_INSTANTIATE(T)                                                                  \
  template Mat<T> pack<T>(const Mat<T>&, std::span<const Index>);                           \
  template Mat<T> scatter_residual<T>(const Mat<T>&, const Mat<T>&, std::span<const Index>); \
  template Mat<T> block_forward<T>(const Mat<T>&, const BlockParams<T>&, int, int,          \
                                   BlockCache*);                                            \
  template Mat<T> encode<T>(const Mat<T>&, const ModelParams<T>&);                          \
  template Mat<T> decode<T>(const Mat<T>&, const ModelParams<T>&);                          \
  template Mat<T> dense_forward<T>(const Mat<T>&, const ModelParams<T>&);                   \
  template Mat<T> infer<T>(const Mat<T>&, const ModelParams<T>&, const SparsitySchedule&,   \
                           bool, const std::vector<IndexList>&);

SBR_INSTANTIATE(double)
SBR_INSTANTIATE(float)

#undef SBR_INSTANTIATE

}  // namespace sbr
