// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/field_data.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sbr/error.hpp"

namespace sbr {

Grid2D::Grid2D(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height < 1 || width < 1 || static_cast<long>(height) * width < 4) {
    throw ParameterError("grid must have positive dimensions and at least 4 cells");
  }
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ParameterError("grid value count does not match height*width");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DataError("grid contains a non-finite value");
  }
}

Grid2D::Grid2D(int height, int width, double fill)
    : Grid2D(height, width,
             std::vector<double>(
                 static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0),
                 fill)) {}

void TokenField::validate() const {
  if (features.rows() != coords.rows()) {
    throw DataError("token field: feature and coordinate row counts differ");
  }
  if (coords.cols() != 2) throw DataError("token field: coords must have 2 columns");
  if (!features.allFinite() || !coords.allFinite()) {
    throw DataError("token field contains non-finite entries");
  }
  if ((coords.array() < 0.0).any() || (coords.array() > 1.0).any()) {
    throw DataError("token field: coordinates outside the unit square");
  }
}

Index FieldDataset::n_tokens() const {
  return samples.empty() ? 0 : samples.front().input.n_tokens();
}
Index FieldDataset::input_dim() const {
  return samples.empty() ? 0 : samples.front().input.dim();
}
Index FieldDataset::output_dim() const {
  return samples.empty() ? 0 : samples.front().target.dim();
}

namespace {

// Circular Gaussian weights indexed by offset m in [0, n).
std::vector<double> periodic_kernel(int n, double sigma) {
  std::vector<double> w(n, 0.0);
  const double cutoff = 4.0 * sigma;
  for (int m = 0; m < n; ++m) {
    const double d = std::min(m, n - m);
    if (d <= cutoff) w[m] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return w;
}

}  // namespace

Grid2D sample_grf(int height, int width, double length_scale,
                  std::uint64_t seed) {
  if (height < 4 || width < 4) {
    throw ParameterError("sample_grf: height and width must be at least 4");
  }
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
    throw ParameterError("sample_grf: length_scale must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(height) * width);
  for (double& v : noise) v = normal(rng);

  const auto kx = periodic_kernel(width, length_scale);
  const auto ky = periodic_kernel(height, length_scale);

  std::vector<double> tmp(noise.size(), 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int m = 0; m < width; ++m) {
        if (kx[m] == 0.0) continue;
        acc += kx[m] * noise[static_cast<std::size_t>(r) * width + (c + m) % width];
      }
      tmp[static_cast<std::size_t>(r) * width + c] = acc;
    }
  }
  std::vector<double> out(noise.size(), 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int m = 0; m < height; ++m) {
        if (ky[m] == 0.0) continue;
        acc += ky[m] * tmp[static_cast<std::size_t>((r + m) % height) * width + c];
      }
      out[static_cast<std::size_t>(r) * width + c] = acc;
    }
  }

  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(out.size());
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(out.size());
  const double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : out) v = (v - mean) * inv_std;
  return Grid2D(height, width, std::move(out));
}

double max_stable_dt(int height, int width, double diffusivity) {
  const double h = 1.0 / std::max(height, width);
  return h * h / (4.0 * diffusivity);
}

Grid2D solve_heat2d(const Grid2D& init, double diffusivity, double dt,
                    int steps) {
  if (steps < 0) throw ParameterError("solve_heat2d: steps must be >= 0");
  if (!(diffusivity > 0.0) || !(dt > 0.0)) {
    throw ParameterError("solve_heat2d: diffusivity and dt must be positive");
  }
  const int hgt = init.height();
  const int wid = init.width();
  const double limit = max_stable_dt(hgt, wid, diffusivity);
  if (dt > limit * (1.0 + 1e-12)) {
    throw ParameterError("solve_heat2d: dt=" + std::to_string(dt) +
                         " violates stability limit " + std::to_string(limit));
  }
  const double h = 1.0 / std::max(hgt, wid);
  const double coeff = diffusivity * dt / (h * h);

  std::vector<double> u = init.values();
  std::vector<double> next(u.size());
  auto at = [&](int r, int c) { return u[static_cast<std::size_t>(r) * wid + c]; };
  for (int s = 0; s < steps; ++s) {
    for (int r = 0; r < hgt; ++r) {
      const int up = (r + hgt - 1) % hgt;
      const int dn = (r + 1) % hgt;
      for (int c = 0; c < wid; ++c) {
        const int lf = (c + wid - 1) % wid;
        const int rt = (c + 1) % wid;
        const double center = at(r, c);
        const double lap = at(up, c) + at(dn, c) + at(r, lf) + at(r, rt) - 4.0 * center;
        next[static_cast<std::size_t>(r) * wid + c] = center + coeff * lap;
      }
    }
    u.swap(next);
  }
  return Grid2D(hgt, wid, std::move(u));
}

std::pair<TokenField, TokenField> tokenize(const Grid2D& input_grid,
                                           const Grid2D& target_grid) {
  if (input_grid.height() != target_grid.height() ||
      input_grid.width() != target_grid.width()) {
    throw ParameterError("tokenize: input and target grids differ in shape");
  }
  const int hgt = input_grid.height();
  const int wid = input_grid.width();
  const Index n = hgt * wid;
  TokenField in{MatD(n, 3), MatD(n, 2)};
  TokenField out{MatD(n, 1), MatD(n, 2)};
  for (int r = 0; r < hgt; ++r) {
    for (int c = 0; c < wid; ++c) {
      const Index i = r * wid + c;
      const double x = wid > 1 ? static_cast<double>(c) / (wid - 1) : 0.0;
      const double y = hgt > 1 ? static_cast<double>(r) / (hgt - 1) : 0.0;
      in.features(i, 0) = input_grid.at(r, c);
      in.features(i, 1) = x;
      in.features(i, 2) = y;
      out.features(i, 0) = target_grid.at(r, c);
      in.coords(i, 0) = out.coords(i, 0) = x;
      in.coords(i, 1) = out.coords(i, 1) = y;
    }
  }
  return {std::move(in), std::move(out)};
}

Grid2D regrid(const TokenField& field, int height, int width, int channel) {
  if (static_cast<long>(height) * width != field.n_tokens()) {
    throw ParameterError("regrid: height*width does not match token count");
  }
  if (channel < 0 || channel >= field.dim()) {
    throw ParameterError("regrid: channel out of range");
  }
  std::vector<double> values(static_cast<std::size_t>(field.n_tokens()));
  for (Index i = 0; i < field.n_tokens(); ++i) values[i] = field.features(i, channel);
  return Grid2D(height, width, std::move(values));
}

int default_train_count(int n_samples) {
  return static_cast<int>(std::lround(0.8 * n_samples));
}

std::vector<ChannelStats> compute_norm_stats(
    const std::vector<FieldSample>& samples, std::size_t n_train) {
  if (samples.empty()) return {};
  n_train = std::min(n_train, samples.size());
  if (n_train == 0) throw ParameterError("normalization needs at least one training sample");
  const Index d_in = samples.front().input.dim();
  const Index d_out = samples.front().target.dim();
  std::vector<ChannelStats> stats(static_cast<std::size_t>(d_in + d_out));
  auto channel = [&](const FieldSample& s, Index c) -> const MatD& {
    return c < d_in ? s.input.features : s.target.features;
  };
  for (Index c = 0; c < d_in + d_out; ++c) {
    const Index col = c < d_in ? c : c - d_in;
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t s = 0; s < n_train; ++s) {
      sum += channel(samples[s], c).col(col).sum();
      count += static_cast<double>(samples[s].input.n_tokens());
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t s = 0; s < n_train; ++s) {
      sq += (channel(samples[s], c).col(col).array() - mean).square().sum();
    }
    const double sd = std::sqrt(sq / count);
    stats[c] = {mean, sd > 0.0 ? sd : 1.0};
  }
  return stats;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void round_to_f32(MatD& m) {
  m = m.cast<float>().cast<double>();
}

}  // namespace

FieldDataset generate_dataset(const GenParams& p) {
  if (p.n_samples < 0) throw ParameterError("n_samples must be >= 0");
  const double dt = p.dt > 0.0 ? p.dt : 0.8 * max_stable_dt(p.height, p.width, p.diffusivity);
  FieldDataset ds;
  ds.seed = p.seed;
  ds.samples.reserve(p.n_samples);
  for (int i = 0; i < p.n_samples; ++i) {
    const std::uint64_t stream = splitmix64(p.seed ^ splitmix64(static_cast<std::uint64_t>(i)));
    Grid2D init = sample_grf(p.height, p.width, p.length_scale, stream);
    Grid2D final_state = solve_heat2d(init, p.diffusivity, dt, p.steps);
    auto [in, out] = tokenize(init, final_state);
    ds.samples.push_back({std::move(in), std::move(out)});
  }
  const int n_train = p.n_train >= 0 ? p.n_train : default_train_count(p.n_samples);
  if (n_train > p.n_samples) throw ParameterError("n_train exceeds n_samples");
  if (ds.samples.empty()) return ds;
  ds.norm_stats = compute_norm_stats(ds.samples, static_cast<std::size_t>(std::max(n_train, 1)));
  const Index d_in = ds.input_dim();
  for (auto& s : ds.samples) {
    for (Index c = 0; c < d_in; ++c) {
      s.input.features.col(c) =
          (s.input.features.col(c).array() - ds.norm_stats[c].mean) / ds.norm_stats[c].std;
    }
    for (Index c = 0; c < s.target.dim(); ++c) {
      const auto& st = ds.norm_stats[d_in + c];
      s.target.features.col(c) = (s.target.features.col(c).array() - st.mean) / st.std;
    }
    round_to_f32(s.input.features);
    round_to_f32(s.target.features);
    round_to_f32(s.input.coords);
    s.target.coords = s.input.coords;
  }
  return ds;
}

}  // namespace sbr
