// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sbr/tensor.hpp"

namespace sbr {

/// A scalar field sampled on a regular height x width grid, row-major.
class Grid2D {
 public:
  Grid2D(int height, int width, std::vector<double> values);
  Grid2D(int height, int width, double fill);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }

  double at(int row, int col) const { return values_[index(row, col)]; }
  double& at(int row, int col) { return values_[index(row, col)]; }

  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const Grid2D&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_;
  int width_;
  std::vector<double> values_;
};

/// N tokens with d features each plus their normalized (x, y) positions.
struct TokenField {
  MatD features;  // N x d
  MatD coords;    // N x 2, in [0,1]^2

  Index n_tokens() const { return static_cast<Index>(features.rows()); }
  Index dim() const { return static_cast<Index>(features.cols()); }

  /// Throws DataError when the invariants (matching row counts, coordinates
  /// in the unit square, finite entries) do not hold.
  void validate() const;
};

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
  bool operator==(const ChannelStats&) const = default;
};

struct FieldSample {
  TokenField input;
  TokenField target;
};

/// Paired input/target token fields. `norm_stats` holds one entry per input
/// channel followed by one per target channel; stored features are z-scored
/// with these statistics.
struct FieldDataset {
  std::vector<FieldSample> samples;
  std::vector<ChannelStats> norm_stats;
  std::uint64_t seed = 0;

  Index n_tokens() const;
  Index input_dim() const;
  Index output_dim() const;
  std::size_t size() const { return samples.size(); }
};

/// Gaussian-filtered white noise, standardized to zero mean and unit variance.
/// `length_scale` is the kernel bandwidth in grid cells; filtering wraps
/// periodically.
Grid2D sample_grf(int height, int width, double length_scale,
                  std::uint64_t seed);

/// Largest stable forward-Euler step for the 5-point Laplacian with grid
/// spacing 1/max(height, width).
double max_stable_dt(int height, int width, double diffusivity);

/// Explicit Euler steps of u_t = diffusivity * Laplacian(u), periodic.
Grid2D solve_heat2d(const Grid2D& init, double diffusivity, double dt,
                    int steps);

/// Row-major tokenization: input features are [value, x, y], target features
/// are [value].
std::pair<TokenField, TokenField> tokenize(const Grid2D& input_grid,
                                           const Grid2D& target_grid);

/// Inverse of tokenize for one feature channel.
Grid2D regrid(const TokenField& field, int height, int width, int channel = 0);

struct GenParams {
  int height = 32;
  int width = 32;
  int steps = 50;
  double diffusivity = 1.0;
  double dt = 0.0;  // 0 selects 0.8 * max_stable_dt
  double length_scale = 3.0;
  int n_samples = 250;
  int n_train = -1;  // -1 selects default_train_count(n_samples)
  std::uint64_t seed = 0;
};

int default_train_count(int n_samples);

/// Builds a normalized Heat2D dataset. Sample i draws its initial condition
/// from an RNG stream derived from (seed, i). Stored values are rounded to
/// f32 so that the dataset equals its own serialized form.
FieldDataset generate_dataset(const GenParams& params);

/// Per-channel z-score statistics over the first `n_train` samples.
std::vector<ChannelStats> compute_norm_stats(
    const std::vector<FieldSample>& samples, std::size_t n_train);

void write_dataset(const FieldDataset& ds, const std::filesystem::path& path);
FieldDataset read_dataset(const std::filesystem::path& path);

}  // namespace sbr
