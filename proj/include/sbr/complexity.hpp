// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "sbr/tensor.hpp"

namespace sbr {

/// The k nearest other points of every point (Euclidean, self excluded, ties
/// by ascending index), found with a 2-d tree. Result is N x k, nearest first.
std::vector<IndexList> knn(const MatD& coords, int k);

struct GradientEstimate {
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  bool degenerate = false;
};

/// Least-squares gradient from neighbour displacements, solved with a
/// column-pivoting QR factorization. `neighbors` rows are (x, y, value).
/// Rank-deficient geometry yields a zero gradient with `degenerate` set.
GradientEstimate estimate_gradient(const Eigen::Vector3d& center, const MatD& neighbors);

struct ComplexityScores {
  std::vector<double> scores;    // gradient L2 norm per point
  std::vector<bool> degenerate;  // point had collinear neighbours
  std::size_t degenerate_count = 0;
};

ComplexityScores complexity_scores(const std::vector<double>& values, const MatD& coords, int k = 8);

/// Linear interpolation between order statistics: position p/100 * (n-1).
double percentile(std::vector<double> values, double pct);

enum class Region { kSimple, kModerate, kComplex };
std::string_view region_name(Region r);

struct ComplexityMap {
  std::vector<double> scores;
  std::vector<Region> region;
  double q_low = 0.0;
  double q_high = 0.0;
  bool flat = false;  // all scores equal, so every point is moderate

  std::array<std::size_t, 3> counts() const;
};

/// simple: s < q_low, complex: s > q_high, moderate otherwise. Thresholds are
/// computed per call, i.e. per sample.
ComplexityMap partition_regions(const std::vector<double>& scores, double low_pct = 25.0,
                                double high_pct = 75.0);

struct RegionErrors {
  std::optional<double> simple;
  std::optional<double> moderate;
  std::optional<double> complex;

  std::optional<double> get(Region r) const;
};

/// Relative L2 error restricted to each region's points; empty regions are
/// absent.
RegionErrors region_errors(const MatD& pred, const MatD& truth, const ComplexityMap& map);

/// (shallow - deep) / shallow per region; absent when either side is.
RegionErrors depth_benefit(const RegionErrors& shallow, const RegionErrors& deep);

}  // namespace sbr
