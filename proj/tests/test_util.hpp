// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include "sbr/tensor.hpp"

namespace sbr::testing_util {

inline MatD random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                          double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace sbr::testing_util
