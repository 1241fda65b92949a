// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace sbr {

// Token matrices are row-major: one row per token.
template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <class T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatD = Mat<double>;
using MatF = Mat<float>;
using RowVecD = RowVec<double>;
using ColVecD = ColVec<double>;

using Index = std::int32_t;
using IndexList = std::vector<Index>;

/// Instrumentation sink for FLOP-bearing work inside the backbone. While a
/// ScopedFlopTally is alive on a thread, every block records the FLOPs it
/// performs and the row count of every matrix product it issues.
struct FlopTally {
  struct Layer {
    std::uint64_t matmul_flops = 0;
    std::uint64_t elementwise_flops = 0;
    std::vector<std::int64_t> matmul_rows;
  };
  std::vector<Layer> layers;
  int current_layer = -1;

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& l : layers) t += l.matmul_flops + l.elementwise_flops;
    return t;
  }
};

namespace detail {
FlopTally*& active_tally();
}  // namespace detail

class ScopedFlopTally {
 public:
  explicit ScopedFlopTally(FlopTally& tally) : prev_(detail::active_tally()) {
    detail::active_tally() = &tally;
  }
  ~ScopedFlopTally() { detail::active_tally() = prev_; }
  ScopedFlopTally(const ScopedFlopTally&) = delete;
  ScopedFlopTally& operator=(const ScopedFlopTally&) = delete;

 private:
  FlopTally* prev_;
};

}  // namespace sbr
