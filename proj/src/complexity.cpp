// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "sbr/error.hpp"

namespace sbr {

namespace {

// Static 2-d tree over point indices. Nodes are stored implicitly: the
// median of a range is its split point.
class KdTree {
 public:
  explicit KdTree(const MatD& pts) : pts_(pts), idx_(static_cast<std::size_t>(pts.rows())) {
    std::iota(idx_.begin(), idx_.end(), 0);
    build(0, idx_.size(), 0);
  }

  IndexList query(Index self, int k) const {
    Heap heap;
    search(0, idx_.size(), 0, self, static_cast<std::size_t>(k), heap);
    IndexList out(heap.size());
    for (std::size_t j = heap.size(); j-- > 0;) {
      out[j] = heap.top().second;
      heap.pop();
    }
    return out;
  }

 private:
  // Max-heap on (distance^2, index): top is the current worst neighbour.
  using Entry = std::pair<double, Index>;
  using Heap = std::priority_queue<Entry>;

  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi,
                     [&](Index a, Index b) { return pts_(a, axis) < pts_(b, axis); });
    build(lo, mid, 1 - axis);
    build(mid + 1, hi, 1 - axis);
  }

  void search(std::size_t lo, std::size_t hi, int axis, Index self, std::size_t k,
              Heap& heap) const {
    if (lo >= hi) return;
    const std::size_t mid = lo + (hi - lo) / 2;
    const Index p = idx_[mid];
    if (p != self) {
      const double dx = pts_(p, 0) - pts_(self, 0);
      const double dy = pts_(p, 1) - pts_(self, 1);
      const Entry e{dx * dx + dy * dy, p};
      if (heap.size() < k) {
        heap.push(e);
      } else if (e < heap.top()) {
        heap.pop();
        heap.push(e);
      }
    }
    const double diff = pts_(self, axis) - pts_(p, axis);
    const bool left_first = diff < 0.0;
    if (left_first) {
      search(lo, mid, 1 - axis, self, k, heap);
    } else {
      search(mid + 1, hi, 1 - axis, self, k, heap);
    }
    // Equal distances must still be visited so lower indices win ties.
    if (heap.size() < k || diff * diff <= heap.top().first) {
      if (left_first) {
        search(mid + 1, hi, 1 - axis, self, k, heap);
      } else {
        search(lo, mid, 1 - axis, self, k, heap);
      }
    }
  }

  const MatD& pts_;
  IndexList idx_;
};

}  // namespace

std::vector<IndexList> knn(const MatD& coords, int k) {
  const auto n = static_cast<Index>(coords.rows());
  if (coords.cols() != 2) throw ParameterError("knn: coordinates must be N x 2");
  if (k < 1 || k >= n) {
    throw ParameterError("knn: need 1 <= k < N (k=" + std::to_string(k) + ", N=" +
                         std::to_string(n) + ")");
  }
  KdTree tree(coords);
  std::vector<IndexList> out;
  out.reserve(n);
  for (Index i = 0; i < n; ++i) out.push_back(tree.query(i, k));
  return out;
}

GradientEstimate estimate_gradient(const Eigen::Vector3d& center, const MatD& neighbors) {
  if (neighbors.cols() != 3) throw ParameterError("estimate_gradient: neighbours must be k x 3");
  if (neighbors.rows() < 2) throw ParameterError("estimate_gradient: need at least 2 neighbours");
  const Eigen::Index k = neighbors.rows();
  Eigen::MatrixXd disp(k, 2);
  Eigen::VectorXd dv(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    disp(j, 0) = neighbors(j, 0) - center[0];
    disp(j, 1) = neighbors(j, 1) - center[1];
    dv[j] = neighbors(j, 2) - center[2];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(disp);
  qr.setThreshold(1e-10);
  GradientEstimate g;
  if (qr.rank() < 2) {
    g.degenerate = true;
    return g;
  }
  g.gradient = qr.solve(dv);
  return g;
}

ComplexityScores complexity_scores(const std::vector<double>& values, const MatD& coords, int k) {
  if (static_cast<Eigen::Index>(values.size()) != coords.rows()) {
    throw ParameterError("complexity_scores: value count does not match coordinates");
  }
  const auto neighbours = knn(coords, k);
  ComplexityScores out;
  out.scores.resize(values.size());
  out.degenerate.resize(values.size());
  MatD local(k, 3);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (int j = 0; j < k; ++j) {
      const Index p = neighbours[i][j];
      local(j, 0) = coords(p, 0);
      local(j, 1) = coords(p, 1);
      local(j, 2) = values[p];
    }
    const auto g = estimate_gradient({coords(i, 0), coords(i, 1), values[i]}, local);
    out.scores[i] = g.gradient.norm();
    out.degenerate[i] = g.degenerate;
    out.degenerate_count += g.degenerate ? 1 : 0;
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ParameterError("percentile: empty input");
  if (!(pct >= 0.0 && pct <= 100.0)) throw ParameterError("percentile: pct outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::string_view region_name(Region r) {
  switch (r) {
    case Region::kSimple: return "simple";
    case Region::kModerate: return "moderate";
    case Region::kComplex: return "complex";
  }
  return "moderate";
}

std::array<std::size_t, 3> ComplexityMap::counts() const {
  std::array<std::size_t, 3> c{0, 0, 0};
  for (Region r : region) ++c[static_cast<std::size_t>(r)];
  return c;
}

ComplexityMap partition_regions(const std::vector<double>& scores, double low_pct,
                                double high_pct) {
  if (!(low_pct > 0.0 && low_pct < high_pct && high_pct < 100.0)) {
    throw ParameterError("partition_regions: need 0 < low_pct < high_pct < 100");
  }
  ComplexityMap map;
  map.scores = scores;
  map.q_low = percentile(scores, low_pct);
  map.q_high = percentile(scores, high_pct);
  map.flat = map.q_low == map.q_high &&
             std::all_of(scores.begin(), scores.end(), [&](double s) { return s == scores.front(); });
  map.region.reserve(scores.size());
  for (double s : scores) {
    map.region.push_back(s < map.q_low    ? Region::kSimple
                         : s > map.q_high ? Region::kComplex
                                          : Region::kModerate);
  }
  return map;
}

std::optional<double> RegionErrors::get(Region r) const {
  switch (r) {
    case Region::kSimple: return simple;
    case Region::kModerate: return moderate;
    case Region::kComplex: return complex;
  }
  return std::nullopt;
}

RegionErrors region_errors(const MatD& pred, const MatD& truth, const ComplexityMap& map) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() ||
      static_cast<std::size_t>(truth.rows()) != map.region.size()) {
    throw ParameterError("region_errors: shapes do not match the complexity map");
  }
  std::array<double, 3> num{0, 0, 0};
  std::array<double, 3> den{0, 0, 0};
  std::array<std::size_t, 3> count{0, 0, 0};
  for (std::size_t i = 0; i < map.region.size(); ++i) {
    const auto r = static_cast<std::size_t>(map.region[i]);
    num[r] += (pred.row(i) - truth.row(i)).squaredNorm();
    den[r] += truth.row(i).squaredNorm();
    ++count[r];
  }
  auto value = [&](std::size_t r) -> std::optional<double> {
    if (count[r] == 0) return std::nullopt;
    if (!(den[r] > 0.0)) {
      throw DataError("region_errors: " + std::string(region_name(static_cast<Region>(r))) +
                      " region has zero-norm truth");
    }
    return std::sqrt(num[r]) / std::sqrt(den[r]);
  };
  return {value(0), value(1), value(2)};
}

RegionErrors depth_benefit(const RegionErrors& shallow, const RegionErrors& deep) {
  auto f = [](std::optional<double> s, std::optional<double> d) -> std::optional<double> {
    if (!s || !d || !(*s > 0.0)) return std::nullopt;
    return (*s - *d) / *s;
  };
  return {f(shallow.simple, deep.simple), f(shallow.moderate, deep.moderate),
          f(shallow.complex, deep.complex)};
}

}  // namespace sbr
