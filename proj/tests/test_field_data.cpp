// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sbr/error.hpp"
#include "sbr/field_data.hpp"

namespace sbr {
namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sbr_test_" + name);
}

double sum(const Grid2D& g) {
  return std::accumulate(g.values().begin(), g.values().end(), 0.0);
}

double max_abs(const Grid2D& g) {
  double m = 0.0;
  for (double v : g.values()) m = std::max(m, std::abs(v));
  return m;
}

// Variance of the periodic 5-point Laplacian, computed independently.
double laplacian_variance(const Grid2D& g) {
  const int h = g.height();
  const int w = g.width();
  std::vector<double> lap;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      lap.push_back(g.at((r + 1) % h, c) + g.at((r + h - 1) % h, c) + g.at(r, (c + 1) % w) +
                    g.at(r, (c + w - 1) % w) - 4.0 * g.at(r, c));
    }
  }
  const double mean = std::accumulate(lap.begin(), lap.end(), 0.0) / lap.size();
  double var = 0.0;
  for (double v : lap) var += (v - mean) * (v - mean);
  return var / lap.size();
}

TEST(Grid2D, RejectsTinyAndNonFinite) {
  EXPECT_THROW(Grid2D(1, 3, 0.0), ParameterError);
  EXPECT_THROW(Grid2D(2, 2, std::vector<double>{1, 2, NAN, 4}), DataError);
  EXPECT_THROW(Grid2D(2, 2, std::vector<double>{1, 2, 3}), ParameterError);
}

TEST(SampleGrf, DeterministicAndSeedDependent) {
  const Grid2D a = sample_grf(16, 16, 2.0, 7);
  const Grid2D b = sample_grf(16, 16, 2.0, 7);
  const Grid2D c = sample_grf(16, 16, 2.0, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.values(), c.values());
  EXPECT_NE(sample_grf(8, 8, 1.0, 0).values(), sample_grf(8, 8, 1.0, 1).values());
}

TEST(SampleGrf, Standardized) {
  const Grid2D g = sample_grf(32, 32, 3.0, 1);
  const double mean = sum(g) / g.size();
  double var = 0.0;
  for (double v : g.values()) var += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var / g.size(), 1.0, 1e-12);
}

TEST(SampleGrf, LongerLengthScaleIsSmoother) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    EXPECT_LT(laplacian_variance(sample_grf(32, 32, 8.0, seed)),
              laplacian_variance(sample_grf(32, 32, 1.0, seed)));
  }
}

TEST(SampleGrf, RejectsBadArguments) {
  EXPECT_THROW(sample_grf(3, 8, 1.0, 0), ParameterError);
  EXPECT_THROW(sample_grf(8, 8, 0.0, 0), ParameterError);
  EXPECT_THROW(sample_grf(8, 8, -1.0, 0), ParameterError);
}

TEST(Heat2D, ZeroStepsIsIdentity) {
  const Grid2D g = sample_grf(8, 8, 1.5, 3);
  EXPECT_EQ(solve_heat2d(g, 1.0, max_stable_dt(8, 8, 1.0), 0), g);
}

TEST(Heat2D, ConstantFieldUnchanged) {
  const Grid2D g(8, 12, 2.5);
  EXPECT_EQ(solve_heat2d(g, 0.7, max_stable_dt(8, 12, 0.7), 25), g);
}

TEST(Heat2D, ConservesSum) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<double> shifted = sample_grf(16, 16, 2.0, seed).values();
    for (double& v : shifted) v += 3.0;
    const Grid2D g(16, 16, shifted);
    const Grid2D out = solve_heat2d(g, 1.0, max_stable_dt(16, 16, 1.0), 100);
    EXPECT_LT(std::abs(sum(out) - sum(g)) / std::abs(sum(g)), 1e-10);
  }
}

TEST(Heat2D, MaximumPrinciple) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Grid2D g = sample_grf(16, 16, 1.0, seed);
    const Grid2D out = solve_heat2d(g, 1.0, max_stable_dt(16, 16, 1.0), 40);
    EXPECT_LE(max_abs(out), max_abs(g));
  }
}

TEST(Heat2D, SpikeIsRotationSymmetricAndDecays) {
  const int n = 9;
  Grid2D spike(n, n, 0.0);
  spike.at(4, 4) = 1.0;
  const Grid2D out = solve_heat2d(spike, 1.0, max_stable_dt(n, n, 1.0), 10);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      // 90 degree rotation about the centre maps (r, c) to (c, n-1-r).
      EXPECT_DOUBLE_EQ(out.at(r, c), out.at(c, n - 1 - r));
    }
  }
  EXPECT_LT(max_abs(out), 1.0);
}

TEST(Heat2D, RefusesUnstableStep) {
  const Grid2D g(8, 8, 0.0);
  const double limit = max_stable_dt(8, 8, 1.0);
  EXPECT_DOUBLE_EQ(limit, 1.0 / (64.0 * 4.0));
  EXPECT_NO_THROW(solve_heat2d(g, 1.0, limit, 1));
  EXPECT_THROW(solve_heat2d(g, 1.0, limit * 1.01, 1), ParameterError);
  EXPECT_THROW(solve_heat2d(g, 1.0, limit, -1), ParameterError);
}

TEST(Tokenize, TwoByTwoLayout) {
  const Grid2D in(2, 2, std::vector<double>{1, 2, 3, 4});
  const Grid2D out(2, 2, std::vector<double>{5, 6, 7, 8});
  const auto [x, y] = tokenize(in, out);
  ASSERT_EQ(x.n_tokens(), 4);
  EXPECT_EQ(x.dim(), 3);
  EXPECT_EQ(y.dim(), 1);
  const double expected[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(x.coords(i, 0), expected[i][0]);
    EXPECT_EQ(x.coords(i, 1), expected[i][1]);
    EXPECT_EQ(x.features(i, 0), i + 1);
    EXPECT_EQ(x.features(i, 1), expected[i][0]);
    EXPECT_EQ(x.features(i, 2), expected[i][1]);
    EXPECT_EQ(y.features(i, 0), i + 5);
  }
}

TEST(Tokenize, TokenCountAndRoundTrip) {
  const Grid2D g = sample_grf(64, 64, 3.0, 2);
  const auto [x, y] = tokenize(g, g);
  EXPECT_EQ(x.n_tokens(), 4096);
  EXPECT_EQ(regrid(x, 64, 64), g);
  EXPECT_EQ(regrid(y, 64, 64), g);
  const Grid2D r = sample_grf(8, 6, 1.0, 2);
  EXPECT_EQ(regrid(tokenize(r, r).first, 8, 6), r);
}

TEST(Tokenize, RejectsMismatchedGrids) {
  EXPECT_THROW(tokenize(Grid2D(4, 4, 0.0), Grid2D(4, 5, 0.0)), ParameterError);
}

GenParams small_params() {
  GenParams p;
  p.height = 8;
  p.width = 8;
  p.steps = 5;
  p.n_samples = 10;
  p.seed = 11;
  return p;
}

TEST(Dataset, GenerationIsDeterministic) {
  const FieldDataset a = generate_dataset(small_params());
  const FieldDataset b = generate_dataset(small_params());
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].input.features, b.samples[i].input.features);
    EXPECT_EQ(a.samples[i].target.features, b.samples[i].target.features);
  }
  EXPECT_EQ(a.norm_stats, b.norm_stats);
}

TEST(Dataset, NormStatsComeFromTrainingSplit) {
  const FieldDataset ds = generate_dataset(small_params());
  ASSERT_EQ(ds.norm_stats.size(), 4u);
  for (const auto& s : ds.norm_stats) EXPECT_GT(s.std, 0.0);
  // Normalized training inputs have zero mean per channel (f32 rounding aside).
  const std::size_t n_train = default_train_count(10);
  EXPECT_EQ(n_train, 8u);
  double mean = 0.0;
  for (std::size_t i = 0; i < n_train; ++i) mean += ds.samples[i].input.features.col(0).sum();
  EXPECT_NEAR(mean / (n_train * 64), 0.0, 1e-6);
}

TEST(Dataset, RoundTripIsBitExact) {
  const FieldDataset ds = generate_dataset(small_params());
  const auto path = temp_path("roundtrip.bin");
  write_dataset(ds, path);
  const FieldDataset back = read_dataset(path);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.norm_stats, ds.norm_stats);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].input.features, ds.samples[i].input.features);
    EXPECT_EQ(back.samples[i].input.coords, ds.samples[i].input.coords);
    EXPECT_EQ(back.samples[i].target.features, ds.samples[i].target.features);
  }
  // Writing again reproduces the same bytes.
  const auto path2 = temp_path("roundtrip2.bin");
  write_dataset(back, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  EXPECT_EQ(b1, b2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST(Dataset, HeaderLayout) {
  const FieldDataset ds = generate_dataset(small_params());
  const auto path = temp_path("layout.bin");
  write_dataset(ds, path);
  std::ifstream f(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)), {});
  ASSERT_GE(bytes.size(), 24u);
  EXPECT_EQ(bytes.substr(0, 8), "SBRDSET1");
  auto u32 = [&](std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24;
  };
  EXPECT_EQ(u32(8), 10u);
  EXPECT_EQ(u32(12), 64u);
  EXPECT_EQ(u32(16), 3u);
  EXPECT_EQ(u32(20), 1u);
  const std::size_t header = 24 + 4 * 16;
  const std::size_t per_sample = 64 * (2 + 3 + 1) * 4;
  EXPECT_EQ(bytes.size(), header + 10 * per_sample);
  std::filesystem::remove(path);
}

TEST(Dataset, EmptyDatasetRoundTrips) {
  FieldDataset ds;
  const auto path = temp_path("empty.bin");
  write_dataset(ds, path);
  EXPECT_EQ(std::filesystem::file_size(path), 24u);
  EXPECT_EQ(read_dataset(path).size(), 0u);
  std::filesystem::remove(path);
}

TEST(Dataset, BadMagicReportsOffsetZero) {
  const auto path = temp_path("magic.bin");
  {
    std::ofstream f(path, std::ios::binary);
    f << "XXXXXXXX" << std::string(16, '\0');
  }
  try {
    read_dataset(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  std::filesystem::remove(path);
}

TEST(Dataset, TruncatedFileIsFormatError) {
  const FieldDataset ds = generate_dataset(small_params());
  const auto path = temp_path("trunc.bin");
  write_dataset(ds, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 7);
  EXPECT_THROW(read_dataset(path), FormatError);
  std::filesystem::resize_file(path, 12);
  EXPECT_THROW(read_dataset(path), FormatError);
  std::filesystem::remove(path);
}

TEST(Dataset, MissingFileIsIoError) {
  EXPECT_THROW(read_dataset(temp_path("does_not_exist.bin")), IoError);
}

}  // namespace
}  // namespace sbr
