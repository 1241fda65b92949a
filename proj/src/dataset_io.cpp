// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset file layout (all little-endian):
//   "SBRDSET1"
//   u32 sample_count, u32 n_tokens, u32 d_in, u32 d_out
//   (d_in + d_out) x { f64 mean, f64 std }
//   per sample: coords N x 2, input N x d_in, target N x d_out  (f32, row-major)

#include <limits>

#include "binary_io.hpp"
#include "sbr/error.hpp"
#include "sbr/field_data.hpp"

namespace sbr {

namespace {

constexpr std::string_view kMagic = "SBRDSET1";

void put_matrix(detail::ByteWriter& w, const MatD& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
  }
}

MatD get_matrix(detail::ByteReader& r, Index rows, Index cols) {
  MatD m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = r.f32("sample payload");
  }
  return m;
}

}  // namespace

void write_dataset(const FieldDataset& ds, const std::filesystem::path& path) {
  const Index n = ds.n_tokens();
  const Index d_in = ds.input_dim();
  const Index d_out = ds.output_dim();
  for (const auto& s : ds.samples) {
    s.input.validate();
    s.target.validate();
    if (s.input.n_tokens() != n || s.target.n_tokens() != n ||
        s.input.dim() != d_in || s.target.dim() != d_out) {
      throw ParameterError("write_dataset: samples do not share N and d");
    }
  }
  if (!ds.samples.empty() &&
      ds.norm_stats.size() != static_cast<std::size_t>(d_in + d_out)) {
    throw ParameterError("write_dataset: norm_stats must have d_in + d_out entries");
  }
  for (const auto& st : ds.norm_stats) {
    if (!(st.std > 0.0)) throw ParameterError("write_dataset: norm std must be > 0");
  }

  detail::ByteWriter w;
  w.magic(kMagic);
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(d_in));
  w.u32(static_cast<std::uint32_t>(d_out));
  for (const auto& st : ds.norm_stats) {
    w.f64(st.mean);
    w.f64(st.std);
  }
  for (const auto& s : ds.samples) {
    put_matrix(w, s.input.coords);
    put_matrix(w, s.input.features);
    put_matrix(w, s.target.features);
  }
  w.save(path);
}

FieldDataset read_dataset(const std::filesystem::path& path) {
  auto r = detail::ByteReader::load(path);
  r.expect_magic(kMagic);
  const std::uint32_t count = r.u32("sample count");
  const std::uint64_t header_end = r.offset() + 12;
  const std::uint32_t n = r.u32("N");
  const std::uint32_t d_in = r.u32("d_in");
  const std::uint32_t d_out = r.u32("d_out");

  constexpr std::uint64_t kMaxIndex = std::numeric_limits<Index>::max();
  if (n > kMaxIndex || d_in > kMaxIndex || d_out > kMaxIndex) {
    throw FormatError("dimension exceeds supported range", header_end - 12);
  }
  const std::uint64_t n_stats = static_cast<std::uint64_t>(d_in) + d_out;
  r.need(n_stats * 16, "norm stats");

  FieldDataset ds;
  ds.norm_stats.reserve(n_stats);
  for (std::uint64_t c = 0; c < n_stats; ++c) {
    const auto at = r.offset();
    ChannelStats st;
    st.mean = r.f64("norm mean");
    st.std = r.f64("norm std");
    if (!(st.std > 0.0)) throw FormatError("non-positive normalization std", at);
    ds.norm_stats.push_back(st);
  }

  // Per-sample payload size in floats; guard each product against overflow.
  const std::uint64_t per_token = 2ULL + d_in + d_out;
  if (n != 0 && per_token > std::numeric_limits<std::uint64_t>::max() / 4 / n) {
    throw FormatError("N*d overflows", header_end - 12);
  }
  const std::uint64_t sample_bytes = static_cast<std::uint64_t>(n) * per_token * 4;
  if (count != 0 && sample_bytes != 0 &&
      count > r.remaining() / sample_bytes) {
    throw FormatError("file too short for declared sample count", r.offset());
  }

  ds.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    r.need(sample_bytes, "sample payload");
    FieldSample s;
    s.input.coords = get_matrix(r, n, 2);
    s.input.features = get_matrix(r, n, d_in);
    s.target.features = get_matrix(r, n, d_out);
    s.target.coords = s.input.coords;
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after last sample", r.offset());
  }
  return ds;
}

}  // namespace sbr
