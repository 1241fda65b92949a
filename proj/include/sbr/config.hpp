// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sbr {

/// Flat key = value configuration. Keys are case-insensitive and '-' is
/// treated as '_', so "--n-samples" and "n_samples" name the same entry.
/// Lines starting with '#' are comments. Unknown keys are rejected.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  void merge(const Config& overrides);
  bool has(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<int> get_int_list(std::string_view key, std::vector<int> fallback) const;

  /// Sorted "key = value" lines.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  static std::string normalize_key(std::string_view key);
  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sbr
