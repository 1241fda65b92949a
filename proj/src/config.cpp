// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#include "sbr/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sbr/error.hpp"

namespace sbr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

const std::vector<std::string>& Config::known_keys() {
  static const std::vector<std::string> keys = {
      // data generation
      "height", "width", "steps", "diffusivity", "dt", "length_scale", "n_samples", "n_train",
      "out",
      // model
      "depth", "dim", "ffn_dim", "n_heads",
      // routing
      "schedule", "ratios", "schedule_lo", "schedule_hi", "routing", "gating",
      // training
      "dataset", "model", "seed", "lr", "train_steps", "batch_size", "grad_clip", "eval_every",
      "out_dir",
      // evaluation and analysis
      "reps", "threads", "bench_samples", "sample", "knn_k", "low_pct", "high_pct", "depths",
      "split"};
  return keys;
}

std::string Config::normalize_key(std::string_view key) {
  key = trim(key);
  while (!key.empty() && key.front() == '-') key.remove_prefix(1);
  std::string k(key);
  for (char& c : k) {
    c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return k;
}

Config Config::parse(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParameterError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(std::string_view key, std::string_view value) {
  const std::string k = normalize_key(key);
  const auto& known = known_keys();
  if (std::find(known.begin(), known.end(), k) == known.end()) {
    throw ParameterError("unknown config key '" + std::string(key) + "'");
  }
  value = trim(value);
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
    value = value.substr(1, value.size() - 2);
  }
  values_[k] = std::string(value);
}

void Config::merge(const Config& overrides) {
  for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

bool Config::has(std::string_view key) const { return values_.count(normalize_key(key)) > 0; }

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  auto it = values_.find(normalize_key(key));
  return it == values_.end() ? std::string(fallback) : it->second;
}

std::int64_t Config::get_int(std::string_view key, std::int64_t fallback) const {
  auto it = values_.find(normalize_key(key));
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParameterError("config key '" + it->first + "' expects an integer, got '" + s + "'");
  }
  return v;
}

double Config::get_double(std::string_view key, double fallback) const {
  auto it = values_.find(normalize_key(key));
  if (it == values_.end()) return fallback;
  double v = 0.0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParameterError("config key '" + it->first + "' expects a number, got '" + s + "'");
  }
  return v;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  auto it = values_.find(normalize_key(key));
  if (it == values_.end()) return fallback;
  std::string s = it->second;
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ParameterError("config key '" + it->first + "' expects a boolean, got '" + s + "'");
}

std::vector<int> Config::get_int_list(std::string_view key, std::vector<int> fallback) const {
  auto it = values_.find(normalize_key(key));
  if (it == values_.end()) return fallback;
  std::string_view s = trim(it->second);
  if (!s.empty() && s.front() == '[') s.remove_prefix(1);
  if (!s.empty() && s.back() == ']') s.remove_suffix(1);
  std::vector<int> out;
  while (!s.empty()) {
    const auto sep = s.find_first_of(", ");
    auto tok = trim(s.substr(0, sep));
    s = sep == std::string_view::npos ? std::string_view{} : s.substr(sep + 1);
    if (tok.empty()) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw ParameterError("config key '" + it->first + "' expects integers, got '" +
                           std::string(tok) + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sbr
