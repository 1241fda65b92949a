// Copyright 2026 The sbr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sbr {

enum class ErrorKind {
  kParameter,
  kData,
  kFormat,
  kNumeric,
  kIo,
};

/// Base class of every error raised by the library. The C API maps `kind()`
/// onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ErrorKind::kParameter, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// Malformed serialized input; `offset()` is the byte position that failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(ErrorKind::kFormat,
              what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Non-finite values appeared during computation. `layer()` is the 1-based
/// block index, or 0 when the failure is outside the backbone.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int layer)
      : Error(ErrorKind::kNumeric, what), layer_(layer) {}

  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace sbr
