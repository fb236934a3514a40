// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmsair {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity was produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset line; `line()` is 1-based.
class DatasetError : public Error {
 public:
  DatasetError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary file; `offset()` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error("byte offset " + std::to_string(offset) + ": " + what), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A record has no embedding or image in the configured provider.
class MissingEmbeddingError : public Error {
 public:
  MissingEmbeddingError(const std::string& id, const std::string& what)
      : Error("missing embedding for '" + id + "': " + what), id_(id) {}

  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmsair
