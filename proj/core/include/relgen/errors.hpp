#pragma once

#include <stdexcept>
#include <string>

namespace relgen {

/// Broad failure categories. The CLI maps these to process exit codes, so
/// every error thrown by the library must carry one.
enum class ErrorKind {
  config,      ///< unsatisfiable or malformed configuration
  dimension,   ///< mismatched tensor shapes
  contract,    ///< violated pre/postcondition or corrupt internal state
  generation,  ///< a pipeline stage failed on otherwise valid input
  io,          ///< filesystem problem (missing path, short write, ...)
  format,      ///< corrupt or unsupported serialized artifact
  degenerate,  ///< metric or label undefined on the given data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(ErrorKind::dimension, m) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& m) : Error(ErrorKind::contract, m) {}
};

struct GenerationError : Error {
  explicit GenerationError(const std::string& m) : Error(ErrorKind::generation, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error(ErrorKind::format, m) {}
};

struct DegenerateError : Error {
  explicit DegenerateError(const std::string& m) : Error(ErrorKind::degenerate, m) {}
};

}  // namespace relgen
