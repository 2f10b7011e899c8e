#pragma once

#include <stdexcept>
#include <string>

namespace geossl {

enum class ErrorCode {
  NotFound,
  EmptyClass,
  DecodeError,
  StratificationError,
  InvalidFraction,
  InvalidArgument,
  InvalidTemperature,
  DegenerateEmbedding,
  ConfigError,
  CheckpointIncompatible,
  VersionError,
  FormatError,
  IoError,
  Unsupported,
  Undefined,
};

const char* error_code_name(ErrorCode code);

/// Base exception for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace geossl
