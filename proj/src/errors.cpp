#include "geossl/errors.hpp"

namespace geossl {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::StratificationError: return "StratificationError";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidTemperature: return "InvalidTemperature";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CheckpointIncompatible: return "CheckpointIncompatible";
    case ErrorCode::VersionError: return "VersionError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::Undefined: return "Undefined";
  }
  return "Error";
}

}  // namespace geossl
