#include "thyrovol/core/error.hpp"

namespace thyrovol {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::DegenerateStream: return "DegenerateStream";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::State: return "StateError";
    case ErrorKind::Data: return "DataError";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::MissingData: return "MissingData";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace thyrovol
