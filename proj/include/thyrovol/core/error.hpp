#pragma once

#include <stdexcept>
#include <string>

namespace thyrovol {

enum class ErrorKind {
  OutOfRange,
  DegenerateStream,
  Format,
  EmptyInput,
  Config,
  Shape,
  State,
  Data,
  Domain,
  InsufficientData,
  MissingData,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

// Base class for every error raised by the toolkit. The kind lets the CLI map
// failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define THYROVOL_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  };

THYROVOL_DEFINE_ERROR(OutOfRangeError, ErrorKind::OutOfRange)
THYROVOL_DEFINE_ERROR(DegenerateStreamError, ErrorKind::DegenerateStream)
THYROVOL_DEFINE_ERROR(FormatError, ErrorKind::Format)
THYROVOL_DEFINE_ERROR(EmptyInputError, ErrorKind::EmptyInput)
THYROVOL_DEFINE_ERROR(ConfigError, ErrorKind::Config)
THYROVOL_DEFINE_ERROR(ShapeError, ErrorKind::Shape)
THYROVOL_DEFINE_ERROR(StateError, ErrorKind::State)
THYROVOL_DEFINE_ERROR(DataError, ErrorKind::Data)
THYROVOL_DEFINE_ERROR(DomainError, ErrorKind::Domain)
THYROVOL_DEFINE_ERROR(InsufficientDataError, ErrorKind::InsufficientData)
THYROVOL_DEFINE_ERROR(MissingDataError, ErrorKind::MissingData)
THYROVOL_DEFINE_ERROR(IoError, ErrorKind::Io)

#undef THYROVOL_DEFINE_ERROR

}  // namespace thyrovol
