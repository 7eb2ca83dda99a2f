#pragma once

#include <stdexcept>
#include <string>

namespace bodyfit {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

class BehindCamera : public Error {
 public:
  explicit BehindCamera(const std::string& what) : Error("behind-camera", what) {}
};

class InvalidStart : public Error {
 public:
  explicit InvalidStart(const std::string& what) : Error("invalid-start", what) {}
};

class UnfittableFrame : public Error {
 public:
  explicit UnfittableFrame(const std::string& what) : Error("unfittable-frame", what) {}
};

class SequenceFailure : public Error {
 public:
  explicit SequenceFailure(const std::string& what) : Error("sequence-failure", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse-error", what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error("validation-error", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io-error", what) {}
};

}  // namespace bodyfit
