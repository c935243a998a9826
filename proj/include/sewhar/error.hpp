#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sewhar {

// Base of every error raised by the library. Subclasses name the failure
// so callers can catch exactly what they are prepared to handle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define SEWHAR_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                        \
   public:                                                           \
    using Error::Error;                                              \
    const char* kind() const noexcept override { return #Name; }     \
  }

// event_log
class MalformedLine : public Error {
 public:
  MalformedLine(const std::string& what, std::size_t line_number = 0)
      : Error(line_number == 0 ? what : "line " + std::to_string(line_number) + ": " + what),
        line_number_(line_number) {}

  const char* kind() const noexcept override { return "MalformedLine"; }
  // 1-based; 0 when the line was parsed outside of a stream.
  std::size_t line_number() const { return line_number_; }

 private:
  std::size_t line_number_;
};

SEWHAR_DEFINE_ERROR(EmptyInput);
SEWHAR_DEFINE_ERROR(DanglingEnd);
SEWHAR_DEFINE_ERROR(ArtifactError);

// encoding
SEWHAR_DEFINE_ERROR(EmptyCorpus);
SEWHAR_DEFINE_ERROR(UnknownWord);

// nn_core / models
SEWHAR_DEFINE_ERROR(TokenOutOfRange);
SEWHAR_DEFINE_ERROR(ShapeMismatch);
SEWHAR_DEFINE_ERROR(DegenerateBatch);
SEWHAR_DEFINE_ERROR(TargetOutOfRange);
SEWHAR_DEFINE_ERROR(NonFiniteValue);
SEWHAR_DEFINE_ERROR(InvalidConfig);
SEWHAR_DEFINE_ERROR(CheckpointError);
SEWHAR_DEFINE_ERROR(ArchitectureMismatch);

// train_eval
SEWHAR_DEFINE_ERROR(ClassTooSmall);
SEWHAR_DEFINE_ERROR(NonFiniteLoss);
SEWHAR_DEFINE_ERROR(EmptyMatrix);

#undef SEWHAR_DEFINE_ERROR

}  // namespace sewhar
