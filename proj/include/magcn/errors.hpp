#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace magcn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents.
struct DimensionError : Error {
  using Error::Error;
};

/// Invalid hyperparameter combination (divisibility, empty modality set, ...).
struct ConfigError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

/// Caller broke an operation precondition that is not about shapes.
struct ContractError : Error {
  using Error::Error;
};

/// Modalities of one utterance disagree on sequence length.
struct AlignmentError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace magcn
