#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace attnie {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto exit codes, so keep the hierarchy shallow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between tensors.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters or model/training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Feature index or window problems while building model inputs.
class EncodingError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Binary container or file layout problems (checkpoints, vector files).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Annotation spans that disagree with the text, cyclic events, etc.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// An annotation refers to an id that does not exist.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace attnie
