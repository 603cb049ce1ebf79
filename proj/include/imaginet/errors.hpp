#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace imaginet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class OptimizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UndefinedSimilarityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UndefinedCorrelationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Checkpoint or data dimensions disagree with what the caller expected.
class ArtifactMismatchError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace imaginet
