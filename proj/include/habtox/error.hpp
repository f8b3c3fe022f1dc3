#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace habtox {

enum class ErrorKind {
  MalformedRow,
  SchemaMismatch,
  MissingFile,
  EmptyDataset,
  MissingValue,
  TooFewInstances,
  DegenerateClass,
  TooFewNeighbors,
  TooFewMinority,
  AllZero,
  EmptyTrain,
  ArityMismatch,
  MissingCovers,
  TooManyFeatures,
  LengthMismatch,
  TooFewPerClass,
  NoPositives,
  InfeasiblePrevalence,
  InvalidArgument,
  ModelFormat,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class MalformedRowError : public Error {
 public:
  MalformedRowError(std::size_t line, const std::string& reason)
      : Error(ErrorKind::MalformedRow,
              "line " + std::to_string(line) + ": " + reason),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace habtox
