#include "habtox/error.hpp"

namespace habtox {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::MissingValue: return "MissingValue";
    case ErrorKind::TooFewInstances: return "TooFewInstances";
    case ErrorKind::DegenerateClass: return "DegenerateClass";
    case ErrorKind::TooFewNeighbors: return "TooFewNeighbors";
    case ErrorKind::TooFewMinority: return "TooFewMinority";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::EmptyTrain: return "EmptyTrain";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::MissingCovers: return "MissingCovers";
    case ErrorKind::TooManyFeatures: return "TooManyFeatures";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewPerClass: return "TooFewPerClass";
    case ErrorKind::NoPositives: return "NoPositives";
    case ErrorKind::InfeasiblePrevalence: return "InfeasiblePrevalence";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ModelFormat: return "ModelFormat";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace habtox
