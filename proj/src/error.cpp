#include "mdsyn/error.hpp"

namespace mdsyn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EstimationFailed: return "EstimationFailed";
    case ErrorCode::CheiralityAmbiguous: return "CheiralityAmbiguous";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BorderKeypoint: return "BorderKeypoint";
    case ErrorCode::FlatPatch: return "FlatPatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BoundsError: return "BoundsError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingModality: return "MissingModality";
    case ErrorCode::UnknownModality: return "UnknownModality";
    case ErrorCode::GeneratorFailed: return "GeneratorFailed";
    case ErrorCode::IncompleteOutput: return "IncompleteOutput";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace mdsyn
