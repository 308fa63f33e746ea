#include "uavlora/error.hpp"

namespace uavlora {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroDistance: return "ZeroDistance";
    case ErrorCode::InvalidArea: return "InvalidArea";
    case ErrorCode::Unallocated: return "Unallocated";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IncompleteTrajectory: return "IncompleteTrajectory";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::AllActionsEliminated: return "AllActionsEliminated";
    case ErrorCode::TooManyEds: return "TooManyEds";
    case ErrorCode::NoFeasibleIndividual: return "NoFeasibleIndividual";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::NoSolution: return "NoSolution";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace uavlora
