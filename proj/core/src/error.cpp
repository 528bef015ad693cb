#include "driftkit/error.hpp"

namespace driftkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyTaps:
      return "EmptyTaps";
    case ErrorCode::DimMismatch:
      return "DimMismatch";
    case ErrorCode::IoFailure:
      return "IoFailure";
    case ErrorCode::BadMagic:
      return "BadMagic";
    case ErrorCode::TruncatedPayload:
      return "TruncatedPayload";
    case ErrorCode::NanDetected:
      return "NanDetected";
    case ErrorCode::EmptySequence:
      return "EmptySequence";
    case ErrorCode::SchemaError:
      return "SchemaError";
    case ErrorCode::MissingPairedText:
      return "MissingPairedText";
    case ErrorCode::SingleClass:
      return "SingleClass";
    case ErrorCode::TooFewPerClass:
      return "TooFewPerClass";
    case ErrorCode::EmptyCorpus:
      return "EmptyCorpus";
    case ErrorCode::MissingReference:
      return "MissingReference";
    case ErrorCode::SingleTap:
      return "SingleTap";
    case ErrorCode::TooFewTaps:
      return "TooFewTaps";
    case ErrorCode::MissingLastToken:
      return "MissingLastToken";
    case ErrorCode::MissingTap:
      return "MissingTap";
    case ErrorCode::TooFewSamples:
      return "TooFewSamples";
    case ErrorCode::MissingPairs:
      return "MissingPairs";
    case ErrorCode::DegenerateDirection:
      return "DegenerateDirection";
    case ErrorCode::MissingPerturbedStates:
      return "MissingPerturbedStates";
    case ErrorCode::MissingBeforeAfter:
      return "MissingBeforeAfter";
    case ErrorCode::TooFewRows:
      return "TooFewRows";
    case ErrorCode::DegenerateResampling:
      return "DegenerateResampling";
    case ErrorCode::MissingControl:
      return "MissingControl";
    case ErrorCode::IncompleteChecks:
      return "IncompleteChecks";
    case ErrorCode::AlignmentError:
      return "AlignmentError";
    case ErrorCode::DimIncompatible:
      return "DimIncompatible";
    case ErrorCode::ComponentUnavailable:
      return "ComponentUnavailable";
    case ErrorCode::ConfigError:
      return "ConfigError";
    case ErrorCode::InvalidArgument:
      return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace driftkit
