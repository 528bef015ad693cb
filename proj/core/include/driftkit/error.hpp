#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace driftkit {

enum class ErrorCode {
  // activation cache
  EmptyTaps,
  DimMismatch,
  IoFailure,
  BadMagic,
  TruncatedPayload,
  NanDetected,
  EmptySequence,
  // corpus
  SchemaError,
  MissingPairedText,
  SingleClass,
  TooFewPerClass,
  // txtemb
  EmptyCorpus,
  MissingReference,
  // features
  SingleTap,
  TooFewTaps,
  MissingLastToken,
  MissingTap,
  TooFewSamples,
  MissingPairs,
  DegenerateDirection,
  MissingPerturbedStates,
  MissingBeforeAfter,
  // probes
  TooFewRows,
  // eval
  DegenerateResampling,
  // verification
  MissingControl,
  IncompleteChecks,
  // harness
  AlignmentError,
  DimIncompatible,
  ComponentUnavailable,
  ConfigError,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace driftkit
