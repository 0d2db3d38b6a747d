#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phaseonium {

enum class ErrorKind {
  // model construction / validation
  NegativeRate,
  BranchingNotNormalized,
  DuplicateLabel,
  ChannelOverlap,
  DimensionMismatch,
  NonHermitianInput,
  UnknownLine,
  NonpositiveCalibration,
  ShrinkNotAllowed,
  EvenNodeCount,
  LengthMismatch,
  InsufficientPoints,
  InvalidArgument,
  // configuration / io
  SyntaxError,
  UnknownKey,
  DomainError,
  IoError,
  // numerical failures
  SingularSystem,
  TruncationNotConverged,
  StepTooLarge,
  CalibrationDiverged,
  StepRejected,
  NoPeakFound,
  ZeroAmplitude,
};

std::string_view to_string(ErrorKind kind);

/// True for failures of the numerics rather than of the inputs.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace phaseonium
