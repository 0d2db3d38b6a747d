#include "phaseonium/error.hpp"

namespace phaseonium {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::BranchingNotNormalized: return "BranchingNotNormalized";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::ChannelOverlap: return "ChannelOverlap";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonHermitianInput: return "NonHermitianInput";
    case ErrorKind::UnknownLine: return "UnknownLine";
    case ErrorKind::NonpositiveCalibration: return "NonpositiveCalibration";
    case ErrorKind::ShrinkNotAllowed: return "ShrinkNotAllowed";
    case ErrorKind::EvenNodeCount: return "EvenNodeCount";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::TruncationNotConverged: return "TruncationNotConverged";
    case ErrorKind::StepTooLarge: return "StepTooLarge";
    case ErrorKind::CalibrationDiverged: return "CalibrationDiverged";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::NoPeakFound: return "NoPeakFound";
    case ErrorKind::ZeroAmplitude: return "ZeroAmplitude";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularSystem:
    case ErrorKind::TruncationNotConverged:
    case ErrorKind::StepTooLarge:
    case ErrorKind::CalibrationDiverged:
    case ErrorKind::StepRejected:
    case ErrorKind::NoPeakFound:
    case ErrorKind::ZeroAmplitude:
      return true;
    default:
      return false;
  }
}

}  // namespace phaseonium
