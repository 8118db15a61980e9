#include "logitforge/error.hpp"

#include <cmath>
#include <numbers>

#include "logitforge/rng.hpp"

namespace logitforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNoSamplesForClass: return "NoSamplesForClass";
    case ErrorCode::kMissingClass: return "MissingClass";
    case ErrorCode::kUnknownClass: return "UnknownClass";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInvalidDistribution: return "InvalidDistribution";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kTooFewClasses: return "TooFewClasses";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kZeroNormRepresentative: return "ZeroNormRepresentative";
    case ErrorCode::kArchitectureMismatch: return "ArchitectureMismatch";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

// Box-Muller; the second variate is discarded so each call consumes a fixed
// number of engine outputs.
double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace logitforge
