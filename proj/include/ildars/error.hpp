#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ildars {

enum class ErrorKind {
  DegenerateInput,
  ParallelLines,
  DegenerateConfiguration,
  DegenerateMeasurement,
  OutsideHemisphere,
  CoplanarPair,
  InsufficientMeasurements,
  AllPairsDegenerate,
  AllMeasurementsDegenerate,
  DegenerateGeometry,
  NonPositiveDistance,
  NoWalls,
  UnknownComboToken,
  InvalidArgument,
  Parse,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::ParallelLines: return "ParallelLines";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::DegenerateMeasurement: return "DegenerateMeasurement";
    case ErrorKind::OutsideHemisphere: return "OutsideHemisphere";
    case ErrorKind::CoplanarPair: return "CoplanarPair";
    case ErrorKind::InsufficientMeasurements: return "InsufficientMeasurements";
    case ErrorKind::AllPairsDegenerate: return "AllPairsDegenerate";
    case ErrorKind::AllMeasurementsDegenerate: return "AllMeasurementsDegenerate";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::NonPositiveDistance: return "NonPositiveDistance";
    case ErrorKind::NoWalls: return "NoWalls";
    case ErrorKind::UnknownComboToken: return "UnknownComboToken";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; callers that need to distinguish
/// failure modes switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ildars
