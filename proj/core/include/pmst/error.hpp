#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmst {

enum class ErrorCode {
  InvalidArgument,
  Io,
  ParseError,
  MissingColumn,
  NonDailyDates,
  DuplicateStationDay,
  MissingCovariate,
  InvalidStation,
  NonPositiveResponse,
  UnknownCovariate,
  InvalidSpec,
  NonFiniteInput,
  DuplicateLocationWithoutJitter,
  NotPositiveDefinite,
  EmptyField,
  DegenerateGrid,
  NoConvergence,
  AllMissing,
  TargetOutsideDateRange,
  MissingTargetCovariate,
  TooFewDistinctValues,
  RankDeficientDesign,
  EmptyInput,
  LengthMismatch,
  DegenerateObs,
  InsufficientData,
  UnknownVariable,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonDailyDates: return "NonDailyDates";
    case ErrorCode::DuplicateStationDay: return "DuplicateStationDay";
    case ErrorCode::MissingCovariate: return "MissingCovariate";
    case ErrorCode::InvalidStation: return "InvalidStation";
    case ErrorCode::NonPositiveResponse: return "NonPositiveResponse";
    case ErrorCode::UnknownCovariate: return "UnknownCovariate";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DuplicateLocationWithoutJitter: return "DuplicateLocationWithoutJitter";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::EmptyField: return "EmptyField";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::TargetOutsideDateRange: return "TargetOutsideDateRange";
    case ErrorCode::MissingTargetCovariate: return "MissingTargetCovariate";
    case ErrorCode::TooFewDistinctValues: return "TooFewDistinctValues";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateObs: return "DegenerateObs";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
  }
  return "Unknown";
}

}  // namespace pmst
