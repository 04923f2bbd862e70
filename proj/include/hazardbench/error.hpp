#pragma once

#include <stdexcept>
#include <string>

namespace hazardbench {

enum class ErrorCode {
  // data validation
  LengthMismatch,
  NonFiniteValue,
  NegativeTime,
  NoEvents,
  DuplicateVariableName,
  DimensionMismatch,
  UnknownVariable,
  InvalidArgument,
  // csv / imputation
  MissingColumn,
  RaggedRow,
  UnparsableNumber,
  AllRowsDeleted,
  ColumnAllMissing,
  EmptyPartition,
  // model fitting
  ConstantColumn,
  NoVariablesSelected,
  NoComparablePairs,
  SingularHessian,
  DivergedLoss,
  NonFiniteResult,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the whole library.  Messages are prefixed with
// the module that raised them, e.g. "cox: singular Hessian at iteration 3".
class HazardError : public std::runtime_error {
 public:
  HazardError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

  // Numerical failures map to CLI exit code 2, everything else to 1.
  bool numerical() const {
    return code_ == ErrorCode::SingularHessian ||
           code_ == ErrorCode::DivergedLoss ||
           code_ == ErrorCode::NonFiniteResult;
  }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::NoEvents: return "NoEvents";
    case ErrorCode::DuplicateVariableName: return "DuplicateVariableName";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::UnparsableNumber: return "UnparsableNumber";
    case ErrorCode::AllRowsDeleted: return "AllRowsDeleted";
    case ErrorCode::ColumnAllMissing: return "ColumnAllMissing";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::NoVariablesSelected: return "NoVariablesSelected";
    case ErrorCode::NoComparablePairs: return "NoComparablePairs";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::NonFiniteResult: return "NonFiniteResult";
  }
  return "Unknown";
}

}  // namespace hazardbench
