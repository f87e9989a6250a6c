#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xaihealth {

enum class ErrorCode {
  // tensor-core
  BadMagic,
  TruncatedData,
  NonFiniteValue,
  InvalidShape,
  MissingFile,
  ShapeMismatch,
  LabelOutOfRange,
  MissingAttestation,
  InvalidManifest,
  EmptyDataset,
  // models
  InvalidModel,
  UnsupportedForExternal,
  ExternalModelFailure,
  ProcessDied,
  ProtocolViolation,
  Timeout,
  // explainers / sab / metrics
  InvalidConfig,
  BadFraction,
  RegionOutOfBounds,
  EmptyGroundTruth,
  AllZeroAttribution,
  EmptyInput,
  // trust
  MissingOutcome,
  DuplicateJudgment,
  SessionComplete,
  UnknownCase,
  UnknownSession,
  // altai
  IncompleteBank,
  // pipeline
  ConfigurationIncomplete,
  NoCompleteSessions,
  StalePhaseResult,
  WrongPhase,
  NothingToReport,
  UnknownStudy,
  AuditCorrupt,
  Io,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xaihealth
