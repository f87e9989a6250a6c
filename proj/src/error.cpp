#include "xaihealth/error.hpp"

namespace xaihealth {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::MissingAttestation: return "MissingAttestation";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::UnsupportedForExternal: return "UnsupportedForExternal";
    case ErrorCode::ExternalModelFailure: return "ExternalModelFailure";
    case ErrorCode::ProcessDied: return "ProcessDied";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadFraction: return "BadFraction";
    case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::AllZeroAttribution: return "AllZeroAttribution";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingOutcome: return "MissingOutcome";
    case ErrorCode::DuplicateJudgment: return "DuplicateJudgment";
    case ErrorCode::SessionComplete: return "SessionComplete";
    case ErrorCode::UnknownCase: return "UnknownCase";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::IncompleteBank: return "IncompleteBank";
    case ErrorCode::ConfigurationIncomplete: return "ConfigurationIncomplete";
    case ErrorCode::NoCompleteSessions: return "NoCompleteSessions";
    case ErrorCode::StalePhaseResult: return "StalePhaseResult";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::NothingToReport: return "NothingToReport";
    case ErrorCode::UnknownStudy: return "UnknownStudy";
    case ErrorCode::AuditCorrupt: return "AuditCorrupt";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace xaihealth
