#include <algorithm>
#include <cctype>
#include <string>

#include "qcs/error.hpp"
#include "qcs/types.hpp"

namespace qcs {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::StratumTooSmall: return "StratumTooSmall";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::ZeroLengthAudio: return "ZeroLengthAudio";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::MagnitudeOutOfRange: return "MagnitudeOutOfRange";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::PlanMismatch: return "PlanMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::ArchMismatch: return "ArchMismatch";
    case ErrorKind::ChecksumFailure: return "ChecksumFailure";
    case ErrorKind::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorKind::MissingBreath: return "MissingBreath";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::CorruptRecord: return "CorruptRecord";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
  }
  return "Unknown";
}

std::string_view to_string(Label label) noexcept { return label == Label::Covid ? "covid" : "healthy"; }

std::string_view to_string(SoundKind kind) noexcept { return kind == SoundKind::Cough ? "cough" : "breath"; }

std::optional<Label> parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "covid" || lower == "covid-19" || lower == "covid19") return Label::Covid;
  if (lower == "healthy") return Label::Healthy;
  return std::nullopt;
}

}  // namespace qcs
