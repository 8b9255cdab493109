#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qcs {

enum class ErrorKind {
  // corpus
  MissingFile,
  DuplicateId,
  MalformedRow,
  StratumTooSmall,
  IoError,
  // audio
  UnsupportedEncoding,
  TruncatedFile,
  ZeroLengthAudio,
  // spectrogram
  ConfigInvalid,
  // augment
  MagnitudeOutOfRange,
  EmptyClass,
  PlanMismatch,
  // nn
  ShapeMismatch,
  EmptyTrainingSet,
  VersionMismatch,
  ArchMismatch,
  ChecksumFailure,
  // pipeline
  EmptyEnsemble,
  MissingBreath,
  // eval
  LengthMismatch,
  // service / storage
  NotFound,
  CorruptRecord,
  // shared
  PreconditionViolation,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::PreconditionViolation, what);
}

}  // namespace qcs
