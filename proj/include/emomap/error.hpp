#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emomap {

enum class ErrorCode {
  // geometry
  CenterAmbiguous,
  OutOfDisc,
  InvalidTagMap,
  // experiment lifecycle
  InvalidSchedule,
  UnknownTagMap,
  UnknownExperiment,
  UnknownParticipant,
  UnknownPicture,
  UnknownInvitation,
  AlreadyExists,
  ModeImmutable,
  ExperimentFinished,
  InvalidStateTransition,
  NoPictures,
  WrongMode,
  ExperimentNotActive,
  // authentication
  BadCredentials,
  TokenExpired,
  Unauthorized,
  SessionInvalid,
  Forbidden,
  // ingest
  MissingLocation,
  InvalidLocation,
  ImageTooLarge,
  UndecodableImage,
  // aggregation
  EmptyInput,
  InvalidCellSize,
  // generic
  BadRequest,
  // storage
  StorageFull,
  SerializationFailure,
  CorruptRecord,
  IoError,
};

/// Stable snake_case code used in API error bodies and CLI diagnostics.
std::string_view code_name(ErrorCode code) noexcept;

/// HTTP status an API response carries for this code.
int http_status(ErrorCode code) noexcept;

/// True for codes that originate in the storage layer (CLI exit code 3).
bool is_io_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace emomap
