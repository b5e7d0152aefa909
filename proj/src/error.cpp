#include "emomap/error.hpp"

namespace emomap {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CenterAmbiguous: return "center_ambiguous";
    case ErrorCode::OutOfDisc: return "out_of_disc";
    case ErrorCode::InvalidTagMap: return "invalid_tag_map";
    case ErrorCode::InvalidSchedule: return "invalid_schedule";
    case ErrorCode::UnknownTagMap: return "unknown_tag_map";
    case ErrorCode::UnknownExperiment: return "unknown_experiment";
    case ErrorCode::UnknownParticipant: return "unknown_participant";
    case ErrorCode::UnknownPicture: return "unknown_picture";
    case ErrorCode::UnknownInvitation: return "unknown_invitation";
    case ErrorCode::AlreadyExists: return "already_exists";
    case ErrorCode::ModeImmutable: return "mode_immutable";
    case ErrorCode::ExperimentFinished: return "experiment_finished";
    case ErrorCode::InvalidStateTransition: return "invalid_state_transition";
    case ErrorCode::NoPictures: return "no_pictures";
    case ErrorCode::WrongMode: return "wrong_mode";
    case ErrorCode::ExperimentNotActive: return "experiment_not_active";
    case ErrorCode::BadCredentials: return "bad_credentials";
    case ErrorCode::TokenExpired: return "token_expired";
    case ErrorCode::Unauthorized: return "unauthorized";
    case ErrorCode::SessionInvalid: return "session_invalid";
    case ErrorCode::Forbidden: return "forbidden";
    case ErrorCode::MissingLocation: return "missing_location";
    case ErrorCode::InvalidLocation: return "invalid_location";
    case ErrorCode::ImageTooLarge: return "image_too_large";
    case ErrorCode::UndecodableImage: return "undecodable_image";
    case ErrorCode::EmptyInput: return "empty_input";
    case ErrorCode::InvalidCellSize: return "invalid_cell_size";
    case ErrorCode::BadRequest: return "bad_request";
    case ErrorCode::StorageFull: return "storage_full";
    case ErrorCode::SerializationFailure: return "serialization_failure";
    case ErrorCode::CorruptRecord: return "corrupt_record";
    case ErrorCode::IoError: return "io_error";
  }
  return "unknown";
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadCredentials:
    case ErrorCode::Unauthorized:
    case ErrorCode::SessionInvalid:
      return 401;
    case ErrorCode::Forbidden:
    case ErrorCode::TokenExpired:
    case ErrorCode::ExperimentNotActive:
      return 403;
    case ErrorCode::UnknownTagMap:
    case ErrorCode::UnknownExperiment:
    case ErrorCode::UnknownParticipant:
    case ErrorCode::UnknownPicture:
    case ErrorCode::UnknownInvitation:
      return 404;
    case ErrorCode::AlreadyExists:
    case ErrorCode::ModeImmutable:
    case ErrorCode::ExperimentFinished:
    case ErrorCode::InvalidStateTransition:
    case ErrorCode::NoPictures:
    case ErrorCode::WrongMode:
      return 409;
    case ErrorCode::ImageTooLarge:
      return 413;
    case ErrorCode::CenterAmbiguous:
    case ErrorCode::OutOfDisc:
    case ErrorCode::InvalidTagMap:
    case ErrorCode::InvalidSchedule:
    case ErrorCode::MissingLocation:
    case ErrorCode::InvalidLocation:
    case ErrorCode::UndecodableImage:
    case ErrorCode::EmptyInput:
    case ErrorCode::InvalidCellSize:
      return 422;
    case ErrorCode::BadRequest:
      return 400;
    case ErrorCode::StorageFull:
      return 507;
    case ErrorCode::SerializationFailure:
    case ErrorCode::CorruptRecord:
    case ErrorCode::IoError:
      return 500;
  }
  return 500;
}

bool is_io_error(ErrorCode code) noexcept {
  return code == ErrorCode::StorageFull || code == ErrorCode::SerializationFailure ||
         code == ErrorCode::CorruptRecord || code == ErrorCode::IoError;
}

} // namespace emomap
