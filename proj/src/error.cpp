#include "dualloop/error.hpp"

namespace dualloop {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::EditRejected: return "EditRejected";
    case ErrorCode::InvalidSettings: return "InvalidSettings";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::ZeroSum: return "ZeroSum";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::MismatchedDomains: return "MismatchedDomains";
    case ErrorCode::EmptyProfiles: return "EmptyProfiles";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::MissingItem: return "MissingItem";
    case ErrorCode::DuplicateItem: return "DuplicateItem";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateItem: return "DegenerateItem";
    case ErrorCode::ConsentMissing: return "ConsentMissing";
    case ErrorCode::IncompleteResponses: return "IncompleteResponses";
    case ErrorCode::UnknownFeature: return "UnknownFeature";
    case ErrorCode::EncodingError: return "EncodingError";
    case ErrorCode::UndefinedMotion: return "UndefinedMotion";
    case ErrorCode::UnknownMotion: return "UnknownMotion";
    case ErrorCode::UnsupportedSchema: return "UnsupportedSchema";
    case ErrorCode::ValidationFailure: return "ValidationFailure";
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::Forbidden: return "Forbidden";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
  }
  return "Unknown";
}

}  // namespace dualloop
