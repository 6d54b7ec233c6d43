#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dualloop {

// Machine-readable error codes. The names are part of the wire format
// (HTTP error bodies, CLI diagnostics) and must stay stable.
enum class ErrorCode {
  InvalidGraph,
  MissingInput,
  UnknownNode,
  EditRejected,
  InvalidSettings,
  RangeError,
  DegenerateRange,
  ZeroSum,
  InvalidScenario,
  MismatchedDomains,
  EmptyProfiles,
  EmptyCatalog,
  IllegalTransition,
  MissingItem,
  DuplicateItem,
  OutOfRange,
  DegenerateItem,
  ConsentMissing,
  IncompleteResponses,
  UnknownFeature,
  EncodingError,
  UndefinedMotion,
  UnknownMotion,
  UnsupportedSchema,
  ValidationFailure,
  MalformedPayload,
  Unauthorized,
  Forbidden,
  NotFound,
  Conflict,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  // Short machine-oriented qualifier, e.g. the offending dimension or the
  // reason an edit was rejected. May be empty.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace dualloop
