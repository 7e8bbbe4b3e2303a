#include "capeval/error.hpp"

namespace capeval {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kValidation: return "validation-error";
    case ErrorKind::kLoad: return "load-error";
    case ErrorKind::kTransient: return "transient-error";
    case ErrorKind::kPermanent: return "permanent-error";
    case ErrorKind::kMalformedResponse: return "malformed-response";
    case ErrorKind::kScriptMiss: return "script-miss";
    case ErrorKind::kCorruptEntry: return "corrupt-entry";
    case ErrorKind::kIntegrity: return "integrity-error";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kEmptyCaption: return "empty-caption";
    case ErrorKind::kConfig: return "config-error";
    case ErrorKind::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::kJoin: return "join-error";
    case ErrorKind::kParse: return "parse-error";
  }
  return "error";
}

}  // namespace capeval
