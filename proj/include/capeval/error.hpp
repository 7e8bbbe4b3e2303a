#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capeval {

/// Failure categories shared across modules. Callers branch on kind(),
/// the message carries the details for humans.
enum class ErrorKind {
  kInvalidInput,
  kValidation,
  kLoad,
  kTransient,
  kPermanent,
  kMalformedResponse,
  kScriptMiss,
  kCorruptEntry,
  kIntegrity,
  kIo,
  kEmptyCaption,
  kConfig,
  kUndefinedCorrelation,
  kJoin,
  kParse,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace capeval
