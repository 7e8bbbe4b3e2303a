#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "capeval/types.hpp"

namespace capeval {

enum class FailureReason { kNoIntegerFound, kEmptyResponse };

std::string to_string(FailureReason r);
FailureReason failure_reason_from_string(const std::string& s);

struct ParseFailure {
  FailureReason reason = FailureReason::kNoIntegerFound;
  std::string raw_response_digest;

  bool operator==(const ParseFailure&) const = default;
};

using ScoreParse = std::variant<EvalScore, ParseFailure>;

/// First maximal run of ASCII digits, clamped to [0,100]. Status is kOk when
/// the trimmed response is exactly that run, kRecovered otherwise.
ScoreParse parse_score(const std::string& raw);

/// How stage-2 scores are accepted by the pipeline.
struct ScorePolicy {
  // Treat "recovered" scores (integer embedded in prose) as failures.
  bool exact_only = false;
  // Abort the run on the first failure instead of excluding the item.
  bool abort_on_failure = false;
};

/// Applies `policy` to a parse outcome; a recovered score under exact_only
/// becomes a ParseFailure(kNoIntegerFound).
ScoreParse apply_policy(ScoreParse parsed, const ScorePolicy& policy);

struct ParsedContext {
  std::vector<std::string> objects;
  // Object label (e.g. "Object 1") -> feature descriptions.
  std::map<std::string, std::vector<std::string>> features;
  std::vector<std::string> relationships;

  bool operator==(const ParsedContext&) const = default;
};

struct VisualContext {
  std::string raw_text;
  std::optional<ParsedContext> parsed;

  bool operator==(const VisualContext&) const = default;
};

/// Keeps raw_text verbatim; `parsed` is filled only when at least one of the
/// section headers is found and no more than five objects are listed.
/// Throws kInvalidInput on empty input.
VisualContext parse_visual_context(const std::string& raw);

void to_json(json& j, const ParseFailure& v);
void from_json(const json& j, ParseFailure& v);
void to_json(json& j, const ParsedContext& v);
void from_json(const json& j, ParsedContext& v);
void to_json(json& j, const VisualContext& v);
void from_json(const json& j, VisualContext& v);

}  // namespace capeval
