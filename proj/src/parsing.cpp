#include "capeval/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"

namespace capeval {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

enum class Section { kNone, kObjects, kFeatures, kRelationships };

// Strips markdown decoration models like to add around headers
// ("**Features**:", "### Relationships").
std::string strip_decoration(const std::string& line) {
  std::string s = trim(line);
  std::size_t b = 0;
  while (b < s.size() && (s[b] == '*' || s[b] == '#' || s[b] == '_')) ++b;
  return trim(s.substr(b));
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::optional<Section> header_of(const std::string& line) {
  const auto s = strip_decoration(line);
  if (starts_with_ci(s, "List of Important Objects")) return Section::kObjects;
  if (starts_with_ci(s, "Features")) {
    // "Features of Object 1: ..." is a bullet body, not a header.
    if (starts_with_ci(s, "Features of")) return std::nullopt;
    return Section::kFeatures;
  }
  if (starts_with_ci(s, "Relationships")) return Section::kRelationships;
  return std::nullopt;
}

std::optional<std::string> bullet_body(const std::string& line) {
  const auto s = trim(line);
  if (s.empty()) return std::nullopt;
  if (s[0] == '-' || (s[0] == '*' && s.size() > 1 && s[1] == ' ')) return trim(s.substr(1));
  return std::nullopt;
}

std::pair<std::string, std::string> split_feature(const std::string& body) {
  const auto colon = body.find(':');
  if (colon == std::string::npos) return {"", body};
  std::string label = trim(body.substr(0, colon));
  std::string value = trim(body.substr(colon + 1));
  if (starts_with_ci(label, "Features of ")) label = trim(label.substr(12));
  return {label, value};
}

}  // namespace

std::string to_string(FailureReason r) {
  return r == FailureReason::kEmptyResponse ? "empty_response" : "no_integer_found";
}

FailureReason failure_reason_from_string(const std::string& s) {
  if (s == "empty_response") return FailureReason::kEmptyResponse;
  if (s == "no_integer_found") return FailureReason::kNoIntegerFound;
  throw Error(ErrorKind::kValidation, "unknown failure reason '" + s + "'");
}

ScoreParse parse_score(const std::string& raw) {
  const auto digest = digest_any(raw);
  const auto trimmed = trim(raw);
  if (trimmed.empty()) return ParseFailure{FailureReason::kEmptyResponse, digest};

  const auto begin = std::find_if(raw.begin(), raw.end(), is_digit);
  if (begin == raw.end()) return ParseFailure{FailureReason::kNoIntegerFound, digest};
  const auto end = std::find_if_not(begin, raw.end(), is_digit);

  // Leading zeros are skipped so arbitrarily long runs cannot overflow;
  // anything with more than three significant digits clamps to 100.
  const auto first_sig = std::find_if(begin, end, [](char c) { return c != '0'; });
  int value = 0;
  bool clamped = end - first_sig > 3;
  if (!clamped) {
    for (auto it = first_sig; it != end; ++it) value = value * 10 + (*it - '0');
    clamped = value > 100;
  }
  if (clamped) value = 100;

  EvalScore score;
  score.value = value;
  score.raw_response_digest = digest;
  const bool exact = !clamped && trimmed == std::string(begin, end);
  score.parse_status = exact ? ParseStatus::kOk : ParseStatus::kRecovered;
  score.decimal_truncated = end != raw.end() && *end == '.' && (end + 1) != raw.end() && is_digit(*(end + 1));
  return score;
}

ScoreParse apply_policy(ScoreParse parsed, const ScorePolicy& policy) {
  if (auto* s = std::get_if<EvalScore>(&parsed); s && policy.exact_only && s->parse_status != ParseStatus::kOk) {
    return ParseFailure{FailureReason::kNoIntegerFound, s->raw_response_digest};
  }
  return parsed;
}

VisualContext parse_visual_context(const std::string& raw) {
  if (trim(raw).empty()) throw Error(ErrorKind::kInvalidInput, "visual context response is empty");
  VisualContext out{raw, std::nullopt};

  ParsedContext parsed;
  Section section = Section::kNone;
  bool saw_header = false;
  std::istringstream in(raw);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = header_of(line)) {
      section = *h;
      saw_header = true;
      continue;
    }
    auto body = bullet_body(line);
    if (!body || body->empty()) continue;
    switch (section) {
      case Section::kObjects: parsed.objects.push_back(*body); break;
      case Section::kFeatures: {
        auto [label, value] = split_feature(*body);
        parsed.features[label].push_back(value);
        break;
      }
      case Section::kRelationships: parsed.relationships.push_back(*body); break;
      case Section::kNone: break;
    }
  }
  if (saw_header && parsed.objects.size() <= 5) out.parsed = std::move(parsed);
  return out;
}

void to_json(json& j, const ParseFailure& v) {
  j = json{{"reason", to_string(v.reason)}, {"raw_response_digest", v.raw_response_digest}};
}

void from_json(const json& j, ParseFailure& v) {
  v.reason = failure_reason_from_string(j.at("reason").get<std::string>());
  v.raw_response_digest = j.at("raw_response_digest").get<std::string>();
}

void to_json(json& j, const ParsedContext& v) {
  j = json{{"objects", v.objects}, {"features", v.features}, {"relationships", v.relationships}};
}

void from_json(const json& j, ParsedContext& v) {
  v.objects = j.at("objects").get<std::vector<std::string>>();
  v.features = j.at("features").get<std::map<std::string, std::vector<std::string>>>();
  v.relationships = j.at("relationships").get<std::vector<std::string>>();
}

void to_json(json& j, const VisualContext& v) {
  j = json{{"raw_text", v.raw_text}};
  j["parsed"] = v.parsed ? json(*v.parsed) : json(nullptr);
}

void from_json(const json& j, VisualContext& v) {
  v.raw_text = j.at("raw_text").get<std::string>();
  v.parsed = j.contains("parsed") && !j.at("parsed").is_null() ? std::optional(j.at("parsed").get<ParsedContext>())
                                                               : std::nullopt;
}

}  // namespace capeval
