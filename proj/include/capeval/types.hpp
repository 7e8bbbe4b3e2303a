#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace capeval {

using json = nlohmann::json;

enum class MediaType { kJpeg, kPng };

std::string to_string(MediaType t);
MediaType media_type_from_string(const std::string& s);
/// Infers the media type from a file extension (.jpg/.jpeg/.png, any case).
MediaType media_type_from_path(const std::string& path);

struct ImageRef {
  std::string id;
  std::string location;
  // Empty until the bytes have been read; see resolve_image().
  std::string content_digest;
  MediaType media_type = MediaType::kJpeg;

  bool operator==(const ImageRef&) const = default;
};

/// Image bytes read from disk together with the resolved reference.
struct ResolvedImage {
  ImageRef ref;
  std::string bytes;
};

/// Reads `ref.location` (relative to `root` unless absolute), fills in the
/// content digest. Throws kIo when the file is missing or empty.
ResolvedImage resolve_image(const ImageRef& ref, const std::string& root);

enum class Origin { kHuman, kMachine, kUnknown };

std::string to_string(Origin o);
Origin origin_from_string(const std::string& s);

struct CaptionCandidate {
  std::string id;
  std::string image_id;
  std::string text;
  Origin origin = Origin::kUnknown;
  std::optional<std::string> system;

  bool operator==(const CaptionCandidate&) const = default;
};

struct ReferenceSet {
  std::string image_id;
  std::vector<std::string> references;

  bool operator==(const ReferenceSet&) const = default;
};

struct GenerationParams {
  double temperature = 0.0;
  std::int64_t max_tokens = 512;
  std::optional<std::int64_t> seed;
  std::string model_id;

  bool operator==(const GenerationParams&) const = default;
};

/// Sorted keys, shortest round-trip float formatting. Equal params give
/// byte-identical strings regardless of how they were spelled on input.
std::string canonical_params_string(const GenerationParams& params);

enum class ParseStatus { kOk, kRecovered, kFailed };

std::string to_string(ParseStatus s);
ParseStatus parse_status_from_string(const std::string& s);

struct EvalScore {
  std::optional<int> value;
  std::string raw_response_digest;
  ParseStatus parse_status = ParseStatus::kFailed;
  // A '.' immediately followed the extracted digit run ("8.5" -> 8).
  bool decimal_truncated = false;

  bool operator==(const EvalScore&) const = default;
};

void validate(const CaptionCandidate& c);
void validate(const ReferenceSet& r);
void validate(const GenerationParams& p);
void validate(const EvalScore& s);

// Canonical JSON. nlohmann::json keeps object keys sorted, so dump() of
// these values is canonical.
void to_json(json& j, const ImageRef& v);
void from_json(const json& j, ImageRef& v);
void to_json(json& j, const CaptionCandidate& v);
void from_json(const json& j, CaptionCandidate& v);
void to_json(json& j, const ReferenceSet& v);
void from_json(const json& j, ReferenceSet& v);
void to_json(json& j, const GenerationParams& v);
void from_json(const json& j, GenerationParams& v);
void to_json(json& j, const EvalScore& v);
void from_json(const json& j, EvalScore& v);

/// Compact canonical dump used for every on-disk artifact.
std::string canonical_dump(const json& j);

std::string trim(std::string_view s);

}  // namespace capeval
