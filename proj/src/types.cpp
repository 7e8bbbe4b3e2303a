#include "capeval/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"

namespace capeval {
namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto b = std::find_if_not(s.begin(), s.end(), is_space);
  auto e = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return b < e ? std::string(b, e) : std::string();
}

std::string to_string(MediaType t) { return t == MediaType::kPng ? "png" : "jpeg"; }

MediaType media_type_from_string(const std::string& s) {
  if (s == "jpeg") return MediaType::kJpeg;
  if (s == "png") return MediaType::kPng;
  throw Error(ErrorKind::kValidation, "unknown media type '" + s + "'");
}

MediaType media_type_from_path(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jpg" || ext == ".jpeg") return MediaType::kJpeg;
  if (ext == ".png") return MediaType::kPng;
  throw Error(ErrorKind::kValidation, "unsupported image extension in '" + path + "'");
}

ResolvedImage resolve_image(const ImageRef& ref, const std::string& root) {
  fs::path p(ref.location);
  if (p.is_relative() && !root.empty()) p = fs::path(root) / p;
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read image '" + p.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) throw Error(ErrorKind::kIo, "image '" + p.string() + "' is empty");
  ResolvedImage out{ref, std::move(bytes)};
  out.ref.content_digest = digest_bytes(out.bytes);
  return out;
}

std::string to_string(Origin o) {
  switch (o) {
    case Origin::kHuman: return "human";
    case Origin::kMachine: return "machine";
    case Origin::kUnknown: return "unknown";
  }
  return "unknown";
}

Origin origin_from_string(const std::string& s) {
  if (s == "human") return Origin::kHuman;
  if (s == "machine") return Origin::kMachine;
  if (s == "unknown") return Origin::kUnknown;
  throw Error(ErrorKind::kValidation, "unknown caption origin '" + s + "'");
}

std::string to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kRecovered: return "recovered";
    case ParseStatus::kFailed: return "failed";
  }
  return "failed";
}

ParseStatus parse_status_from_string(const std::string& s) {
  if (s == "ok") return ParseStatus::kOk;
  if (s == "recovered") return ParseStatus::kRecovered;
  if (s == "failed") return ParseStatus::kFailed;
  throw Error(ErrorKind::kValidation, "unknown parse status '" + s + "'");
}

void validate(const CaptionCandidate& c) {
  if (trim(c.text).empty()) throw Error(ErrorKind::kValidation, "caption '" + c.id + "' is empty");
}

void validate(const ReferenceSet& r) {
  if (r.references.empty()) {
    throw Error(ErrorKind::kValidation, "reference set for '" + r.image_id + "' is empty");
  }
  for (const auto& ref : r.references) {
    if (trim(ref).empty()) throw Error(ErrorKind::kValidation, "empty reference for '" + r.image_id + "'");
  }
}

void validate(const GenerationParams& p) {
  if (!(p.temperature >= 0.0) || !std::isfinite(p.temperature)) {
    throw Error(ErrorKind::kValidation, "temperature must be a finite non-negative number");
  }
  if (p.max_tokens <= 0) throw Error(ErrorKind::kValidation, "max_tokens must be positive");
}

void validate(const EvalScore& s) {
  if (s.value.has_value() == (s.parse_status == ParseStatus::kFailed)) {
    throw Error(ErrorKind::kValidation, "score value must be present iff parse succeeded");
  }
  if (s.value && (*s.value < 0 || *s.value > 100)) {
    throw Error(ErrorKind::kValidation, "score outside [0,100]");
  }
}

std::string canonical_params_string(const GenerationParams& params) {
  // Shortest round-trip representation; -0.0 and 0.0 collapse to "0".
  const double t = params.temperature == 0.0 ? 0.0 : params.temperature;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), t);
  std::string temp(buf, res.ptr);

  std::string out = "{\"max_tokens\":" + std::to_string(params.max_tokens);
  out += ",\"model_id\":" + json(params.model_id).dump();
  if (params.seed) out += ",\"seed\":" + std::to_string(*params.seed);
  out += ",\"temperature\":" + temp + "}";
  return out;
}

std::string canonical_dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

void to_json(json& j, const ImageRef& v) {
  j = json{{"id", v.id}, {"location", v.location}, {"media_type", to_string(v.media_type)}};
  if (!v.content_digest.empty()) j["content_digest"] = v.content_digest;
}

void from_json(const json& j, ImageRef& v) {
  v.id = j.at("id").get<std::string>();
  v.location = j.at("location").get<std::string>();
  v.media_type = j.contains("media_type") ? media_type_from_string(j.at("media_type").get<std::string>())
                                          : media_type_from_path(v.location);
  v.content_digest = j.value("content_digest", std::string());
}

void to_json(json& j, const CaptionCandidate& v) {
  j = json{{"id", v.id}, {"image_id", v.image_id}, {"text", v.text}, {"origin", to_string(v.origin)}};
  if (v.system) j["system"] = *v.system;
}

void from_json(const json& j, CaptionCandidate& v) {
  v.id = j.at("id").get<std::string>();
  v.image_id = j.value("image_id", std::string());
  v.text = j.at("text").get<std::string>();
  v.origin = origin_from_string(j.value("origin", std::string("unknown")));
  v.system = j.contains("system") ? std::optional(j.at("system").get<std::string>()) : std::nullopt;
}

void to_json(json& j, const ReferenceSet& v) {
  j = json{{"image_id", v.image_id}, {"references", v.references}};
}

void from_json(const json& j, ReferenceSet& v) {
  v.image_id = j.at("image_id").get<std::string>();
  v.references = j.at("references").get<std::vector<std::string>>();
}

void to_json(json& j, const GenerationParams& v) {
  j = json{{"temperature", v.temperature}, {"max_tokens", v.max_tokens}, {"model_id", v.model_id}};
  if (v.seed) j["seed"] = *v.seed;
}

void from_json(const json& j, GenerationParams& v) {
  v.temperature = j.at("temperature").get<double>();
  v.max_tokens = j.at("max_tokens").get<std::int64_t>();
  v.model_id = j.value("model_id", std::string());
  v.seed = j.contains("seed") && !j.at("seed").is_null() ? std::optional(j.at("seed").get<std::int64_t>())
                                                           : std::nullopt;
}

void to_json(json& j, const EvalScore& v) {
  j = json{{"raw_response_digest", v.raw_response_digest},
           {"parse_status", to_string(v.parse_status)},
           {"decimal_truncated", v.decimal_truncated}};
  j["value"] = v.value ? json(*v.value) : json(nullptr);
}

void from_json(const json& j, EvalScore& v) {
  v.raw_response_digest = j.at("raw_response_digest").get<std::string>();
  v.parse_status = parse_status_from_string(j.at("parse_status").get<std::string>());
  v.decimal_truncated = j.value("decimal_truncated", false);
  v.value = j.at("value").is_null() ? std::nullopt : std::optional(j.at("value").get<int>());
}

}  // namespace capeval
