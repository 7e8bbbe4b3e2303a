#include "capeval/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"

namespace capeval {
namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

bool retryable(int status) { return status == 429 || status >= 500; }

ExchangeResponse decode_reply(const std::string& body) {
  if (body.empty()) throw Error(ErrorKind::kMalformedResponse, "empty response body");
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorKind::kMalformedResponse, "response is not a JSON object");
  const auto& choices = doc.value("choices", json::array());
  if (!choices.is_array() || choices.empty()) throw Error(ErrorKind::kMalformedResponse, "response has no choices");
  const auto& first = choices.front();
  if (!first.contains("message")) throw Error(ErrorKind::kMalformedResponse, "first choice has no message");
  const auto& content = first.at("message").value("content", json());

  ExchangeResponse out;
  if (content.is_string()) {
    out.raw_text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out.raw_text += part.value("text", "");
    }
  } else if (!content.is_null()) {
    throw Error(ErrorKind::kMalformedResponse, "unsupported message content type");
  }
  const auto& reason = first.value("finish_reason", json());
  out.finish_reason = reason.is_string() ? reason.get<std::string>() : std::string();
  return out;
}

}  // namespace

void validate(const EndpointConfig& config) {
  if (config.max_parallel < 1) throw Error(ErrorKind::kConfig, "max_parallel must be >= 1");
  if (config.timeout.count() <= 0) throw Error(ErrorKind::kConfig, "timeout must be positive");
  if (config.max_retries < 0) throw Error(ErrorKind::kConfig, "max_retries must be >= 0");
  if (config.backoff_multiplier < 1.0) throw Error(ErrorKind::kConfig, "backoff multiplier must be >= 1");
}

void to_json(json& j, const EndpointConfig& v) {
  j = json{{"base_url", v.base_url},
           {"token_env", v.token_env},
           {"timeout_ms", v.timeout.count()},
           {"max_retries", v.max_retries},
           {"backoff_initial_ms", v.backoff_initial.count()},
           {"backoff_multiplier", v.backoff_multiplier},
           {"max_parallel", v.max_parallel}};
}

void from_json(const json& j, EndpointConfig& v) {
  EndpointConfig d;
  v.base_url = j.value("base_url", d.base_url);
  v.token_env = j.value("token_env", d.token_env);
  v.timeout = std::chrono::milliseconds(j.value("timeout_ms", d.timeout.count()));
  v.max_retries = j.value("max_retries", d.max_retries);
  v.backoff_initial = std::chrono::milliseconds(j.value("backoff_initial_ms", d.backoff_initial.count()));
  v.backoff_multiplier = j.value("backoff_multiplier", d.backoff_multiplier);
  v.max_parallel = j.value("max_parallel", d.max_parallel);
}

void to_json(json& j, const ExchangeRequest& v) {
  j = json{{"model_id", v.model_id},
           {"template_id", v.template_id},
           {"prompt_text", v.prompt_text},
           {"image_digest", v.image_digest},
           {"params", v.params}};
  if (!v.variant_tag.empty()) j["variant_tag"] = v.variant_tag;
}

void from_json(const json& j, ExchangeRequest& v) {
  v.model_id = j.at("model_id").get<std::string>();
  v.template_id = j.at("template_id").get<std::string>();
  v.prompt_text = j.at("prompt_text").get<std::string>();
  v.image_digest = j.at("image_digest").get<std::string>();
  v.params = j.at("params").get<GenerationParams>();
  v.variant_tag = j.value("variant_tag", std::string());
}

void to_json(json& j, const ExchangeResponse& v) {
  j = json{{"raw_text", v.raw_text}, {"finish_reason", v.finish_reason}, {"latency_ms", v.latency_ms}};
}

void from_json(const json& j, ExchangeResponse& v) {
  v.raw_text = j.at("raw_text").get<std::string>();
  v.finish_reason = j.at("finish_reason").get<std::string>();
  v.latency_ms = j.at("latency_ms").get<std::int64_t>();
}

void to_json(json& j, const VlmExchange& v) {
  j = json{{"request", v.request}, {"response", v.response}, {"timestamp_ms", v.timestamp_ms}, {"attempts", v.attempts}};
}

void from_json(const json& j, VlmExchange& v) {
  v.request = j.at("request").get<ExchangeRequest>();
  v.response = j.at("response").get<ExchangeResponse>();
  v.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  v.attempts = j.at("attempts").get<int>();
}

std::string build_chat_payload(const RenderedPrompt& prompt, const ResolvedImage& image,
                               const GenerationParams& params) {
  const std::string url = "data:image/" + to_string(image.ref.media_type) + ";base64," + base64_encode(image.bytes);
  json content = json::array();
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
  content.push_back({{"type", "text"}, {"text", prompt.text}});
  json body{{"model", params.model_id},
            {"messages", json::array({json{{"role", "user"}, {"content", std::move(content)}}})},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens}};
  if (params.seed) body["seed"] = *params.seed;
  return canonical_dump(body);
}

VlmGateway::VlmGateway(std::shared_ptr<Backend> backend, EndpointConfig config)
    : backend_(std::move(backend)), config_(std::move(config)), admission_(std::max(config_.max_parallel, 1)) {
  validate(config_);
  if (!backend_) throw Error(ErrorKind::kConfig, "gateway requires a backend");
}

VlmExchange VlmGateway::complete(const RenderedPrompt& prompt, const ResolvedImage& image,
                                 const GenerationParams& params, const std::string& variant_tag) {
  if (image.bytes.empty()) throw Error(ErrorKind::kInvalidInput, "image bytes are empty");
  validate(params);

  VlmExchange ex;
  ex.request = ExchangeRequest{params.model_id, prompt.template_id, prompt.text,
                               image.ref.content_digest.empty() ? digest_bytes(image.bytes) : image.ref.content_digest,
                               params, variant_tag};
  const ChatCall call{build_chat_payload(prompt, image, params), prompt.template_id, image.ref.id,
                      prompt.caption_digest};

  admission_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{admission_};
  ++calls_;

  const auto started = std::chrono::steady_clock::now();
  auto backoff = std::chrono::duration<double, std::milli>(config_.backoff_initial);
  std::string last_error;
  for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
    ex.attempts = attempt;
    BackendReply reply;
    try {
      reply = backend_->send(call, config_);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kTransient) throw;
      last_error = e.what();
      reply.status = -1;
    }
    if (reply.status >= 200 && reply.status < 300) {
      ex.response = decode_reply(reply.body);
      ex.response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::steady_clock::now() - started)
                                   .count();
      ex.timestamp_ms = now_ms();
      return ex;
    }
    if (reply.status >= 0) {
      last_error = "HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200);
      if (!retryable(reply.status)) throw Error(ErrorKind::kPermanent, last_error);
    }
    if (attempt <= config_.max_retries) {
      std::this_thread::sleep_for(backoff);
      backoff *= config_.backoff_multiplier;
    }
  }
  throw Error(ErrorKind::kTransient,
              "giving up after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

}  // namespace capeval
