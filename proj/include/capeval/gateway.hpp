#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>

#include "capeval/prompts.hpp"
#include "capeval/types.hpp"

namespace capeval {

struct EndpointConfig {
  std::string base_url = "http://localhost:8000/v1";
  // Name of the environment variable holding the bearer token. Empty or
  // unset means no Authorization header.
  std::string token_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{120000};
  int max_retries = 4;
  std::chrono::milliseconds backoff_initial{500};
  double backoff_multiplier = 2.0;
  int max_parallel = 4;
};

void validate(const EndpointConfig& config);
void to_json(json& j, const EndpointConfig& v);
void from_json(const json& j, EndpointConfig& v);

struct ExchangeRequest {
  std::string model_id;
  std::string template_id;
  std::string prompt_text;
  std::string image_digest;
  GenerationParams params;
  // Distinguishes otherwise identical requests that must not share a cache
  // entry (per-candidate visual context). Empty for ordinary requests.
  std::string variant_tag;

  bool operator==(const ExchangeRequest&) const = default;
};

struct ExchangeResponse {
  std::string raw_text;
  std::string finish_reason;
  std::int64_t latency_ms = 0;

  bool operator==(const ExchangeResponse&) const = default;
};

/// One model call. raw_text is stored exactly as the endpoint returned it.
struct VlmExchange {
  ExchangeRequest request;
  ExchangeResponse response;
  std::int64_t timestamp_ms = 0;
  int attempts = 1;

  bool operator==(const VlmExchange&) const = default;
};

void to_json(json& j, const ExchangeRequest& v);
void from_json(const json& j, ExchangeRequest& v);
void to_json(json& j, const ExchangeResponse& v);
void from_json(const json& j, ExchangeResponse& v);
void to_json(json& j, const VlmExchange& v);
void from_json(const json& j, VlmExchange& v);

/// What a backend receives: the wire payload plus the lookup metadata the
/// mock backend keys its script on.
struct ChatCall {
  std::string payload;
  std::string template_id;
  std::string image_id;
  std::string caption_digest;
};

struct BackendReply {
  int status = 200;
  std::string body;
};

/// Transport for chat-completion calls. Implementations throw
/// Error(kTransient) on connection-level failures and must be safe to call
/// from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply send(const ChatCall& call, const EndpointConfig& config) = 0;
};

/// OpenAI chat-completions over HTTP(S): POST {base_url}/chat/completions.
class HttpBackend final : public Backend {
 public:
  BackendReply send(const ChatCall& call, const EndpointConfig& config) override;
};

/// Serialized chat-completions request body: one user message whose first
/// content part is the image as a base64 data URL, followed by the prompt.
std::string build_chat_payload(const RenderedPrompt& prompt, const ResolvedImage& image,
                               const GenerationParams& params);

class VlmGateway {
 public:
  VlmGateway(std::shared_ptr<Backend> backend, EndpointConfig config);

  /// Sends one request, retrying 429/5xx/transport failures with
  /// exponential backoff. Other 4xx fail immediately with kPermanent.
  VlmExchange complete(const RenderedPrompt& prompt, const ResolvedImage& image, const GenerationParams& params,
                       const std::string& variant_tag = {});

  const EndpointConfig& config() const { return config_; }
  /// Number of complete() calls that reached the backend (retries excluded).
  long calls() const { return calls_.load(); }

 private:
  std::shared_ptr<Backend> backend_;
  EndpointConfig config_;
  std::counting_semaphore<> admission_;
  std::atomic<long> calls_{0};
};

}  // namespace capeval
