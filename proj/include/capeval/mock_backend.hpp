#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "capeval/gateway.hpp"

namespace capeval {

struct MockKey {
  std::string template_id;
  std::string image_id;
  // Digest of the candidate caption; empty for image-only prompts.
  std::string caption_digest;

  auto operator<=>(const MockKey&) const = default;
};

/// Deterministic offline endpoint. Replies in the OpenAI response format
/// with text looked up from a script.
class MockBackend final : public Backend {
 public:
  /// `default_text` unset means strict: unknown keys throw kScriptMiss.
  explicit MockBackend(std::map<MockKey, std::string> script = {},
                       std::optional<std::string> default_text = std::nullopt);

  void set(const MockKey& key, std::string text);
  /// Statuses returned (in order) by the next calls before normal replies.
  void push_status(int status);
  /// Next `n` calls fail at the transport level.
  void fail_transport(int n);
  /// Each call sleeps this long while counted as in flight.
  void set_delay(std::chrono::milliseconds delay);

  BackendReply send(const ChatCall& call, const EndpointConfig& config) override;

  int calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<std::string> payloads() const;
  void reset_counters();

 private:
  mutable std::mutex mu_;
  std::map<MockKey, std::string> script_;
  std::optional<std::string> default_text_;
  std::deque<int> statuses_;
  int transport_failures_ = 0;
  std::chrono::milliseconds delay_{0};
  std::vector<std::string> payloads_;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

/// Builds a mock from a script document:
///   {"default": "0" | null,
///    "entries": [{"template_id": "step2@v1", "image_id": "img1",
///                 "caption": "a dog runs" | "caption_digest": "<hex>",
///                 "text": "85"}, ...]}
/// Entries without caption/caption_digest match image-only prompts.
std::shared_ptr<MockBackend> mock_from_json(const json& script);
std::shared_ptr<MockBackend> mock_from_file(const std::string& path);

}  // namespace capeval
