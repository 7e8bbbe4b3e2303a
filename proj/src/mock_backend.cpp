#include "capeval/mock_backend.hpp"

#include <fstream>
#include <thread>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"

namespace capeval {

MockBackend::MockBackend(std::map<MockKey, std::string> script, std::optional<std::string> default_text)
    : script_(std::move(script)), default_text_(std::move(default_text)) {}

void MockBackend::set(const MockKey& key, std::string text) {
  std::lock_guard lock(mu_);
  script_[key] = std::move(text);
}

void MockBackend::push_status(int status) {
  std::lock_guard lock(mu_);
  statuses_.push_back(status);
}

void MockBackend::fail_transport(int n) {
  std::lock_guard lock(mu_);
  transport_failures_ += n;
}

void MockBackend::set_delay(std::chrono::milliseconds delay) {
  std::lock_guard lock(mu_);
  delay_ = delay;
}

std::vector<std::string> MockBackend::payloads() const {
  std::lock_guard lock(mu_);
  return payloads_;
}

void MockBackend::reset_counters() {
  std::lock_guard lock(mu_);
  payloads_.clear();
  calls_ = 0;
  max_in_flight_ = 0;
}

BackendReply MockBackend::send(const ChatCall& call, const EndpointConfig&) {
  const int now = ++in_flight_;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  struct Leave {
    std::atomic<int>& n;
    ~Leave() { --n; }
  } leave{in_flight_};
  ++calls_;

  std::optional<int> status;
  bool transport_failure = false;
  std::optional<std::string> text;
  std::chrono::milliseconds delay;
  {
    std::lock_guard lock(mu_);
    payloads_.push_back(call.payload);
    delay = delay_;
    if (transport_failures_ > 0) {
      --transport_failures_;
      transport_failure = true;
    } else if (!statuses_.empty()) {
      status = statuses_.front();
      statuses_.pop_front();
    }
    if (auto it = script_.find(MockKey{call.template_id, call.image_id, call.caption_digest}); it != script_.end()) {
      text = it->second;
    } else {
      text = default_text_;
    }
  }
  if (delay.count() > 0) std::this_thread::sleep_for(delay);
  if (transport_failure) throw Error(ErrorKind::kTransient, "mock transport failure");
  if (status && (*status < 200 || *status >= 300)) {
    return BackendReply{*status, R"({"error":{"message":"scripted failure"}})"};
  }
  if (!text) {
    throw Error(ErrorKind::kScriptMiss, "no scripted reply for (" + call.template_id + ", " + call.image_id + ", " +
                                            call.caption_digest + ")");
  }

  const json request = json::parse(call.payload);
  const json reply{{"id", "mock-completion"},
                   {"object", "chat.completion"},
                   {"model", request.value("model", "")},
                   {"choices", json::array({json{{"index", 0},
                                                 {"message", {{"role", "assistant"}, {"content", *text}}},
                                                 {"finish_reason", "stop"}}})}};
  return BackendReply{200, reply.dump()};
}

std::shared_ptr<MockBackend> mock_from_json(const json& script) {
  std::map<MockKey, std::string> entries;
  try {
    for (const auto& e : script.value("entries", json::array())) {
      MockKey key{e.at("template_id").get<std::string>(), e.at("image_id").get<std::string>(), ""};
      if (e.contains("caption")) {
        key.caption_digest = digest_any(e.at("caption").get<std::string>());
      } else if (e.contains("caption_digest")) {
        key.caption_digest = e.at("caption_digest").get<std::string>();
      }
      if (!entries.emplace(key, e.at("text").get<std::string>()).second) {
        throw Error(ErrorKind::kConfig, "duplicate mock script key (" + key.template_id + ", " + key.image_id + ")");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("malformed mock script: ") + e.what());
  }
  std::optional<std::string> fallback;
  if (script.contains("default") && !script.at("default").is_null()) fallback = script.at("default").get<std::string>();
  return std::make_shared<MockBackend>(std::move(entries), std::move(fallback));
}

std::shared_ptr<MockBackend> mock_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot open mock script '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::kConfig, "mock script '" + path + "' is not valid JSON");
  return mock_from_json(doc);
}

}  // namespace capeval
