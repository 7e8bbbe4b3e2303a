#include <gtest/gtest.h>

#include <cstdlib>
#include <functional>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "capeval/digest.hpp"
#include "capeval/gateway.hpp"
#include "capeval/mock_backend.hpp"
#include "test_util.hpp"

using namespace capeval;
using namespace std::chrono_literals;

namespace {

ResolvedImage image() {
  return resolve_image(ImageRef{"img01", "images/img01.png", "", MediaType::kPng}, CAPEVAL_FIXTURES);
}

EndpointConfig fast_config(int max_parallel = 4) {
  EndpointConfig c;
  c.backoff_initial = 1ms;
  c.max_retries = 3;
  c.max_parallel = max_parallel;
  c.token_env = "";
  return c;
}

const GenerationParams kParams{0.0, 16, std::nullopt, "toy-vlm"};

class FnBackend final : public Backend {
 public:
  explicit FnBackend(std::function<BackendReply(const ChatCall&)> fn) : fn_(std::move(fn)) {}
  BackendReply send(const ChatCall& call, const EndpointConfig&) override { return fn_(call); }

 private:
  std::function<BackendReply(const ChatCall&)> fn_;
};

}  // namespace

TEST(Gateway, MockPassthrough) {
  const auto prompt = render_vanilla("a red circle");
  auto mock = std::make_shared<MockBackend>();
  mock->set({prompt.template_id, "img01", prompt.caption_digest}, "85");
  VlmGateway gw(mock, fast_config());
  const auto ex = gw.complete(prompt, image(), kParams);
  EXPECT_EQ(ex.response.raw_text, "85");
  EXPECT_EQ(ex.response.finish_reason, "stop");
  EXPECT_EQ(ex.attempts, 1);
  EXPECT_EQ(ex.request.template_id, "vanilla@v1");
  EXPECT_EQ(ex.request.prompt_text, prompt.text);
  EXPECT_EQ(ex.request.image_digest, image().ref.content_digest);
  EXPECT_EQ(gw.calls(), 1);
}

TEST(Gateway, RawTextKeptVerbatim) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "  85 \n");
  VlmGateway gw(mock, fast_config());
  EXPECT_EQ(gw.complete(render_visce_step1(), image(), kParams).response.raw_text, "  85 \n");
}

TEST(Gateway, RetriesOn429ThenSucceeds) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "70");
  mock->push_status(429);
  VlmGateway gw(mock, fast_config());
  const auto ex = gw.complete(render_visce_step1(), image(), kParams);
  EXPECT_EQ(ex.attempts, 2);
  EXPECT_EQ(ex.response.raw_text, "70");
  EXPECT_EQ(mock->calls(), 2);
  // Every retry resends the identical payload.
  const auto payloads = mock->payloads();
  ASSERT_EQ(payloads.size(), 2u);
  EXPECT_EQ(payloads[0], payloads[1]);
}

TEST(Gateway, RetriesServerErrorsAndTransportFailures) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "1");
  mock->push_status(500);
  mock->push_status(503);
  mock->fail_transport(1);
  VlmGateway gw(mock, fast_config());
  EXPECT_EQ(gw.complete(render_visce_step1(), image(), kParams).attempts, 4);
}

TEST(Gateway, Permanent401AfterOneAttempt) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "1");
  mock->push_status(401);
  VlmGateway gw(mock, fast_config());
  EXPECT_ERROR_KIND(gw.complete(render_visce_step1(), image(), kParams), ErrorKind::kPermanent);
  EXPECT_EQ(mock->calls(), 1);
}

TEST(Gateway, GivesUpAfterRetriesAsTransient) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "1");
  for (int i = 0; i < 10; ++i) mock->push_status(502);
  auto cfg = fast_config();
  cfg.max_retries = 2;
  VlmGateway gw(mock, cfg);
  EXPECT_ERROR_KIND(gw.complete(render_visce_step1(), image(), kParams), ErrorKind::kTransient);
  EXPECT_EQ(mock->calls(), 3);
}

TEST(Gateway, BackoffGrowsExponentially) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "1");
  mock->fail_transport(3);
  auto cfg = fast_config();
  cfg.backoff_initial = 20ms;
  cfg.backoff_multiplier = 2.0;
  VlmGateway gw(mock, cfg);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(gw.complete(render_visce_step1(), image(), kParams).attempts, 4);
  // 20 + 40 + 80 ms of sleeping.
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 140ms);
}

TEST(Gateway, MalformedResponses) {
  for (const std::string body : {"", "not json", "{}", R"({"choices":[]})", R"({"choices":[{"index":0}]})",
                                 R"({"choices":[{"message":{"content":42}}]})"}) {
    VlmGateway gw(std::make_shared<FnBackend>([&](const ChatCall&) { return BackendReply{200, body}; }),
                  fast_config());
    EXPECT_ERROR_KIND(gw.complete(render_visce_step1(), image(), kParams), ErrorKind::kMalformedResponse);
  }
}

TEST(Gateway, ContentPartsAreConcatenated) {
  const std::string body =
      R"({"choices":[{"message":{"content":[{"type":"text","text":"8"},{"type":"text","text":"5"}]},"finish_reason":"length"}]})";
  VlmGateway gw(std::make_shared<FnBackend>([&](const ChatCall&) { return BackendReply{200, body}; }), fast_config());
  const auto ex = gw.complete(render_visce_step1(), image(), kParams);
  EXPECT_EQ(ex.response.raw_text, "85");
  EXPECT_EQ(ex.response.finish_reason, "length");
}

TEST(Gateway, PayloadShape) {
  const auto img = resolve_image(ImageRef{"img02", "images/img02.jpg", "", MediaType::kJpeg}, CAPEVAL_FIXTURES);
  const auto payload = json::parse(build_chat_payload(render_vanilla("x"), img, GenerationParams{0.5, 32, 7, "m"}));
  EXPECT_EQ(payload.at("model"), "m");
  EXPECT_EQ(payload.at("temperature"), 0.5);
  EXPECT_EQ(payload.at("max_tokens"), 32);
  EXPECT_EQ(payload.at("seed"), 7);
  const auto& content = payload.at("messages").at(0).at("content");
  ASSERT_EQ(content.size(), 2u);
  EXPECT_EQ(content[0].at("type"), "image_url");
  EXPECT_EQ(content[0].at("image_url").at("url"), "data:image/jpeg;base64," + base64_encode(img.bytes));
  EXPECT_EQ(content[1].at("type"), "text");
  EXPECT_EQ(content[1].at("text"), render_vanilla("x").text);
}

TEST(Gateway, AdmissionBoundedByMaxParallel) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "5");
  mock->set_delay(20ms);
  VlmGateway gw(mock, fast_config(2));
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { gw.complete(render_visce_step1(), image(), kParams); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(mock->calls(), 8);
  EXPECT_LE(mock->max_in_flight(), 2);
  EXPECT_GE(mock->max_in_flight(), 1);
}

TEST(Gateway, InvalidConfig) {
  auto mock = std::make_shared<MockBackend>();
  auto cfg = fast_config();
  cfg.max_parallel = 0;
  EXPECT_ERROR_KIND(VlmGateway(mock, cfg), ErrorKind::kConfig);
  cfg = fast_config();
  cfg.timeout = 0ms;
  EXPECT_ERROR_KIND(VlmGateway(mock, cfg), ErrorKind::kConfig);
}

TEST(Gateway, ExchangeRoundTrip) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "55");
  VlmGateway gw(mock, fast_config());
  const auto ex = gw.complete(render_step2("c", "ctx"), image(), kParams, "candidate:c1");
  EXPECT_EQ(json::parse(canonical_dump(json(ex))).get<VlmExchange>(), ex);
  const auto cfg = fast_config();
  const auto back = json(cfg).get<EndpointConfig>();
  EXPECT_EQ(json(back), json(cfg));
}

TEST(MockBackend, StrictMissThrows) {
  auto mock = std::make_shared<MockBackend>();
  VlmGateway gw(mock, fast_config());
  EXPECT_ERROR_KIND(gw.complete(render_vanilla("unscripted"), image(), kParams), ErrorKind::kScriptMiss);
}

TEST(MockBackend, LenientDefault) {
  auto mock = std::make_shared<MockBackend>(std::map<MockKey, std::string>{}, "0");
  VlmGateway gw(mock, fast_config());
  EXPECT_EQ(gw.complete(render_vanilla("unscripted"), image(), kParams).response.raw_text, "0");
}

TEST(MockBackend, FromScriptDocument) {
  const auto mock = mock_from_json(json::parse(R"({
    "default": null,
    "entries": [
      {"template_id": "visce_step1@v1", "image_id": "img01", "text": "ctx"},
      {"template_id": "vanilla@v1", "image_id": "img01", "caption": "a red circle", "text": "91"}
    ]})"));
  VlmGateway gw(mock, fast_config());
  EXPECT_EQ(gw.complete(render_visce_step1(), image(), kParams).response.raw_text, "ctx");
  EXPECT_EQ(gw.complete(render_vanilla("a red circle"), image(), kParams).response.raw_text, "91");
  EXPECT_ERROR_KIND(gw.complete(render_vanilla("a blue circle"), image(), kParams), ErrorKind::kScriptMiss);
  EXPECT_ERROR_KIND(mock_from_json(json::parse(R"({"entries":[{"image_id":"x"}]})")), ErrorKind::kConfig);
}

// The real HTTP transport against a local OpenAI-style server.
TEST(HttpBackend, TalksToLocalServer) {
  httplib::Server server;
  std::string seen_path, seen_auth, seen_body;
  int failures_left = 1;
  server.Post(R"(/v1/chat/completions)", [&](const httplib::Request& req, httplib::Response& res) {
    seen_path = req.path;
    seen_auth = req.get_header_value("Authorization");
    seen_body = req.body;
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"index":0,"message":{"role":"assistant","content":"77"},"finish_reason":"stop"}]})",
                    "application/json");
  });
  server.Post(R"(/v1/deny/chat/completions)",
              [](const httplib::Request&, httplib::Response& res) { res.status = 403; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("CAPEVAL_TEST_TOKEN", "sekret", 1);
  auto cfg = fast_config();
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
  cfg.token_env = "CAPEVAL_TEST_TOKEN";
  VlmGateway gw(std::make_shared<HttpBackend>(), cfg);
  const auto prompt = render_vanilla("a red circle");
  const auto ex = gw.complete(prompt, image(), kParams);
  EXPECT_EQ(ex.response.raw_text, "77");
  EXPECT_EQ(ex.attempts, 2);
  EXPECT_EQ(seen_path, "/v1/chat/completions");
  EXPECT_EQ(seen_auth, "Bearer sekret");
  EXPECT_EQ(seen_body, build_chat_payload(prompt, image(), kParams));

  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/deny";
  VlmGateway deny(std::make_shared<HttpBackend>(), cfg);
  EXPECT_ERROR_KIND(deny.complete(prompt, image(), kParams), ErrorKind::kPermanent);

  server.stop();
  th.join();

  // Nothing listens any more: transport failure after the retries.
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.max_retries = 1;
  cfg.timeout = 500ms;
  VlmGateway gone(std::make_shared<HttpBackend>(), cfg);
  EXPECT_ERROR_KIND(gone.complete(prompt, image(), kParams), ErrorKind::kTransient);
}
