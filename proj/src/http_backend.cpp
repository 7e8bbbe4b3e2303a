#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "capeval/error.hpp"
#include "capeval/gateway.hpp"

namespace capeval {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::kConfig, "base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace

BackendReply HttpBackend::send(const ChatCall& call, const EndpointConfig& config) {
  const auto url = split_url(config.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);

  httplib::Headers headers;
  if (!config.token_env.empty()) {
    if (const char* token = std::getenv(config.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  auto res = client.Post(url.path + "/chat/completions", headers, call.payload, "application/json");
  if (!res) throw Error(ErrorKind::kTransient, "transport failure: " + httplib::to_string(res.error()));
  return BackendReply{res->status, res->body};
}

}  // namespace capeval
