#include "capeval/cache.hpp"

#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <system_error>
#include <thread>

#include <unistd.h>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"

namespace capeval {
namespace fs = std::filesystem;

namespace {

std::string unique_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream os;
  os << ::getpid() << '.' << std::this_thread::get_id() << '.' << counter++;
  return os.str();
}

bool is_hex_key(const std::string& key) {
  return key.size() == 64 && key.find_first_not_of("0123456789abcdef") == std::string::npos;
}

}  // namespace

std::string cache_key(const ExchangeRequest& request) {
  json j{{"model_id", request.model_id},
               {"template_id", request.template_id},
               {"prompt_digest", digest_any(request.prompt_text)},
               {"image_digest", request.image_digest},
               {"params", canonical_params_string(request.params)}};
  if (!request.variant_tag.empty()) j["variant_tag"] = request.variant_tag;
  return digest_any(canonical_dump(j));
}

ExchangeCache::ExchangeCache(fs::path root, bool strict) : root_(std::move(root)), strict_(strict) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create cache root '" + root_.string() + "': " + ec.message());
}

fs::path ExchangeCache::entry_path(const std::string& key) const {
  if (!is_hex_key(key)) throw Error(ErrorKind::kInvalidInput, "malformed cache key '" + key + "'");
  return root_ / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

std::optional<VlmExchange> ExchangeCache::get(const std::string& key) {
  const auto path = entry_path(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ++misses_;
    return std::nullopt;
  }
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::string problem;
  std::optional<VlmExchange> entry;
  try {
    entry = json::parse(text).get<VlmExchange>();
    if (cache_key(entry->request) != key) problem = "key does not match stored request";
  } catch (const json::exception& e) {
    problem = e.what();
  } catch (const Error& e) {
    problem = e.what();
  }
  if (!problem.empty()) {
    if (strict_) throw Error(ErrorKind::kCorruptEntry, path.string() + ": " + problem);
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  return entry;
}

void ExchangeCache::put(const std::string& key, const VlmExchange& exchange) {
  if (cache_key(exchange.request) != key) {
    throw Error(ErrorKind::kIntegrity, "cache key " + key + " does not match the exchange request");
  }
  const auto path = entry_path(key);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create '" + path.parent_path().string() + "': " + ec.message());

  const auto tmp = path.parent_path() / ("." + key + ".tmp." + unique_suffix());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << canonical_dump(json(exchange));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(ErrorKind::kIo, "failed writing cache entry '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::kIo, "failed publishing cache entry '" + path.string() + "'");
  }
}

CacheUsage ExchangeCache::usage() const {
  CacheUsage u;
  for (const auto& e : fs::recursive_directory_iterator(root_)) {
    if (e.is_regular_file() && e.path().extension() == ".json") {
      ++u.entries;
      u.bytes += static_cast<std::int64_t>(e.file_size());
    }
  }
  return u;
}

std::int64_t ExchangeCache::gc(std::chrono::seconds max_age) {
  const auto cutoff = fs::file_time_type::clock::now() - max_age;
  std::vector<fs::path> doomed;
  for (const auto& e : fs::recursive_directory_iterator(root_)) {
    if (e.is_regular_file() && e.last_write_time() < cutoff) doomed.push_back(e.path());
  }
  std::int64_t removed = 0;
  for (const auto& p : doomed) {
    std::error_code ec;
    if (fs::remove(p, ec)) ++removed;
  }
  return removed;
}

CachedGateway::CachedGateway(std::shared_ptr<VlmGateway> gateway, std::shared_ptr<ExchangeCache> cache)
    : gateway_(std::move(gateway)), cache_(std::move(cache)) {}

VlmExchange CachedGateway::complete(const RenderedPrompt& prompt, const ResolvedImage& image,
                                    const GenerationParams& params, const std::string& variant_tag) {
  ExchangeRequest req{params.model_id, prompt.template_id, prompt.text,
                      image.ref.content_digest.empty() ? digest_bytes(image.bytes) : image.ref.content_digest, params,
                      variant_tag};
  const auto key = cache_key(req);
  if (cache_) {
    if (auto hit = cache_->get(key)) return *hit;
  }
  auto ex = gateway_->complete(prompt, image, params, variant_tag);
  if (cache_) cache_->put(key, ex);
  return ex;
}

}  // namespace capeval
