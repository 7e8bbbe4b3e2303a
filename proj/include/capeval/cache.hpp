#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "capeval/gateway.hpp"

namespace capeval {

/// Hex SHA-256 of the canonical JSON of (model_id, template_id, prompt digest,
/// image digest, canonical params).
std::string cache_key(const ExchangeRequest& request);

struct CacheStats {
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  double hit_rate() const {
    return hits + misses == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(hits + misses);
  }
};

struct CacheUsage {
  std::int64_t entries = 0;
  std::int64_t bytes = 0;
};

/// Write-once store of VlmExchange records, one JSON file per key under
/// <root>/<k[0:2]>/<k[2:4]>/<key>.json. Safe for concurrent readers and
/// writers within and across processes.
class ExchangeCache {
 public:
  explicit ExchangeCache(std::filesystem::path root, bool strict = false);

  /// Corrupt entries throw kCorruptEntry in strict mode and read as absent
  /// otherwise.
  std::optional<VlmExchange> get(const std::string& key);
  /// Throws kIntegrity when `key` is not the key of `exchange.request`.
  void put(const std::string& key, const VlmExchange& exchange);

  std::filesystem::path entry_path(const std::string& key) const;
  const std::filesystem::path& root() const { return root_; }

  CacheStats stats() const { return {hits_.load(), misses_.load()}; }
  CacheUsage usage() const;
  /// Removes entries whose file modification time is older than `max_age`.
  /// Returns the number removed.
  std::int64_t gc(std::chrono::seconds max_age);

 private:
  std::filesystem::path root_;
  bool strict_;
  std::atomic<std::int64_t> hits_{0};
  std::atomic<std::int64_t> misses_{0};
};

/// Gateway fronted by the cache: lookups first, backend only on a miss.
class CachedGateway {
 public:
  CachedGateway(std::shared_ptr<VlmGateway> gateway, std::shared_ptr<ExchangeCache> cache);

  VlmExchange complete(const RenderedPrompt& prompt, const ResolvedImage& image, const GenerationParams& params,
                       const std::string& variant_tag = {});

  VlmGateway& gateway() const { return *gateway_; }
  ExchangeCache* cache() const { return cache_.get(); }

 private:
  std::shared_ptr<VlmGateway> gateway_;
  std::shared_ptr<ExchangeCache> cache_;
};

}  // namespace capeval
