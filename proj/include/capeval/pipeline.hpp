#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capeval/cache.hpp"
#include "capeval/dataset.hpp"
#include "capeval/gateway.hpp"
#include "capeval/parsing.hpp"
#include "capeval/stats.hpp"

namespace capeval {

enum class PipelineMode { kVanilla, kReference, kDescription, kVisce };

std::string to_string(PipelineMode m);
PipelineMode pipeline_mode_from_string(const std::string& s);
bool has_stage1(PipelineMode m);

struct StatOptions {
  bool average_experts = false;
  double tie_credit = 0.0;
  int bins = 10;
  bool composite_include_human = true;
};

struct RunConfig {
  DatasetKind dataset_kind = DatasetKind::kThumb;
  std::string dataset_path;
  std::string image_root;
  bool check_images = false;

  PipelineMode mode = PipelineMode::kVisce;
  EndpointConfig endpoint;
  GenerationParams stage1_params{0.0, 1024, std::nullopt, "llava-v1.5-13b"};
  GenerationParams stage2_params{0.0, 512, std::nullopt, "llava-v1.5-13b"};

  std::string cache_root = ".capeval-cache";
  bool strict_cache = false;
  int parallelism = 4;
  std::string output_dir = "capeval-out";

  StatOptions stats;
  ScorePolicy score_policy;
  bool reproducible = false;
  bool context_per_candidate = false;
  bool baselines = true;
};

/// Throws kConfig for out-of-range settings and missing paths.
void validate(const RunConfig& config);
void to_json(json& j, const RunConfig& v);
void from_json(const json& j, RunConfig& v);

/// Stage-1 output for one image (or one candidate with
/// context_per_candidate).
struct ContextRecord {
  std::string image_id;
  std::string record_id;  // empty unless the context is per candidate
  PipelineMode mode = PipelineMode::kVisce;
  std::optional<VlmExchange> exchange;
  std::optional<VisualContext> context;
  std::optional<ParseFailure> failure;

  bool operator==(const ContextRecord&) const = default;
};

struct BaselineScores {
  double bleu4 = 0;
  double rouge_l = 0;
  double cider_d = 0;

  bool operator==(const BaselineScores&) const = default;
};

struct EvalRecord {
  std::string record_id;  // item id, or "<item>/a" and "<item>/b" for pairs
  std::string item_id;
  std::string slot;
  std::string image_id;
  std::string candidate_id;
  PipelineMode mode = PipelineMode::kVisce;
  std::optional<VlmExchange> stage1;
  std::optional<VisualContext> context;
  std::optional<VlmExchange> stage2;
  std::optional<EvalScore> score;
  std::optional<ParseFailure> failure;
  std::optional<BaselineScores> baselines;
  std::int64_t elapsed_ms = 0;

  bool operator==(const EvalRecord&) const = default;
};

void to_json(json& j, const ContextRecord& v);
void from_json(const json& j, ContextRecord& v);
void to_json(json& j, const BaselineScores& v);
void from_json(const json& j, BaselineScores& v);
void to_json(json& j, const EvalRecord& v);
void from_json(const json& j, EvalRecord& v);

/// One candidate slot of a dataset item.
struct CandidateRef {
  std::string record_id;
  std::string slot;
  const JudgedItem* item = nullptr;
  const CaptionCandidate* candidate = nullptr;
};

std::vector<CandidateRef> candidate_refs(const std::vector<JudgedItem>& items);

/// Per-candidate BLEU-4 / ROUGE-L / CIDEr-D keyed by record id. The CIDEr
/// idf comes from the reference sets of the distinct images in `items`.
/// Items without references are skipped; returns empty when none have any.
std::map<std::string, BaselineScores> compute_baselines(const std::vector<JudgedItem>& items);

struct PipelineCounters {
  long gateway_calls = 0;
  long stage1_calls = 0;
  long stage2_calls = 0;
  CacheStats cache;
  long parse_ok = 0;
  long parse_recovered = 0;
  long parse_failed = 0;
  long decimal_truncated = 0;
};

void to_json(json& j, const PipelineCounters& v);

/// Runs the VLM stages over a dataset with caching and bounded parallelism.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::shared_ptr<Backend> backend);

  /// Stage 1 once per distinct image (or per candidate when configured).
  /// Throws kConfig in vanilla/reference mode.
  std::vector<ContextRecord> extract_contexts(const std::vector<JudgedItem>& items);

  /// Stage 2 for every candidate. Contexts missing from `contexts` are
  /// extracted first. `sink`, when given, receives finished records in
  /// dataset order as soon as a contiguous prefix is complete.
  std::vector<EvalRecord> score(const std::vector<JudgedItem>& items, std::vector<ContextRecord> contexts = {},
                                const std::function<void(const EvalRecord&)>& sink = {});

  PipelineCounters counters() const;
  const RunConfig& config() const { return config_; }

 private:
  ContextRecord run_stage1(const JudgedItem& item, const std::string& record_id);
  EvalRecord run_stage2(const CandidateRef& ref, const ContextRecord* context);

  RunConfig config_;
  std::shared_ptr<VlmGateway> gateway_;
  std::shared_ptr<ExchangeCache> cache_;
  CachedGateway cached_;
  std::atomic<long> stage1_calls_{0};
  std::atomic<long> stage2_calls_{0};
  std::atomic<long> parse_ok_{0};
  std::atomic<long> parse_recovered_{0};
  std::atomic<long> parse_failed_{0};
  std::atomic<long> decimal_truncated_{0};
};

/// Runs `tasks` on up to `workers` threads. The first exception stops
/// scheduling of further tasks and is rethrown after all workers finish.
void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& task);

std::vector<EvalRecord> read_records(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<json>& rows);
std::vector<json> read_jsonl(const std::string& path);

}  // namespace capeval
