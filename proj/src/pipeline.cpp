#include "capeval/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "capeval/digest.hpp"
#include "capeval/error.hpp"
#include "capeval/metrics.hpp"
#include "capeval/prompts.hpp"

namespace capeval {
namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

void scrub_timing(std::optional<VlmExchange>& ex) {
  if (!ex) return;
  ex->timestamp_ms = 0;
  ex->response.latency_ms = 0;
}

std::int64_t elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
}

/// Releases records in index order as soon as a contiguous prefix exists.
class OrderedEmitter {
 public:
  explicit OrderedEmitter(const std::function<void(const EvalRecord&)>& sink) : sink_(sink) {}

  void offer(std::size_t index, const EvalRecord& record) {
    if (!sink_) return;
    std::lock_guard lock(mu_);
    pending_.emplace(index, record);
    while (!pending_.empty() && pending_.begin()->first == next_) {
      sink_(pending_.begin()->second);
      pending_.erase(pending_.begin());
      ++next_;
    }
  }

  /// Flushes whatever finished out of order (used when a run aborts).
  void drain() {
    if (!sink_) return;
    std::lock_guard lock(mu_);
    for (const auto& [i, rec] : pending_) sink_(rec);
    pending_.clear();
  }

 private:
  const std::function<void(const EvalRecord&)>& sink_;
  std::mutex mu_;
  std::map<std::size_t, EvalRecord> pending_;
  std::size_t next_ = 0;
};

}  // namespace

std::string to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::kVanilla: return "vanilla";
    case PipelineMode::kReference: return "reference";
    case PipelineMode::kDescription: return "description";
    case PipelineMode::kVisce: return "visce";
  }
  return "visce";
}

PipelineMode pipeline_mode_from_string(const std::string& s) {
  for (auto m : {PipelineMode::kVanilla, PipelineMode::kReference, PipelineMode::kDescription, PipelineMode::kVisce}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorKind::kConfig, "unknown mode '" + s + "' (vanilla, reference, description, visce)");
}

bool has_stage1(PipelineMode m) { return m == PipelineMode::kDescription || m == PipelineMode::kVisce; }

void validate(const RunConfig& c) {
  validate(c.endpoint);
  try {
    validate(c.stage1_params);
    validate(c.stage2_params);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  if (c.parallelism < 1) throw Error(ErrorKind::kConfig, "parallelism must be >= 1");
  if (c.stats.bins < 1) throw Error(ErrorKind::kConfig, "bins must be >= 1");
  if (c.stats.tie_credit != 0.0 && c.stats.tie_credit != 0.5) {
    throw Error(ErrorKind::kConfig, "tie credit must be 0 or 0.5");
  }
  if (!c.dataset_path.empty() && !std::filesystem::is_regular_file(c.dataset_path)) {
    throw Error(ErrorKind::kConfig, "dataset file not found: " + c.dataset_path);
  }
  if (!c.image_root.empty() && !std::filesystem::is_directory(c.image_root)) {
    throw Error(ErrorKind::kConfig, "image root is not a directory: " + c.image_root);
  }
}

void to_json(json& j, const RunConfig& v) {
  j = json{{"dataset_kind", to_string(v.dataset_kind)},
           {"dataset_path", v.dataset_path},
           {"image_root", v.image_root},
           {"check_images", v.check_images},
           {"mode", to_string(v.mode)},
           {"endpoint", v.endpoint},
           {"stage1_params", v.stage1_params},
           {"stage2_params", v.stage2_params},
           {"cache_root", v.cache_root},
           {"strict_cache", v.strict_cache},
           {"parallelism", v.parallelism},
           {"output_dir", v.output_dir},
           {"stats",
            {{"average_experts", v.stats.average_experts},
             {"tie_credit", v.stats.tie_credit},
             {"bins", v.stats.bins},
             {"composite_include_human", v.stats.composite_include_human}}},
           {"score_policy",
            {{"exact_only", v.score_policy.exact_only}, {"abort_on_failure", v.score_policy.abort_on_failure}}},
           {"reproducible", v.reproducible},
           {"context_per_candidate", v.context_per_candidate},
           {"baselines", v.baselines}};
}

void from_json(const json& j, RunConfig& v) {
  RunConfig d;
  v.dataset_kind = dataset_kind_from_string(j.value("dataset_kind", to_string(d.dataset_kind)));
  v.dataset_path = j.value("dataset_path", d.dataset_path);
  v.image_root = j.value("image_root", d.image_root);
  v.check_images = j.value("check_images", d.check_images);
  v.mode = pipeline_mode_from_string(j.value("mode", to_string(d.mode)));
  v.endpoint = j.contains("endpoint") ? j.at("endpoint").get<EndpointConfig>() : d.endpoint;
  v.stage1_params = j.contains("stage1_params") ? j.at("stage1_params").get<GenerationParams>() : d.stage1_params;
  v.stage2_params = j.contains("stage2_params") ? j.at("stage2_params").get<GenerationParams>() : d.stage2_params;
  v.cache_root = j.value("cache_root", d.cache_root);
  v.strict_cache = j.value("strict_cache", d.strict_cache);
  v.parallelism = j.value("parallelism", d.parallelism);
  v.output_dir = j.value("output_dir", d.output_dir);
  const auto stats = j.value("stats", json::object());
  v.stats.average_experts = stats.value("average_experts", d.stats.average_experts);
  v.stats.tie_credit = stats.value("tie_credit", d.stats.tie_credit);
  v.stats.bins = stats.value("bins", d.stats.bins);
  v.stats.composite_include_human = stats.value("composite_include_human", d.stats.composite_include_human);
  const auto policy = j.value("score_policy", json::object());
  v.score_policy.exact_only = policy.value("exact_only", d.score_policy.exact_only);
  v.score_policy.abort_on_failure = policy.value("abort_on_failure", d.score_policy.abort_on_failure);
  v.reproducible = j.value("reproducible", d.reproducible);
  v.context_per_candidate = j.value("context_per_candidate", d.context_per_candidate);
  v.baselines = j.value("baselines", d.baselines);
}

void to_json(json& j, const ContextRecord& v) {
  j = json{{"image_id", v.image_id},
           {"record_id", v.record_id},
           {"mode", to_string(v.mode)},
           {"exchange", optional_json(v.exchange)},
           {"context", optional_json(v.context)},
           {"failure", optional_json(v.failure)}};
}

void from_json(const json& j, ContextRecord& v) {
  v.image_id = j.at("image_id").get<std::string>();
  v.record_id = j.value("record_id", std::string());
  v.mode = pipeline_mode_from_string(j.at("mode").get<std::string>());
  v.exchange = optional_from<VlmExchange>(j, "exchange");
  v.context = optional_from<VisualContext>(j, "context");
  v.failure = optional_from<ParseFailure>(j, "failure");
}

void to_json(json& j, const BaselineScores& v) {
  j = json{{"bleu4", v.bleu4}, {"rouge_l", v.rouge_l}, {"cider_d", v.cider_d}};
}

void from_json(const json& j, BaselineScores& v) {
  v.bleu4 = j.at("bleu4").get<double>();
  v.rouge_l = j.at("rouge_l").get<double>();
  v.cider_d = j.at("cider_d").get<double>();
}

void to_json(json& j, const EvalRecord& v) {
  j = json{{"record_id", v.record_id},
           {"item_id", v.item_id},
           {"slot", v.slot},
           {"image_id", v.image_id},
           {"candidate_id", v.candidate_id},
           {"mode", to_string(v.mode)},
           {"stage1", optional_json(v.stage1)},
           {"context", optional_json(v.context)},
           {"stage2", optional_json(v.stage2)},
           {"score", optional_json(v.score)},
           {"failure", optional_json(v.failure)},
           {"baselines", optional_json(v.baselines)},
           {"elapsed_ms", v.elapsed_ms}};
}

void from_json(const json& j, EvalRecord& v) {
  v.record_id = j.at("record_id").get<std::string>();
  v.item_id = j.at("item_id").get<std::string>();
  v.slot = j.value("slot", std::string());
  v.image_id = j.value("image_id", std::string());
  v.candidate_id = j.value("candidate_id", std::string());
  v.mode = pipeline_mode_from_string(j.at("mode").get<std::string>());
  v.stage1 = optional_from<VlmExchange>(j, "stage1");
  v.context = optional_from<VisualContext>(j, "context");
  v.stage2 = optional_from<VlmExchange>(j, "stage2");
  v.score = optional_from<EvalScore>(j, "score");
  v.failure = optional_from<ParseFailure>(j, "failure");
  v.baselines = optional_from<BaselineScores>(j, "baselines");
  v.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
}

void to_json(json& j, const PipelineCounters& v) {
  j = json{{"gateway_calls", v.gateway_calls},
           {"stage1_calls", v.stage1_calls},
           {"stage2_calls", v.stage2_calls},
           {"cache_hits", v.cache.hits},
           {"cache_misses", v.cache.misses},
           {"cache_hit_rate", v.cache.hit_rate()},
           {"parse_ok", v.parse_ok},
           {"parse_recovered", v.parse_recovered},
           {"parse_failed", v.parse_failed},
           {"decimal_truncated", v.decimal_truncated}};
}

std::vector<CandidateRef> candidate_refs(const std::vector<JudgedItem>& items) {
  std::vector<CandidateRef> out;
  for (const auto& item : items) {
    const auto cands = item.candidates();
    if (cands.size() == 1) {
      out.push_back({item.id, "", &item, cands[0]});
    } else {
      out.push_back({item.id + "/a", "a", &item, cands[0]});
      out.push_back({item.id + "/b", "b", &item, cands[1]});
    }
  }
  return out;
}

std::map<std::string, BaselineScores> compute_baselines(const std::vector<JudgedItem>& items) {
  std::map<std::string, std::vector<TokenizedCaption>> refs_by_image;
  for (const auto& item : items) {
    if (!item.references || refs_by_image.count(item.image.id)) continue;
    std::vector<TokenizedCaption> toks;
    for (const auto& r : item.references->references) {
      try {
        toks.push_back(tokenize(r));
      } catch (const Error&) {
        // punctuation-only reference; nothing to match against
      }
    }
    if (!toks.empty()) refs_by_image.emplace(item.image.id, std::move(toks));
  }
  std::map<std::string, BaselineScores> out;
  if (refs_by_image.empty()) return out;

  std::vector<std::vector<TokenizedCaption>> docs;
  for (const auto& [id, refs] : refs_by_image) docs.push_back(refs);
  const auto idf = CorpusIdf::build(docs);

  std::vector<std::string> ids;
  std::vector<TokenizedCaption> cands;
  std::vector<std::vector<TokenizedCaption>> cand_refs;
  for (const auto& ref : candidate_refs(items)) {
    auto it = refs_by_image.find(ref.item->image.id);
    if (it == refs_by_image.end()) continue;
    TokenizedCaption cand;
    try {
      cand = tokenize(ref.candidate->text);
    } catch (const Error&) {
      continue;
    }
    BaselineScores s;
    s.bleu4 = bleu4(cand, it->second);
    s.rouge_l = rouge_l(cand, it->second);
    out[ref.record_id] = s;
    ids.push_back(ref.record_id);
    cands.push_back(std::move(cand));
    cand_refs.push_back(it->second);
  }
  const auto cider = cider_d(cands, cand_refs, idf);
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]].cider_d = cider[i];
  return out;
}

void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next++;
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(count, 1))));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

Pipeline::Pipeline(RunConfig config, std::shared_ptr<Backend> backend)
    : config_(std::move(config)),
      gateway_(std::make_shared<VlmGateway>(std::move(backend), config_.endpoint)),
      cache_(config_.cache_root.empty() ? nullptr
                                        : std::make_shared<ExchangeCache>(config_.cache_root, config_.strict_cache)),
      cached_(gateway_, cache_) {
  validate(config_);
}

PipelineCounters Pipeline::counters() const {
  PipelineCounters c;
  c.gateway_calls = gateway_->calls();
  c.stage1_calls = stage1_calls_.load();
  c.stage2_calls = stage2_calls_.load();
  if (cache_) c.cache = cache_->stats();
  c.parse_ok = parse_ok_.load();
  c.parse_recovered = parse_recovered_.load();
  c.parse_failed = parse_failed_.load();
  c.decimal_truncated = decimal_truncated_.load();
  return c;
}

ContextRecord Pipeline::run_stage1(const JudgedItem& item, const std::string& record_id) {
  ContextRecord rec;
  rec.image_id = item.image.id;
  rec.record_id = record_id;
  rec.mode = config_.mode;
  const auto image = resolve_image(item.image, config_.image_root);
  const auto prompt = config_.mode == PipelineMode::kVisce ? render_visce_step1() : render_description_step1();
  ++stage1_calls_;
  rec.exchange = cached_.complete(prompt, image, config_.stage1_params, record_id.empty() ? "" : "candidate:" + record_id);
  const auto& raw = rec.exchange->response.raw_text;
  if (trim(raw).empty()) {
    rec.failure = ParseFailure{FailureReason::kEmptyResponse, digest_any(raw)};
  } else {
    rec.context = parse_visual_context(raw);
  }
  if (config_.reproducible) scrub_timing(rec.exchange);
  return rec;
}

std::vector<ContextRecord> Pipeline::extract_contexts(const std::vector<JudgedItem>& items) {
  if (!has_stage1(config_.mode)) {
    throw Error(ErrorKind::kConfig, "mode '" + to_string(config_.mode) + "' has no context stage");
  }
  struct Job {
    const JudgedItem* item;
    std::string record_id;
  };
  std::vector<Job> jobs;
  if (config_.context_per_candidate) {
    for (const auto& ref : candidate_refs(items)) jobs.push_back({ref.item, ref.record_id});
  } else {
    std::set<std::string> seen;
    for (const auto& item : items) {
      if (seen.insert(item.image.id).second) jobs.push_back({&item, ""});
    }
  }
  std::vector<ContextRecord> out(jobs.size());
  run_parallel(jobs.size(), config_.parallelism,
               [&](std::size_t i) { out[i] = run_stage1(*jobs[i].item, jobs[i].record_id); });
  return out;
}

EvalRecord Pipeline::run_stage2(const CandidateRef& ref, const ContextRecord* context) {
  const auto t0 = std::chrono::steady_clock::now();
  EvalRecord rec;
  rec.record_id = ref.record_id;
  rec.item_id = ref.item->id;
  rec.slot = ref.slot;
  rec.image_id = ref.item->image.id;
  rec.candidate_id = ref.candidate->id;
  rec.mode = config_.mode;

  std::optional<RenderedPrompt> prompt;
  switch (config_.mode) {
    case PipelineMode::kVanilla: prompt = render_vanilla(ref.candidate->text); break;
    case PipelineMode::kReference:
      if (!ref.item->references) {
        throw Error(ErrorKind::kConfig, "reference mode needs references; item '" + ref.item->id + "' has none");
      }
      prompt = render_reference(ref.candidate->text, *ref.item->references);
      break;
    case PipelineMode::kDescription:
    case PipelineMode::kVisce:
      if (!context) throw Error(ErrorKind::kJoin, "no visual context for image '" + rec.image_id + "'");
      rec.stage1 = context->exchange;
      rec.context = context->context;
      if (context->failure) {
        rec.failure = context->failure;
      } else {
        // The raw stage-1 text goes into the prompt, never the parsed form.
        prompt = render_step2(ref.candidate->text, context->context->raw_text);
      }
      break;
  }

  if (prompt) {
    const auto image = resolve_image(ref.item->image, config_.image_root);
    ++stage2_calls_;
    rec.stage2 = cached_.complete(*prompt, image, config_.stage2_params);
    auto parsed = apply_policy(parse_score(rec.stage2->response.raw_text), config_.score_policy);
    if (auto* s = std::get_if<EvalScore>(&parsed)) {
      (s->parse_status == ParseStatus::kOk ? parse_ok_ : parse_recovered_)++;
      if (s->decimal_truncated) ++decimal_truncated_;
      rec.score = *s;
    } else {
      rec.failure = std::get<ParseFailure>(parsed);
    }
  }
  if (rec.failure) {
    ++parse_failed_;
    if (config_.score_policy.abort_on_failure) {
      throw Error(ErrorKind::kParse, "unparseable score for '" + rec.record_id + "' (" +
                                         to_string(rec.failure->reason) + ")");
    }
  }
  if (config_.reproducible) {
    scrub_timing(rec.stage1);
    scrub_timing(rec.stage2);
  } else {
    rec.elapsed_ms = elapsed_since(t0);
  }
  return rec;
}

std::vector<EvalRecord> Pipeline::score(const std::vector<JudgedItem>& items, std::vector<ContextRecord> contexts,
                                        const std::function<void(const EvalRecord&)>& sink) {
  const auto refs = candidate_refs(items);
  std::map<std::string, const ContextRecord*> by_image;
  std::map<std::string, const ContextRecord*> by_record;
  if (has_stage1(config_.mode)) {
    std::set<std::string> ctx_images, ctx_records;
    for (const auto& c : contexts) {
      if (c.record_id.empty()) {
        ctx_images.insert(c.image_id);
      } else {
        ctx_records.insert(c.record_id);
      }
    }
    const auto have = [&](const CandidateRef& r) {
      return config_.context_per_candidate ? ctx_records.count(r.record_id) > 0 : ctx_images.count(r.item->image.id) > 0;
    };
    std::vector<JudgedItem> missing;
    std::set<std::string> missing_ids;
    for (const auto& r : refs) {
      if (!have(r) && missing_ids.insert(r.item->id).second) missing.push_back(*r.item);
    }
    if (!missing.empty()) {
      auto extra = extract_contexts(missing);
      contexts.insert(contexts.end(), extra.begin(), extra.end());
    }
    for (const auto& c : contexts) {
      if (c.record_id.empty()) {
        by_image.emplace(c.image_id, &c);
      } else {
        by_record.emplace(c.record_id, &c);
      }
    }
  }

  std::vector<EvalRecord> out(refs.size());
  OrderedEmitter emitter(sink);
  try {
    run_parallel(refs.size(), config_.parallelism, [&](std::size_t i) {
      const ContextRecord* ctx = nullptr;
      if (has_stage1(config_.mode)) {
        if (auto it = by_record.find(refs[i].record_id); it != by_record.end()) {
          ctx = it->second;
        } else if (auto jt = by_image.find(refs[i].item->image.id); jt != by_image.end()) {
          ctx = jt->second;
        }
      }
      out[i] = run_stage2(refs[i], ctx);
      emitter.offer(i, out[i]);
    });
  } catch (...) {
    emitter.drain();
    throw;
  }
  return out;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  std::vector<json> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto row = json::parse(line, nullptr, false);
    if (row.is_discarded()) throw Error(ErrorKind::kLoad, path + ": line " + std::to_string(n) + ": invalid JSON");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_jsonl(const std::string& path, const std::vector<json>& rows) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
  for (const auto& r : rows) out << canonical_dump(r) << '\n';
}

std::vector<EvalRecord> read_records(const std::string& path) {
  std::vector<EvalRecord> out;
  for (const auto& row : read_jsonl(path)) out.push_back(row.get<EvalRecord>());
  return out;
}

}  // namespace capeval
