// capeval: command-line driver for VLM caption evaluation and
// meta-evaluation against human judgments.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "capeval/cache.hpp"
#include "capeval/error.hpp"
#include "capeval/mock_backend.hpp"
#include "capeval/run.hpp"

namespace fs = std::filesystem;
using namespace capeval;

namespace {

struct CliOptions {
  RunConfig config;
  std::string dataset_kind = "thumb";
  std::string mode = "visce";
  std::string model_id = "llava-v1.5-13b";
  double temperature = 0.0;
  std::int64_t stage1_max_tokens = 1024;
  std::int64_t stage2_max_tokens = 512;
  std::optional<std::int64_t> seed;
  long timeout_ms = 120000;
  long backoff_ms = 500;
  std::string mock_script;
  std::string tau = "b";
  bool composite_exclude_human = false;
  bool no_baselines = false;

  std::string contexts_path;
  std::string records_path;
  std::string baselines_path;
  std::vector<std::string> report_paths;
  std::string markdown_out;
  double older_than_days = 30;
};

void add_dataset_options(CLI::App* app, CliOptions& o) {
  app->add_option("--dataset-kind", o.dataset_kind, "thumb | flickr8k_expert | composite | pascal50s")
      ->check(CLI::IsMember({"thumb", "flickr8k_expert", "composite", "pascal50s"}));
  app->add_option("--dataset", o.config.dataset_path, "Normalized JSONL dataset")->required();
  app->add_option("--image-root", o.config.image_root, "Directory image paths are relative to");
  app->add_flag("--check-images", o.config.check_images, "Verify every image exists while loading");
}

void add_endpoint_options(CLI::App* app, CliOptions& o) {
  app->add_option("--endpoint", o.config.endpoint.base_url, "OpenAI-compatible base URL")
      ->envname("CAPEVAL_ENDPOINT");
  app->add_option("--token-env", o.config.endpoint.token_env, "Environment variable holding the bearer token");
  app->add_option("--model", o.model_id, "Model id passed through to the endpoint")->envname("CAPEVAL_MODEL");
  app->add_option("--mode", o.mode, "vanilla | reference | description | visce")
      ->check(CLI::IsMember({"vanilla", "reference", "description", "visce"}));
  app->add_option("--temperature", o.temperature)->check(CLI::NonNegativeNumber);
  app->add_option("--stage1-max-tokens", o.stage1_max_tokens)->check(CLI::PositiveNumber);
  app->add_option("--stage2-max-tokens", o.stage2_max_tokens)->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed);
  app->add_option("--timeout-ms", o.timeout_ms)->check(CLI::PositiveNumber);
  app->add_option("--max-retries", o.config.endpoint.max_retries)->check(CLI::NonNegativeNumber);
  app->add_option("--backoff-ms", o.backoff_ms, "Initial retry backoff")->check(CLI::NonNegativeNumber);
  app->add_option("--parallelism", o.config.parallelism, "Concurrent requests")->check(CLI::PositiveNumber);
  app->add_option("--cache-dir", o.config.cache_root, "Response cache root")->envname("CAPEVAL_CACHE_DIR");
  app->add_flag("--strict-cache", o.config.strict_cache, "Fail on corrupt cache entries");
  app->add_option("--mock-script", o.mock_script, "Answer from a JSON script instead of the network");
  app->add_flag("--strict", o.config.score_policy.abort_on_failure, "Abort on the first unparseable score");
  app->add_flag("--exact-scores", o.config.score_policy.exact_only,
                "Count scores embedded in prose as parse failures");
  app->add_flag("--reproducible", o.config.reproducible, "Zero timestamps and latencies in records");
  app->add_flag("--context-per-candidate", o.config.context_per_candidate,
                "Extract visual context per caption instead of per image");
}

void add_stat_options(CLI::App* app, CliOptions& o) {
  app->add_flag("--average-experts", o.config.stats.average_experts,
                "Headline Flickr8k numbers use the mean of the expert scores");
  app->add_option("--tau", o.tau, "Kendall variant printed in the summary (both are always reported)")
      ->check(CLI::IsMember({"b", "c"}));
  app->add_option("--tie-credit", o.config.stats.tie_credit, "Credit for tied Pascal pairs")
      ->check(CLI::IsMember({0.0, 0.5}));
  app->add_option("--bins", o.config.stats.bins, "Heatmap bins over [0,100]")->check(CLI::PositiveNumber);
  app->add_flag("--composite-exclude-human", o.composite_exclude_human,
                "Drop human-written Composite captions from the headline numbers");
}

void add_output_option(CLI::App* app, CliOptions& o) {
  app->add_option("--out", o.config.output_dir, "Output directory");
}

void finalize(CliOptions& o) {
  auto& c = o.config;
  c.dataset_kind = dataset_kind_from_string(o.dataset_kind);
  c.mode = pipeline_mode_from_string(o.mode);
  c.endpoint.timeout = std::chrono::milliseconds(o.timeout_ms);
  c.endpoint.backoff_initial = std::chrono::milliseconds(o.backoff_ms);
  c.endpoint.max_parallel = c.parallelism;
  c.stage1_params = GenerationParams{o.temperature, o.stage1_max_tokens, o.seed, o.model_id};
  c.stage2_params = GenerationParams{o.temperature, o.stage2_max_tokens, o.seed, o.model_id};
  c.stats.composite_include_human = !o.composite_exclude_human;
  c.baselines = !o.no_baselines;
}

std::shared_ptr<Backend> make_backend(const CliOptions& o) {
  if (!o.mock_script.empty()) return mock_from_file(o.mock_script);
  return std::make_shared<HttpBackend>();
}

void print_summary(const std::vector<MetaEvalReport>& reports, TauVariant tau) {
  for (const auto& r : reports) {
    std::cout << to_string(r.dataset) << " / " << r.metric << ": evaluated " << r.counts.evaluated << "/"
              << r.counts.items << " (excluded " << r.counts.excluded_parse_failures << ")";
    const auto k = tau == TauVariant::kB ? r.kendall_tau_b : r.kendall_tau_c;
    if (r.pearson_r) std::cout << "  pearson=" << *r.pearson_r;
    if (k) std::cout << "  tau_" << to_string(tau) << "=" << *k;
    if (r.pascal && r.pascal->mean) std::cout << "  pascal_mean=" << *r.pascal->mean;
    std::cout << '\n';
  }
}

std::vector<MetaEvalReport> read_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  const json doc = json::parse(in);
  std::vector<MetaEvalReport> out;
  for (const auto& r : doc.at("reports")) out.push_back(report_from_json(r));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capeval - VLM caption evaluation with visual context, and meta-evaluation tooling"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with default option values");
  CliOptions o;

  auto* run = app.add_subcommand("run", "Full pipeline: contexts, scores, baselines, meta-evaluation");
  add_dataset_options(run, o);
  add_endpoint_options(run, o);
  add_stat_options(run, o);
  add_output_option(run, o);
  run->add_flag("--no-baselines", o.no_baselines, "Skip BLEU-4 / ROUGE-L / CIDEr-D");

  auto* extract = app.add_subcommand("extract-context", "Stage 1 only; writes contexts.jsonl");
  add_dataset_options(extract, o);
  add_endpoint_options(extract, o);
  add_output_option(extract, o);

  auto* score = app.add_subcommand("score", "Stage 2 (and stage 1 where missing); writes records.jsonl");
  add_dataset_options(score, o);
  add_endpoint_options(score, o);
  add_output_option(score, o);
  score->add_option("--contexts", o.contexts_path, "contexts.jsonl from extract-context");

  auto* baselines = app.add_subcommand("baselines", "BLEU-4, ROUGE-L and CIDEr-D per candidate");
  add_dataset_options(baselines, o);
  add_output_option(baselines, o);

  auto* meta = app.add_subcommand("meta-eval", "Correlate records with human judgments");
  add_dataset_options(meta, o);
  add_stat_options(meta, o);
  add_output_option(meta, o);
  meta->add_option("--records", o.records_path, "records.jsonl from score/run")->required();
  meta->add_option("--baselines", o.baselines_path, "baselines.jsonl to join into the records");

  auto* report = app.add_subcommand("report", "Render markdown tables from report.json files");
  report->add_option("reports", o.report_paths, "report.json files")->required();
  report->add_option("--markdown-out", o.markdown_out, "Write markdown here instead of stdout");

  auto* cache = app.add_subcommand("cache", "Cache maintenance");
  cache->require_subcommand(1);
  auto* gc = cache->add_subcommand("gc", "Delete entries older than the given age");
  gc->add_option("--cache-dir", o.config.cache_root)->envname("CAPEVAL_CACHE_DIR");
  gc->add_option("--older-than-days", o.older_than_days)->check(CLI::NonNegativeNumber);
  auto* stats = cache->add_subcommand("stats", "Entry count and size");
  stats->add_option("--cache-dir", o.config.cache_root)->envname("CAPEVAL_CACHE_DIR");

  CLI11_PARSE(app, argc, argv);

  try {
    finalize(o);
    const auto out_dir = o.config.output_dir;
    if (*run) {
      auto result = run_pipeline(o.config, make_backend(o));
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      print_summary(result.reports, tau_variant_from_string(o.tau));
      std::cout << "gateway calls: " << result.counters.gateway_calls
                << ", cache hit rate: " << result.counters.cache.hit_rate()
                << ", parse failures: " << result.counters.parse_failed << '\n';
    } else if (*extract) {
      validate(o.config);
      Pipeline pipeline(o.config, make_backend(o));
      const auto data = load_dataset(o.config);
      const auto contexts = pipeline.extract_contexts(data.items);
      write_jsonl((fs::path(out_dir) / "contexts.jsonl").string(), {contexts.begin(), contexts.end()});
      std::cout << "contexts: " << contexts.size() << ", gateway calls: " << pipeline.counters().gateway_calls << '\n';
    } else if (*score) {
      validate(o.config);
      Pipeline pipeline(o.config, make_backend(o));
      const auto data = load_dataset(o.config);
      std::vector<ContextRecord> contexts;
      if (!o.contexts_path.empty()) {
        for (const auto& row : read_jsonl(o.contexts_path)) contexts.push_back(row.get<ContextRecord>());
      }
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "records.jsonl", std::ios::binary | std::ios::trunc);
      const auto records = pipeline.score(data.items, contexts, [&out](const EvalRecord& r) {
        out << canonical_dump(json(r)) << '\n';
        out.flush();
      });
      const auto c = pipeline.counters();
      std::cout << "records: " << records.size() << ", gateway calls: " << c.gateway_calls
                << ", parse failures: " << c.parse_failed << '\n';
    } else if (*baselines) {
      std::vector<std::string> warnings;
      const auto scores = run_baselines(o.config, warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      std::vector<json> rows;
      for (const auto& [id, s] : scores) {
        json row = s;
        row["record_id"] = id;
        rows.push_back(std::move(row));
      }
      write_jsonl((fs::path(out_dir) / "baselines.jsonl").string(), rows);
      std::cout << "baseline rows: " << rows.size() << '\n';
    } else if (*meta) {
      const auto data = load_dataset(o.config);
      auto records = read_records(o.records_path);
      if (!o.baselines_path.empty()) {
        std::map<std::string, BaselineScores> scores;
        for (const auto& row : read_jsonl(o.baselines_path)) {
          scores[row.at("record_id").get<std::string>()] = row.get<BaselineScores>();
        }
        for (auto& r : records) {
          if (auto it = scores.find(r.record_id); it != scores.end()) r.baselines = it->second;
        }
      }
      const auto reports = meta_evaluate_all(data.items, records, o.config.stats);
      write_report_bundle(out_dir, o.config, data.manifest, std::nullopt, reports, {});
      print_summary(reports, tau_variant_from_string(o.tau));
    } else if (*report) {
      std::vector<MetaEvalReport> all;
      for (const auto& p : o.report_paths) {
        auto rs = read_reports(p);
        all.insert(all.end(), rs.begin(), rs.end());
      }
      const auto md = render_markdown(all);
      if (o.markdown_out.empty()) {
        std::cout << md;
      } else {
        std::ofstream(o.markdown_out) << md;
      }
    } else if (*gc) {
      ExchangeCache c(o.config.cache_root);
      const auto age = std::chrono::seconds(static_cast<long long>(o.older_than_days * 86400));
      std::cout << "removed " << c.gc(age) << " entries\n";
    } else if (*stats) {
      ExchangeCache c(o.config.cache_root);
      const auto u = c.usage();
      std::cout << "entries: " << u.entries << "\nbytes: " << u.bytes << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "capeval: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "capeval: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
