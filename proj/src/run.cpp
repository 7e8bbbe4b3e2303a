#include "capeval/run.hpp"

#include <filesystem>
#include <fstream>

#include "capeval/error.hpp"

namespace capeval {
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

LoadedDataset load_dataset(const RunConfig& config) {
  LoadOptions opts{config.image_root, config.check_images};
  return load(config.dataset_kind, config.dataset_path, opts);
}

std::map<std::string, BaselineScores> run_baselines(const RunConfig& config, std::vector<std::string>& warnings) {
  const auto data = load_dataset(config);
  auto scores = compute_baselines(data.items);
  if (scores.empty()) warnings.push_back("dataset has no reference captions; baselines skipped");
  return scores;
}

RunResult run_pipeline(const RunConfig& config, std::shared_ptr<Backend> backend) {
  validate(config);
  RunResult result;
  const auto data = load_dataset(config);
  result.manifest = data.manifest;

  std::map<std::string, BaselineScores> baselines;
  if (config.baselines) {
    baselines = compute_baselines(data.items);
    if (baselines.empty()) result.warnings.push_back("dataset has no reference captions; baselines skipped");
  }

  const bool write = !config.output_dir.empty();
  if (write) fs::create_directories(config.output_dir);

  Pipeline pipeline(config, std::move(backend));
  if (has_stage1(config.mode)) {
    result.contexts = pipeline.extract_contexts(data.items);
    if (write) {
      std::vector<json> rows(result.contexts.begin(), result.contexts.end());
      write_jsonl((fs::path(config.output_dir) / "contexts.jsonl").string(), rows);
    }
  }

  std::ofstream records_out;
  if (write) {
    records_out.open(fs::path(config.output_dir) / "records.jsonl", std::ios::binary | std::ios::trunc);
    if (!records_out) throw Error(ErrorKind::kIo, "cannot write records.jsonl in " + config.output_dir);
  }
  const auto attach = [&baselines](EvalRecord& rec) {
    if (auto it = baselines.find(rec.record_id); it != baselines.end()) rec.baselines = it->second;
  };
  const std::function<void(const EvalRecord&)> sink = [&](const EvalRecord& rec) {
    if (!write) return;
    EvalRecord copy = rec;
    attach(copy);
    records_out << canonical_dump(json(copy)) << '\n';
    records_out.flush();
  };
  result.records = pipeline.score(data.items, result.contexts, sink);
  for (auto& rec : result.records) attach(rec);
  result.counters = pipeline.counters();

  result.reports = meta_evaluate_all(data.items, result.records, config.stats);
  if (write) {
    write_report_bundle(config.output_dir, config, result.manifest, result.counters, result.reports, result.warnings);
  }
  return result;
}

void write_report_bundle(const std::string& dir, const RunConfig& config, const DatasetManifest& manifest,
                         const std::optional<PipelineCounters>& counters, const std::vector<MetaEvalReport>& reports,
                         const std::vector<std::string>& warnings) {
  fs::create_directories(dir);
  json doc{{"config", config}, {"manifest", manifest}, {"reports", reports}, {"warnings", warnings}};
  doc["counters"] = counters ? json(*counters) : json(nullptr);
  write_text(fs::path(dir) / "report.json", doc.dump(2) + "\n");
  write_text(fs::path(dir) / "report.md", render_markdown(reports));
  for (const auto& r : reports) {
    if (!r.heatmap) continue;
    write_text(fs::path(dir) / ("heatmap_" + to_string(r.dataset) + "_" + r.metric + ".csv"), heatmap_csv(*r.heatmap));
  }
}

}  // namespace capeval
