#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "capeval/pipeline.hpp"
#include "capeval/report.hpp"

namespace capeval {

struct RunResult {
  DatasetManifest manifest;
  std::vector<ContextRecord> contexts;
  std::vector<EvalRecord> records;
  std::vector<MetaEvalReport> reports;
  PipelineCounters counters;
  std::vector<std::string> warnings;
};

LoadedDataset load_dataset(const RunConfig& config);

/// Baseline scores for the configured dataset. Adds a warning and returns
/// an empty map when the dataset carries no references.
std::map<std::string, BaselineScores> run_baselines(const RunConfig& config, std::vector<std::string>& warnings);

/// End to end: load, stage 1 (per image), stage 2 (per candidate),
/// baselines, meta-evaluation. When config.output_dir is set the
/// intermediate JSONL files and the report bundle are written there;
/// records are streamed to records.jsonl in dataset order so an aborted run
/// leaves its finished records behind.
RunResult run_pipeline(const RunConfig& config, std::shared_ptr<Backend> backend);

/// report.json (config, manifest, counters, reports), report.md and one
/// heatmap CSV per report that has a heatmap.
void write_report_bundle(const std::string& dir, const RunConfig& config, const DatasetManifest& manifest,
                         const std::optional<PipelineCounters>& counters, const std::vector<MetaEvalReport>& reports,
                         const std::vector<std::string>& warnings);

}  // namespace capeval
