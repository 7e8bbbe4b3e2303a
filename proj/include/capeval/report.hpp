#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "capeval/dataset.hpp"
#include "capeval/pipeline.hpp"
#include "capeval/stats.hpp"

namespace capeval {

struct CorrelationSet {
  std::size_t n = 0;
  std::optional<double> pearson;
  std::optional<double> tau_b;
  std::optional<double> tau_c;
};

struct MetaEvalCounts {
  std::size_t items = 0;
  std::size_t evaluated = 0;
  std::size_t excluded_parse_failures = 0;
  long long ties = 0;
};

/// Agreement of one metric with the human judgments of one dataset.
struct MetaEvalReport {
  DatasetKind dataset = DatasetKind::kThumb;
  std::string metric;
  MetaEvalCounts counts;
  // Headline view: THumB total, Flickr8k replicate (or averaged with
  // average_experts), Composite with or without human captions.
  std::string primary_view;
  std::optional<double> pearson_r;
  std::optional<double> kendall_tau_b;
  std::optional<double> kendall_tau_c;
  std::map<std::string, CorrelationSet> views;
  std::optional<PascalAccuracy> pascal;
  std::optional<Heatmap> heatmap;
  std::vector<std::string> warnings;
};

/// Automatic scores for one metric keyed by record id; nullopt marks a
/// parse failure.
struct MetricColumn {
  std::string name;
  std::map<std::string, std::optional<double>> scores;
  // Scores live on [0,100] and get a heatmap.
  bool percent_scale = false;
};

/// Builds the VLM-score column and, when the records carry them, the
/// BLEU-4 / ROUGE-L / CIDEr-D columns. Throws kJoin when records and
/// dataset candidates do not match one to one; the message names the
/// offending ids.
std::vector<MetricColumn> join_records(const std::vector<JudgedItem>& items, const std::vector<EvalRecord>& records);

MetaEvalReport meta_evaluate(const std::vector<JudgedItem>& items, const MetricColumn& column,
                             const StatOptions& options);

std::vector<MetaEvalReport> meta_evaluate_all(const std::vector<JudgedItem>& items,
                                              const std::vector<EvalRecord>& records, const StatOptions& options);

/// Markdown tables laid out per dataset family: THumB Pearson (P/R/Total,
/// with and without human captions), Flickr8k/Composite Kendall, Pascal
/// category accuracy.
std::string render_markdown(const std::vector<MetaEvalReport>& reports);

void to_json(json& j, const CorrelationSet& v);
void to_json(json& j, const MetaEvalReport& v);
MetaEvalReport report_from_json(const json& j);

}  // namespace capeval
