#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capeval/dataset.hpp"
#include "capeval/types.hpp"

namespace capeval {

/// Paired human/automatic scores. Items the metric failed on are kept out
/// of the pairs and listed in `excluded`.
class ScorePairSeries {
 public:
  void add(std::string item_id, double human, double automatic);
  void exclude(std::string item_id) { excluded_.push_back(std::move(item_id)); }

  std::size_t size() const { return human_.size(); }
  std::span<const double> human() const { return human_; }
  std::span<const double> automatic() const { return auto_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<std::string>& excluded() const { return excluded_; }

 private:
  std::vector<std::string> ids_;
  std::vector<double> human_;
  std::vector<double> auto_;
  std::vector<std::string> excluded_;
};

/// Sample Pearson correlation. Throws kUndefinedCorrelation when n < 2 or
/// either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);
double pearson(const ScorePairSeries& s);

enum class TauVariant { kB, kC };

std::string to_string(TauVariant v);
TauVariant tau_variant_from_string(const std::string& s);

struct PairCounts {
  long long concordant = 0;
  long long discordant = 0;
  long long tied_x = 0;   // tied in x only
  long long tied_y = 0;   // tied in y only
  long long tied_xy = 0;  // tied in both
};

/// Concordance counts via sorting plus merge-sort inversion counting,
/// O(n log n).
PairCounts count_pairs(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b (tie-corrected) or tau-c (Stuart). Throws
/// kUndefinedCorrelation when n < 2 or the denominator vanishes.
double kendall_tau(std::span<const double> x, std::span<const double> y, TauVariant variant);
double kendall_tau(const ScorePairSeries& s, TauVariant variant);
double kendall_tau_from_counts(const PairCounts& counts, std::size_t n, std::size_t min_distinct, TauVariant variant);

struct ScoredPair {
  PairCategory category = PairCategory::kHC;
  Side preferred = Side::kA;
  double a_score = 0;
  double b_score = 0;
};

struct CategoryAccuracy {
  std::size_t pairs = 0;
  double correct = 0;  // may be fractional with tie credit
  std::size_t ties = 0;
  double accuracy() const { return pairs ? correct / static_cast<double>(pairs) : 0.0; }
};

struct PascalAccuracy {
  std::map<PairCategory, CategoryAccuracy> per_category;
  // Unweighted mean over the categories that have pairs.
  std::optional<double> mean;
  std::vector<PairCategory> absent;
};

/// A pair counts as correct when the strictly higher score sits on the
/// human-preferred side; equal scores earn `tie_credit` (0 by default).
PascalAccuracy pascal_accuracy(std::span<const ScoredPair> pairs, double tie_credit = 0.0);

struct Heatmap {
  std::vector<double> levels;           // row labels, ascending
  std::vector<double> bin_edges;        // bins + 1 edges over [0, 100]
  std::vector<std::vector<double>> rows;  // row-normalized
  std::vector<std::vector<long>> counts;
};

/// Equal-width edges over [0,100]; the last bin is closed.
std::vector<double> default_bin_edges(int bins = 10);

/// Rows are the distinct human levels (or `levels` if given); each non-empty
/// row sums to 1. Throws kValidation for automatic scores outside [0,100].
Heatmap heatmap(std::span<const double> human, std::span<const double> automatic, int bins = 10,
                std::optional<std::vector<double>> levels = std::nullopt);

std::string heatmap_csv(const Heatmap& h);

void to_json(json& j, const Heatmap& v);
void to_json(json& j, const PascalAccuracy& v);

}  // namespace capeval
