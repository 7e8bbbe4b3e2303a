#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "capeval/types.hpp"

namespace capeval {

inline constexpr int kSchemaVersion = 1;

enum class DatasetKind { kThumb, kFlickr8kExpert, kComposite, kPascal50S };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

/// Flickr8k-Expert (three expert scores in [1,4]) and Composite (one score
/// in [1,5]).
struct LikertJudged {
  CaptionCandidate candidate;
  std::vector<double> scores;

  bool operator==(const LikertJudged&) const = default;
};

struct ThumbJudged {
  CaptionCandidate candidate;
  double precision = 0;
  double recall = 0;
  double total = 0;

  bool operator==(const ThumbJudged&) const = default;
};

enum class PairCategory { kHC, kHI, kHM, kMM };
enum class Side { kA, kB };

inline constexpr PairCategory kPairCategories[] = {PairCategory::kHC, PairCategory::kHI, PairCategory::kHM,
                                                   PairCategory::kMM};

std::string to_string(PairCategory c);
PairCategory pair_category_from_string(const std::string& s);
std::string to_string(Side s);
Side side_from_string(const std::string& s);

struct PairJudged {
  CaptionCandidate candidate_a;
  CaptionCandidate candidate_b;
  PairCategory category = PairCategory::kHC;
  Side preferred = Side::kA;
  std::optional<std::pair<int, int>> votes;

  bool operator==(const PairJudged&) const = default;
};

using JudgedPayload = std::variant<LikertJudged, ThumbJudged, PairJudged>;

struct JudgedItem {
  std::string id;
  DatasetKind dataset = DatasetKind::kThumb;
  ImageRef image;
  std::optional<ReferenceSet> references;
  JudgedPayload payload;

  bool operator==(const JudgedItem&) const = default;

  /// The one or two candidates this item carries, in slot order.
  std::vector<const CaptionCandidate*> candidates() const;
};

struct DatasetManifest {
  DatasetKind dataset = DatasetKind::kThumb;
  std::size_t item_count = 0;
  std::string image_root;
  int schema_version = kSchemaVersion;
};

struct LoadOptions {
  std::string image_root;
  bool check_images = false;
};

struct LoadedDataset {
  std::vector<JudgedItem> items;
  DatasetManifest manifest;
};

/// Parses and validates one JSONL row. `line_no` only feeds error messages.
JudgedItem parse_item(DatasetKind kind, const json& row, std::size_t line_no = 0);

/// Loads a normalized JSONL file in file order. Schema problems throw
/// kLoad with the line number; out-of-range judgments and unknown
/// categories throw kValidation.
LoadedDataset load(DatasetKind kind, const std::string& path, const LoadOptions& options = {});

/// Splits THumB items by candidate origin. `with_human` is the full set,
/// `without_human` keeps machine-origin candidates only. In strict mode an
/// unknown origin throws kValidation; otherwise it is treated as non-human.
std::pair<std::vector<JudgedItem>, std::vector<JudgedItem>> split_thumb_human(const std::vector<JudgedItem>& items,
                                                                             bool strict = false);

/// Drops single-candidate items whose candidate is human-written.
std::vector<JudgedItem> without_human(const std::vector<JudgedItem>& items);

void to_json(json& j, const JudgedItem& v);
void to_json(json& j, const DatasetManifest& v);

}  // namespace capeval
