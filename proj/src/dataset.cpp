#include "capeval/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "capeval/error.hpp"

namespace capeval {
namespace {

std::string where(std::size_t line_no) { return line_no ? "line " + std::to_string(line_no) + ": " : ""; }

double checked_score(const json& v, double lo, double hi, const std::string& what, std::size_t line_no) {
  if (!v.is_number()) throw Error(ErrorKind::kLoad, where(line_no) + what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < lo || x > hi) {
    throw Error(ErrorKind::kValidation, where(line_no) + what + " = " + v.dump() + " outside [" +
                                            json(lo).dump() + ", " + json(hi).dump() + "]");
  }
  return x;
}

CaptionCandidate parse_candidate(const json& row, const char* field, const std::string& image_id,
                                 std::size_t line_no) {
  if (!row.contains(field) || !row.at(field).is_object()) {
    throw Error(ErrorKind::kLoad, where(line_no) + "missing object field '" + field + "'");
  }
  CaptionCandidate c;
  try {
    c = row.at(field).get<CaptionCandidate>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kLoad, where(line_no) + field + ": " + e.what());
  }
  if (c.image_id.empty()) c.image_id = image_id;
  if (trim(c.text).empty()) throw Error(ErrorKind::kValidation, where(line_no) + field + " text is empty");
  return c;
}

}  // namespace

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kThumb: return "thumb";
    case DatasetKind::kFlickr8kExpert: return "flickr8k_expert";
    case DatasetKind::kComposite: return "composite";
    case DatasetKind::kPascal50S: return "pascal50s";
  }
  return "thumb";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
  for (auto k : {DatasetKind::kThumb, DatasetKind::kFlickr8kExpert, DatasetKind::kComposite, DatasetKind::kPascal50S}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::kConfig, "unknown dataset kind '" + s + "'");
}

std::string to_string(PairCategory c) {
  switch (c) {
    case PairCategory::kHC: return "HC";
    case PairCategory::kHI: return "HI";
    case PairCategory::kHM: return "HM";
    case PairCategory::kMM: return "MM";
  }
  return "HC";
}

PairCategory pair_category_from_string(const std::string& s) {
  for (auto c : kPairCategories) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorKind::kValidation, "unknown pair category '" + s + "'");
}

std::string to_string(Side s) { return s == Side::kA ? "A" : "B"; }

Side side_from_string(const std::string& s) {
  if (s == "A") return Side::kA;
  if (s == "B") return Side::kB;
  throw Error(ErrorKind::kValidation, "preferred must be \"A\" or \"B\", got '" + s + "'");
}

std::vector<const CaptionCandidate*> JudgedItem::candidates() const {
  return std::visit(
      [](const auto& p) -> std::vector<const CaptionCandidate*> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PairJudged>) {
          return {&p.candidate_a, &p.candidate_b};
        } else {
          return {&p.candidate};
        }
      },
      payload);
}

JudgedItem parse_item(DatasetKind kind, const json& row, std::size_t line_no) {
  if (!row.is_object()) throw Error(ErrorKind::kLoad, where(line_no) + "row is not a JSON object");
  if (!row.contains("schema_version") || row.at("schema_version") != kSchemaVersion) {
    throw Error(ErrorKind::kLoad, where(line_no) + "schema_version must be " + std::to_string(kSchemaVersion));
  }
  if (row.contains("dataset") && row.at("dataset") != to_string(kind)) {
    throw Error(ErrorKind::kLoad, where(line_no) + "row dataset " + row.at("dataset").dump() + " does not match " +
                                      to_string(kind));
  }

  JudgedItem item;
  item.dataset = kind;
  try {
    item.id = row.at("item_id").get<std::string>();
    const auto& image = row.at("image");
    item.image.id = image.at("id").get<std::string>();
    item.image.location = image.at("path").get<std::string>();
    if (row.contains("references")) {
      ReferenceSet refs{item.image.id, row.at("references").get<std::vector<std::string>>()};
      if (!refs.references.empty()) item.references = std::move(refs);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kLoad, where(line_no) + e.what());
  }
  if (item.id.empty()) throw Error(ErrorKind::kLoad, where(line_no) + "item_id is empty");
  try {
    item.image.media_type = media_type_from_path(item.image.location);
    if (item.references) validate(*item.references);
  } catch (const Error& e) {
    throw Error(e.kind(), where(line_no) + e.what());
  }

  switch (kind) {
    case DatasetKind::kFlickr8kExpert:
    case DatasetKind::kComposite: {
      LikertJudged p;
      p.candidate = parse_candidate(row, "candidate", item.image.id, line_no);
      if (!row.contains("scores") || !row.at("scores").is_array()) {
        throw Error(ErrorKind::kLoad, where(line_no) + "missing array field 'scores'");
      }
      const bool flickr = kind == DatasetKind::kFlickr8kExpert;
      const std::size_t expected = flickr ? 3 : 1;
      if (row.at("scores").size() != expected) {
        throw Error(ErrorKind::kValidation,
                    where(line_no) + "expected " + std::to_string(expected) + " score(s), got " +
                        std::to_string(row.at("scores").size()));
      }
      for (const auto& s : row.at("scores")) p.scores.push_back(checked_score(s, 1, flickr ? 4 : 5, "score", line_no));
      item.payload = std::move(p);
      break;
    }
    case DatasetKind::kThumb: {
      ThumbJudged p;
      p.candidate = parse_candidate(row, "candidate", item.image.id, line_no);
      for (const char* f : {"precision", "recall", "total"}) {
        if (!row.contains(f)) throw Error(ErrorKind::kLoad, where(line_no) + "missing field '" + f + "'");
      }
      p.precision = checked_score(row.at("precision"), 1, 5, "precision", line_no);
      p.recall = checked_score(row.at("recall"), 1, 5, "recall", line_no);
      p.total = checked_score(row.at("total"), 0, 5, "total", line_no);
      item.payload = std::move(p);
      break;
    }
    case DatasetKind::kPascal50S: {
      PairJudged p;
      p.candidate_a = parse_candidate(row, "candidate_a", item.image.id, line_no);
      p.candidate_b = parse_candidate(row, "candidate_b", item.image.id, line_no);
      if (!row.contains("category") || !row.at("category").is_string()) {
        throw Error(ErrorKind::kValidation, where(line_no) + "missing pair category");
      }
      if (!row.contains("preferred") || !row.at("preferred").is_string()) {
        throw Error(ErrorKind::kLoad, where(line_no) + "missing field 'preferred'");
      }
      try {
        p.category = pair_category_from_string(row.at("category").get<std::string>());
        p.preferred = side_from_string(row.at("preferred").get<std::string>());
      } catch (const Error& e) {
        throw Error(e.kind(), where(line_no) + e.what());
      }
      if (row.contains("votes")) {
        const auto& v = row.at("votes");
        p.votes = std::pair<int, int>(v.at("A").get<int>(), v.at("B").get<int>());
      }
      item.payload = std::move(p);
      break;
    }
  }
  return item;
}

LoadedDataset load(DatasetKind kind, const std::string& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kLoad, "cannot open dataset '" + path + "'");

  LoadedDataset out;
  out.manifest = DatasetManifest{kind, 0, options.image_root, kSchemaVersion};
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row = json::parse(line, nullptr, false);
    if (row.is_discarded()) throw Error(ErrorKind::kLoad, "line " + std::to_string(line_no) + ": invalid JSON");
    auto item = parse_item(kind, row, line_no);
    if (!seen.insert(item.id).second) {
      throw Error(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": duplicate item_id '" + item.id + "'");
    }
    if (options.check_images) {
      auto p = std::filesystem::path(item.image.location);
      if (p.is_relative()) p = std::filesystem::path(options.image_root) / p;
      if (!std::filesystem::is_regular_file(p)) {
        throw Error(ErrorKind::kValidation, "line " + std::to_string(line_no) + ": image not found '" + p.string() + "'");
      }
    }
    out.items.push_back(std::move(item));
  }
  out.manifest.item_count = out.items.size();
  return out;
}

std::pair<std::vector<JudgedItem>, std::vector<JudgedItem>> split_thumb_human(const std::vector<JudgedItem>& items,
                                                                             bool strict) {
  std::pair<std::vector<JudgedItem>, std::vector<JudgedItem>> out;
  for (const auto& item : items) {
    const auto* p = std::get_if<ThumbJudged>(&item.payload);
    if (!p) throw Error(ErrorKind::kValidation, "item '" + item.id + "' is not a THumB item");
    if (strict && p->candidate.origin == Origin::kUnknown) {
      throw Error(ErrorKind::kValidation, "item '" + item.id + "' has unknown caption origin");
    }
    out.first.push_back(item);
    if (p->candidate.origin != Origin::kHuman) out.second.push_back(item);
  }
  return out;
}

std::vector<JudgedItem> without_human(const std::vector<JudgedItem>& items) {
  std::vector<JudgedItem> out;
  for (const auto& item : items) {
    const auto cands = item.candidates();
    if (cands.size() == 1 && cands.front()->origin == Origin::kHuman) continue;
    out.push_back(item);
  }
  return out;
}

void to_json(json& j, const JudgedItem& v) {
  j = json{{"schema_version", kSchemaVersion},
           {"dataset", to_string(v.dataset)},
           {"item_id", v.id},
           {"image", {{"id", v.image.id}, {"path", v.image.location}}}};
  if (v.references) j["references"] = v.references->references;
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LikertJudged>) {
          j["candidate"] = p.candidate;
          j["scores"] = p.scores;
        } else if constexpr (std::is_same_v<T, ThumbJudged>) {
          j["candidate"] = p.candidate;
          j["precision"] = p.precision;
          j["recall"] = p.recall;
          j["total"] = p.total;
        } else {
          j["candidate_a"] = p.candidate_a;
          j["candidate_b"] = p.candidate_b;
          j["category"] = to_string(p.category);
          j["preferred"] = to_string(p.preferred);
          if (p.votes) j["votes"] = {{"A", p.votes->first}, {"B", p.votes->second}};
        }
      },
      v.payload);
}

void to_json(json& j, const DatasetManifest& v) {
  j = json{{"dataset", to_string(v.dataset)},
           {"item_count", v.item_count},
           {"image_root", v.image_root},
           {"schema_version", v.schema_version}};
}

}  // namespace capeval
