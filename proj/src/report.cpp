#include "capeval/report.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "capeval/error.hpp"

namespace capeval {
namespace {

struct Series {
  std::vector<double> human;
  std::vector<double> automatic;
};

CorrelationSet correlate(const Series& s, const std::string& view, std::vector<std::string>& warnings) {
  CorrelationSet c;
  c.n = s.human.size();
  const auto attempt = [&](const char* what, auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const Error& e) {
      warnings.push_back(view + " " + what + ": " + e.what());
      return std::nullopt;
    }
  };
  c.pearson = attempt("pearson", [&] { return pearson(s.human, s.automatic); });
  c.tau_b = attempt("tau-b", [&] { return kendall_tau(s.human, s.automatic, TauVariant::kB); });
  c.tau_c = attempt("tau-c", [&] { return kendall_tau(s.human, s.automatic, TauVariant::kC); });
  return c;
}

long long auto_ties(const Series& s) {
  if (s.automatic.size() < 2) return 0;
  const auto c = count_pairs(s.human, s.automatic);
  return c.tied_y + c.tied_xy;
}

std::string fmt(std::optional<double> v, double scale, int decimals, bool strip_leading_zero = false) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, *v * scale);
  std::string s(buf);
  if (strip_leading_zero) {
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  }
  return s;
}

const MetaEvalReport* find(const std::vector<const MetaEvalReport*>& rs, DatasetKind kind) {
  for (const auto* r : rs) {
    if (r->dataset == kind) return r;
  }
  return nullptr;
}

std::optional<double> view_stat(const MetaEvalReport* r, const std::string& view, std::optional<double> CorrelationSet::*stat) {
  if (!r) return std::nullopt;
  auto it = r->views.find(view);
  return it == r->views.end() ? std::nullopt : it->second.*stat;
}

}  // namespace

std::vector<MetricColumn> join_records(const std::vector<JudgedItem>& items, const std::vector<EvalRecord>& records) {
  const auto refs = candidate_refs(items);
  std::set<std::string> expected;
  for (const auto& r : refs) expected.insert(r.record_id);

  std::map<std::string, const EvalRecord*> by_id;
  std::vector<std::string> dangling_records, duplicates;
  for (const auto& rec : records) {
    if (!expected.count(rec.record_id)) dangling_records.push_back(rec.record_id);
    if (!by_id.emplace(rec.record_id, &rec).second) duplicates.push_back(rec.record_id);
  }
  std::vector<std::string> unmatched;
  for (const auto& id : expected) {
    if (!by_id.count(id)) unmatched.push_back(id);
  }
  if (!dangling_records.empty() || !unmatched.empty() || !duplicates.empty()) {
    std::string msg;
    const auto list = [&msg](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(msg.empty() ? "" : "; ") + label + ":";
      for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg += " " + ids[i];
      if (ids.size() > 20) msg += " ... (" + std::to_string(ids.size()) + " total)";
    };
    list("records without a judgment", dangling_records);
    list("judgments without a record", unmatched);
    list("duplicate records", duplicates);
    throw Error(ErrorKind::kJoin, msg);
  }

  std::vector<MetricColumn> columns;
  if (records.empty()) return columns;
  const auto mode = records.front().mode;
  MetricColumn vlm{to_string(mode), {}, true};
  bool any_baseline = false;
  for (const auto& rec : records) {
    if (rec.mode != mode) throw Error(ErrorKind::kJoin, "records mix modes " + to_string(mode) + " and " + to_string(rec.mode));
    vlm.scores[rec.record_id] =
        rec.score && rec.score->value ? std::optional<double>(*rec.score->value) : std::nullopt;
    any_baseline = any_baseline || rec.baselines.has_value();
  }
  columns.push_back(std::move(vlm));
  if (any_baseline) {
    MetricColumn bleu{"bleu4", {}, false}, rouge{"rouge_l", {}, false}, cider{"cider_d", {}, false};
    for (const auto& rec : records) {
      if (!rec.baselines) continue;
      bleu.scores[rec.record_id] = rec.baselines->bleu4;
      rouge.scores[rec.record_id] = rec.baselines->rouge_l;
      cider.scores[rec.record_id] = rec.baselines->cider_d;
    }
    columns.push_back(std::move(bleu));
    columns.push_back(std::move(rouge));
    columns.push_back(std::move(cider));
  }
  return columns;
}

MetaEvalReport meta_evaluate(const std::vector<JudgedItem>& items, const MetricColumn& column,
                             const StatOptions& options) {
  MetaEvalReport rep;
  rep.metric = column.name;
  if (items.empty()) {
    rep.warnings.push_back("empty dataset");
    return rep;
  }
  rep.dataset = items.front().dataset;

  const auto score_of = [&](const std::string& record_id) -> std::optional<double> {
    auto it = column.scores.find(record_id);
    return it == column.scores.end() ? std::nullopt : it->second;
  };

  // Items whose metric column lacks the record entirely (e.g. baselines on a
  // reference-free slice) are out of scope rather than failures.
  const auto in_scope = [&](const std::string& record_id) { return column.scores.count(record_id) > 0; };

  std::optional<std::vector<double>> levels;
  Series heat;

  switch (rep.dataset) {
    case DatasetKind::kThumb: {
      std::map<std::string, Series> views;
      for (const auto& item : items) {
        if (!in_scope(item.id)) continue;
        ++rep.counts.items;
        const auto& p = std::get<ThumbJudged>(item.payload);
        const auto s = score_of(item.id);
        if (!s) {
          ++rep.counts.excluded_parse_failures;
          continue;
        }
        ++rep.counts.evaluated;
        const bool human = p.candidate.origin == Origin::kHuman;
        for (const auto& [name, value] :
             {std::pair<std::string, double>{"precision", p.precision}, {"recall", p.recall}, {"total", p.total}}) {
          views[name].human.push_back(value);
          views[name].automatic.push_back(*s);
          if (!human) {
            views[name + "/without_human"].human.push_back(value);
            views[name + "/without_human"].automatic.push_back(*s);
          }
        }
      }
      for (const auto& [name, series] : views) rep.views[name] = correlate(series, name, rep.warnings);
      rep.primary_view = "total";
      heat = views["total"];
      rep.counts.ties = auto_ties(heat);
      break;
    }
    case DatasetKind::kFlickr8kExpert:
    case DatasetKind::kComposite: {
      const bool flickr = rep.dataset == DatasetKind::kFlickr8kExpert;
      std::map<std::string, Series> views;
      for (const auto& item : items) {
        const auto& p = std::get<LikertJudged>(item.payload);
        const bool human = p.candidate.origin == Origin::kHuman;
        const bool counted = flickr || options.composite_include_human || !human;
        if (!in_scope(item.id)) continue;
        const auto s = score_of(item.id);
        if (counted) {
          ++rep.counts.items;
          ++(s ? rep.counts.evaluated : rep.counts.excluded_parse_failures);
        }
        if (!s) continue;
        if (flickr) {
          for (double h : p.scores) {
            views["replicate"].human.push_back(h);
            views["replicate"].automatic.push_back(*s);
          }
          views["average"].human.push_back(std::accumulate(p.scores.begin(), p.scores.end(), 0.0) / p.scores.size());
          views["average"].automatic.push_back(*s);
        } else {
          views["all"].human.push_back(p.scores.front());
          views["all"].automatic.push_back(*s);
          if (!human) {
            views["without_human"].human.push_back(p.scores.front());
            views["without_human"].automatic.push_back(*s);
          }
        }
      }
      for (const auto& [name, series] : views) rep.views[name] = correlate(series, name, rep.warnings);
      if (flickr) {
        rep.primary_view = options.average_experts ? "average" : "replicate";
        if (!options.average_experts) levels = std::vector<double>{1, 2, 3, 4};
      } else {
        rep.primary_view = options.composite_include_human ? "all" : "without_human";
        levels = std::vector<double>{1, 2, 3, 4, 5};
      }
      heat = views[rep.primary_view];
      rep.counts.ties = auto_ties(heat);
      break;
    }
    case DatasetKind::kPascal50S: {
      std::vector<ScoredPair> pairs;
      for (const auto& item : items) {
        if (!in_scope(item.id + "/a") || !in_scope(item.id + "/b")) continue;
        ++rep.counts.items;
        const auto& p = std::get<PairJudged>(item.payload);
        const auto a = score_of(item.id + "/a");
        const auto b = score_of(item.id + "/b");
        if (!a || !b) {
          ++rep.counts.excluded_parse_failures;
          continue;
        }
        ++rep.counts.evaluated;
        pairs.push_back({p.category, p.preferred, *a, *b});
      }
      rep.pascal = pascal_accuracy(pairs, options.tie_credit);
      for (auto c : rep.pascal->absent) rep.warnings.push_back("category " + to_string(c) + " has no pairs");
      for (const auto& [cat, acc] : rep.pascal->per_category) rep.counts.ties += static_cast<long long>(acc.ties);
      break;
    }
  }

  if (auto it = rep.views.find(rep.primary_view); it != rep.views.end()) {
    rep.pearson_r = it->second.pearson;
    rep.kendall_tau_b = it->second.tau_b;
    rep.kendall_tau_c = it->second.tau_c;
  }
  if (column.percent_scale && rep.dataset != DatasetKind::kPascal50S && !heat.human.empty()) {
    rep.heatmap = heatmap(heat.human, heat.automatic, options.bins, levels);
  }
  return rep;
}

std::vector<MetaEvalReport> meta_evaluate_all(const std::vector<JudgedItem>& items,
                                              const std::vector<EvalRecord>& records, const StatOptions& options) {
  std::vector<MetaEvalReport> out;
  for (const auto& column : join_records(items, records)) out.push_back(meta_evaluate(items, column, options));
  return out;
}

std::string render_markdown(const std::vector<MetaEvalReport>& reports) {
  std::vector<std::string> metrics;
  std::map<std::string, std::vector<const MetaEvalReport*>> by_metric;
  std::set<DatasetKind> kinds;
  for (const auto& r : reports) {
    if (!by_metric.count(r.metric)) metrics.push_back(r.metric);
    by_metric[r.metric].push_back(&r);
    kinds.insert(r.dataset);
  }
  std::ostringstream os;
  if (kinds.count(DatasetKind::kThumb)) {
    os << "### THumB (Pearson)\n\n"
       << "| Metric | P | R | Total | P (w/o human) | R (w/o human) | Total (w/o human) |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& m : metrics) {
      const auto* r = find(by_metric[m], DatasetKind::kThumb);
      if (!r) continue;
      os << "| " << m;
      for (const char* v : {"precision", "recall", "total", "precision/without_human", "recall/without_human",
                            "total/without_human"}) {
        os << " | " << fmt(view_stat(r, v, &CorrelationSet::pearson), 1, 2, true);
      }
      os << " |\n";
    }
    os << '\n';
  }
  if (kinds.count(DatasetKind::kFlickr8kExpert) || kinds.count(DatasetKind::kComposite)) {
    os << "### Flickr8k-Expert / Composite (Kendall tau x 100)\n\n"
       << "| Metric | Flickr8k tau-b | Flickr8k tau-c | Flickr8k tau-b (avg) | Flickr8k tau-c (avg) | "
          "Composite tau-b | Composite tau-c |\n"
       << "|---|---|---|---|---|---|---|\n";
    for (const auto& m : metrics) {
      const auto* f = find(by_metric[m], DatasetKind::kFlickr8kExpert);
      const auto* c = find(by_metric[m], DatasetKind::kComposite);
      if (!f && !c) continue;
      os << "| " << m << " | " << fmt(view_stat(f, "replicate", &CorrelationSet::tau_b), 100, 1) << " | "
         << fmt(view_stat(f, "replicate", &CorrelationSet::tau_c), 100, 1) << " | "
         << fmt(view_stat(f, "average", &CorrelationSet::tau_b), 100, 1) << " | "
         << fmt(view_stat(f, "average", &CorrelationSet::tau_c), 100, 1) << " | "
         << fmt(c ? c->kendall_tau_b : std::nullopt, 100, 1) << " | "
         << fmt(c ? c->kendall_tau_c : std::nullopt, 100, 1) << " |\n";
    }
    os << '\n';
  }
  if (kinds.count(DatasetKind::kPascal50S)) {
    os << "### Pascal-50S (accuracy x 100)\n\n"
       << "| Metric | HC | HI | HM | MM | Mean |\n"
       << "|---|---|---|---|---|---|\n";
    for (const auto& m : metrics) {
      const auto* r = find(by_metric[m], DatasetKind::kPascal50S);
      if (!r || !r->pascal) continue;
      os << "| " << m;
      for (auto cat : kPairCategories) {
        auto it = r->pascal->per_category.find(cat);
        os << " | "
           << fmt(it == r->pascal->per_category.end() ? std::nullopt : std::optional(it->second.accuracy()), 100, 1);
      }
      os << " | " << fmt(r->pascal->mean, 100, 1) << " |\n";
    }
    os << '\n';
  }
  return os.str();
}

void to_json(json& j, const CorrelationSet& v) {
  const auto opt = [](std::optional<double> x) { return x ? json(*x) : json(nullptr); };
  j = json{{"n", v.n}, {"pearson", opt(v.pearson)}, {"tau_b", opt(v.tau_b)}, {"tau_c", opt(v.tau_c)}};
}

void to_json(json& j, const MetaEvalReport& v) {
  const auto opt = [](std::optional<double> x) { return x ? json(*x) : json(nullptr); };
  j = json{{"dataset", to_string(v.dataset)},
           {"metric", v.metric},
           {"counts",
            {{"items", v.counts.items},
             {"evaluated", v.counts.evaluated},
             {"excluded_parse_failures", v.counts.excluded_parse_failures},
             {"ties", v.counts.ties}}},
           {"primary_view", v.primary_view},
           {"pearson_r", opt(v.pearson_r)},
           {"kendall_tau_b", opt(v.kendall_tau_b)},
           {"kendall_tau_c", opt(v.kendall_tau_c)},
           {"views", v.views},
           {"warnings", v.warnings}};
  j["pascal"] = v.pascal ? json(*v.pascal) : json(nullptr);
  j["heatmap"] = v.heatmap ? json(*v.heatmap) : json(nullptr);
}

MetaEvalReport report_from_json(const json& j) {
  const auto opt = [](const json& x) { return x.is_null() ? std::nullopt : std::optional(x.get<double>()); };
  MetaEvalReport r;
  r.dataset = dataset_kind_from_string(j.at("dataset").get<std::string>());
  r.metric = j.at("metric").get<std::string>();
  const auto& c = j.at("counts");
  r.counts = {c.at("items").get<std::size_t>(), c.at("evaluated").get<std::size_t>(),
              c.at("excluded_parse_failures").get<std::size_t>(), c.at("ties").get<long long>()};
  r.primary_view = j.value("primary_view", std::string());
  r.pearson_r = opt(j.at("pearson_r"));
  r.kendall_tau_b = opt(j.at("kendall_tau_b"));
  r.kendall_tau_c = opt(j.at("kendall_tau_c"));
  for (const auto& [name, v] : j.at("views").items()) {
    r.views[name] = CorrelationSet{v.at("n").get<std::size_t>(), opt(v.at("pearson")), opt(v.at("tau_b")),
                                   opt(v.at("tau_c"))};
  }
  if (!j.at("pascal").is_null()) {
    PascalAccuracy p;
    const auto& pj = j.at("pascal");
    if (pj.contains("categories")) {
      for (const auto& [name, v] : pj.at("categories").items()) {
        p.per_category[pair_category_from_string(name)] =
            CategoryAccuracy{v.at("pairs").get<std::size_t>(), v.at("correct").get<double>(), v.at("ties").get<std::size_t>()};
      }
    }
    p.mean = opt(pj.at("mean"));
    for (const auto& a : pj.at("absent")) p.absent.push_back(pair_category_from_string(a.get<std::string>()));
    r.pascal = std::move(p);
  }
  if (!j.at("heatmap").is_null()) {
    const auto& h = j.at("heatmap");
    r.heatmap = Heatmap{h.at("levels").get<std::vector<double>>(), h.at("bin_edges").get<std::vector<double>>(),
                        h.at("rows").get<std::vector<std::vector<double>>>(),
                        h.at("counts").get<std::vector<std::vector<long>>>()};
  }
  r.warnings = j.value("warnings", std::vector<std::string>());
  return r;
}

}  // namespace capeval
