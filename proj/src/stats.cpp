#include "capeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "capeval/error.hpp"

namespace capeval {
namespace {

void require_paired(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kInvalidInput, "series lengths differ");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw Error(ErrorKind::kInvalidInput, "NaN in series");
  }
  if (x.size() < 2) throw Error(ErrorKind::kUndefinedCorrelation, "need at least two points");
}

// Number of pairs tied within each run of equal values in a sorted range.
template <typename It, typename Eq>
long long tied_pairs(It begin, It end, Eq eq) {
  long long total = 0;
  for (auto it = begin; it != end;) {
    auto run = it;
    while (run != end && eq(*run, *it)) ++run;
    const long long k = run - it;
    total += k * (k - 1) / 2;
    it = run;
  }
  return total;
}

// Sorts v in place and returns the number of strict inversions.
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long inv = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return inv;
}

std::size_t distinct(std::span<const double> v) { return std::set<double>(v.begin(), v.end()).size(); }

}  // namespace

void ScorePairSeries::add(std::string item_id, double human, double automatic) {
  if (std::isnan(human) || std::isnan(automatic)) {
    throw Error(ErrorKind::kInvalidInput, "NaN score for item '" + item_id + "'");
  }
  ids_.push_back(std::move(item_id));
  human_.push_back(human);
  auto_.push_back(automatic);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_paired(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorKind::kUndefinedCorrelation, "constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson(const ScorePairSeries& s) { return pearson(s.human(), s.automatic()); }

std::string to_string(TauVariant v) { return v == TauVariant::kB ? "b" : "c"; }

TauVariant tau_variant_from_string(const std::string& s) {
  if (s == "b") return TauVariant::kB;
  if (s == "c") return TauVariant::kC;
  throw Error(ErrorKind::kConfig, "tau variant must be 'b' or 'c'");
}

PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const long long total = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long tx = tied_pairs(order.begin(), order.end(), [&](auto a, auto b) { return x[a] == x[b]; });
  const long long txy =
      tied_pairs(order.begin(), order.end(), [&](auto a, auto b) { return x[a] == x[b] && y[a] == y[b]; });

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  // With x ascending (y ascending within x-ties), every strict inversion of
  // y is a discordant pair.
  const long long discordant = merge_count(ys, buf, 0, n);
  const long long ty = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  PairCounts c;
  c.tied_xy = txy;
  c.tied_x = tx - txy;
  c.tied_y = ty - txy;
  c.discordant = discordant;
  c.concordant = total - c.discordant - c.tied_x - c.tied_y - c.tied_xy;
  return c;
}

double kendall_tau_from_counts(const PairCounts& c, std::size_t n, std::size_t min_distinct, TauVariant variant) {
  const double s = static_cast<double>(c.concordant - c.discordant);
  if (variant == TauVariant::kB) {
    const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    const double n1 = static_cast<double>(c.tied_x + c.tied_xy);
    const double n2 = static_cast<double>(c.tied_y + c.tied_xy);
    const double denom = std::sqrt((n0 - n1) * (n0 - n2));
    if (denom == 0) throw Error(ErrorKind::kUndefinedCorrelation, "tau-b undefined: a series is constant");
    return s / denom;
  }
  const double m = static_cast<double>(min_distinct);
  if (m < 2) throw Error(ErrorKind::kUndefinedCorrelation, "tau-c undefined: a series is constant");
  const double nn = static_cast<double>(n);
  return 2.0 * s / (nn * nn * (m - 1.0) / m);
}

double kendall_tau(std::span<const double> x, std::span<const double> y, TauVariant variant) {
  require_paired(x, y);
  const auto counts = count_pairs(x, y);
  return kendall_tau_from_counts(counts, x.size(), std::min(distinct(x), distinct(y)), variant);
}

double kendall_tau(const ScorePairSeries& s, TauVariant variant) {
  return kendall_tau(s.human(), s.automatic(), variant);
}

PascalAccuracy pascal_accuracy(std::span<const ScoredPair> pairs, double tie_credit) {
  PascalAccuracy out;
  for (const auto& p : pairs) {
    auto& cat = out.per_category[p.category];
    ++cat.pairs;
    if (p.a_score == p.b_score) {
      ++cat.ties;
      cat.correct += tie_credit;
    } else if ((p.a_score > p.b_score) == (p.preferred == Side::kA)) {
      cat.correct += 1;
    }
  }
  double sum = 0;
  int present = 0;
  for (auto c : kPairCategories) {
    auto it = out.per_category.find(c);
    if (it == out.per_category.end()) {
      out.absent.push_back(c);
      continue;
    }
    sum += it->second.accuracy();
    ++present;
  }
  if (present) out.mean = sum / present;
  return out;
}

std::vector<double> default_bin_edges(int bins) {
  if (bins < 1) throw Error(ErrorKind::kConfig, "need at least one bin");
  std::vector<double> edges(bins + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = 100.0 * i / bins;
  return edges;
}

Heatmap heatmap(std::span<const double> human, std::span<const double> automatic, int bins,
                std::optional<std::vector<double>> levels) {
  if (human.size() != automatic.size()) throw Error(ErrorKind::kInvalidInput, "series lengths differ");
  Heatmap h;
  h.bin_edges = default_bin_edges(bins);
  if (levels) {
    h.levels = *levels;
  } else {
    h.levels.assign(human.begin(), human.end());
  }
  std::sort(h.levels.begin(), h.levels.end());
  h.levels.erase(std::unique(h.levels.begin(), h.levels.end()), h.levels.end());
  h.counts.assign(h.levels.size(), std::vector<long>(bins, 0));

  for (std::size_t i = 0; i < human.size(); ++i) {
    const double a = automatic[i];
    if (!(a >= 0.0 && a <= 100.0)) {
      throw Error(ErrorKind::kValidation, "automatic score " + std::to_string(a) + " outside [0,100]");
    }
    auto row = std::lower_bound(h.levels.begin(), h.levels.end(), human[i]);
    if (row == h.levels.end() || *row != human[i]) {
      throw Error(ErrorKind::kValidation, "human score " + std::to_string(human[i]) + " is not a listed level");
    }
    // upper_bound finds the first edge > a; the closing edge 100 belongs to the last bin.
    auto bin = static_cast<int>(std::upper_bound(h.bin_edges.begin(), h.bin_edges.end(), a) - h.bin_edges.begin()) - 1;
    bin = std::min(bin, bins - 1);
    ++h.counts[row - h.levels.begin()][bin];
  }

  for (const auto& counts : h.counts) {
    const long total = std::accumulate(counts.begin(), counts.end(), 0L);
    std::vector<double> row(counts.size(), 0.0);
    if (total > 0) {
      for (std::size_t b = 0; b < counts.size(); ++b) row[b] = static_cast<double>(counts[b]) / total;
    }
    h.rows.push_back(std::move(row));
  }
  return h;
}

std::string heatmap_csv(const Heatmap& h) {
  std::ostringstream os;
  os.precision(17);
  os << "level";
  for (std::size_t b = 0; b + 1 < h.bin_edges.size(); ++b) {
    os << ",[" << h.bin_edges[b] << "-" << h.bin_edges[b + 1] << (b + 2 == h.bin_edges.size() ? "]" : ")");
  }
  os << ",count\n";
  for (std::size_t r = 0; r < h.levels.size(); ++r) {
    os << h.levels[r];
    for (double v : h.rows[r]) os << ',' << v;
    os << ',' << std::accumulate(h.counts[r].begin(), h.counts[r].end(), 0L) << '\n';
  }
  return os.str();
}

void to_json(json& j, const Heatmap& v) {
  j = json{{"levels", v.levels}, {"bin_edges", v.bin_edges}, {"rows", v.rows}, {"counts", v.counts}};
}

void to_json(json& j, const PascalAccuracy& v) {
  j = json::object();
  for (const auto& [cat, acc] : v.per_category) {
    j["categories"][to_string(cat)] = {
        {"pairs", acc.pairs}, {"correct", acc.correct}, {"ties", acc.ties}, {"accuracy", acc.accuracy()}};
  }
  j["mean"] = v.mean ? json(*v.mean) : json(nullptr);
  json absent = json::array();
  for (auto c : v.absent) absent.push_back(to_string(c));
  j["absent"] = absent;
}

}  // namespace capeval
