#include "capeval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "capeval/error.hpp"

namespace capeval {
namespace {

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      cur[j + 1] = a[i] == b[j] ? prev[j] + 1 : std::max(prev[j + 1], cur[j]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void require_candidate(const TokenizedCaption& c) {
  if (c.tokens.empty()) throw Error(ErrorKind::kEmptyCaption, "candidate has no tokens");
}

void require_refs(const std::vector<TokenizedCaption>& refs) {
  if (refs.empty()) throw Error(ErrorKind::kInvalidInput, "at least one reference is required");
}

struct NgramVector {
  std::map<std::vector<std::string>, double> weight;  // tf * idf
  std::map<std::vector<std::string>, int> count;
  double norm = 0;
};

NgramVector to_vector(const std::vector<std::string>& tokens, int n, const CorpusIdf& idf) {
  NgramVector v;
  v.count = ngram_counts(tokens, n);
  double sq = 0;
  for (const auto& [g, tf] : v.count) {
    const double w = tf * idf.idf(g);
    v.weight[g] = w;
    sq += w * w;
  }
  v.norm = std::sqrt(sq);
  return v;
}

// Counts are clipped to the reference's before weighting, so the sign of the
// idf never matters: every shared n-gram contributes min(tf_c, tf_r) * tf_r * idf^2.
double clipped_cosine(const NgramVector& cand, const NgramVector& ref, double len_delta) {
  double dot = 0;
  for (const auto& [g, tf_c] : cand.count) {
    auto it = ref.count.find(g);
    if (it == ref.count.end()) continue;
    const double w_ref = ref.weight.at(g);
    const double w_clipped = w_ref * std::min(tf_c, it->second) / it->second;
    dot += w_clipped * w_ref;
  }
  if (cand.norm != 0 && ref.norm != 0) dot /= cand.norm * ref.norm;
  return dot * std::exp(-(len_delta * len_delta) / (2 * kCiderSigma * kCiderSigma));
}

}  // namespace

TokenizedCaption tokenize(const std::string& text) {
  std::string cleaned(text.size(), ' ');
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (word_char(c)) {
      cleaned[i] = static_cast<char>(std::tolower(c));
    } else if (c == '\'' && i > 0 && i + 1 < text.size() && word_char(static_cast<unsigned char>(text[i - 1])) &&
               word_char(static_cast<unsigned char>(text[i + 1]))) {
      cleaned[i] = '\'';
    }
  }
  TokenizedCaption out;
  out.source = text;
  std::istringstream in(cleaned);
  for (std::string tok; in >> tok;) out.tokens.push_back(tok);
  if (out.tokens.empty()) throw Error(ErrorKind::kEmptyCaption, "no tokens in '" + text + "'");
  return out;
}

NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n) {
  NgramCounts out;
  if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  }
  return out;
}

double bleu4(const TokenizedCaption& candidate, const std::vector<TokenizedCaption>& refs) {
  require_candidate(candidate);
  require_refs(refs);
  double log_sum = 0;
  for (int n = 1; n <= 4; ++n) {
    const auto cand = ngram_counts(candidate.tokens, n);
    NgramCounts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngram_counts(r.tokens, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    long matched = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      if (auto it = max_ref.find(g); it != max_ref.end()) matched += std::min(c, it->second);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }

  const auto c = static_cast<long>(candidate.tokens.size());
  long best = -1;
  for (const auto& r : refs) {
    const auto len = static_cast<long>(r.tokens.size());
    if (best < 0 || std::labs(len - c) < std::labs(best - c) || (std::labs(len - c) == std::labs(best - c) && len < best)) {
      best = len;
    }
  }
  const double bp = c >= best ? 1.0 : std::exp(1.0 - static_cast<double>(best) / static_cast<double>(c));
  return bp * std::exp(log_sum / 4.0);
}

double rouge_l(const TokenizedCaption& candidate, const std::vector<TokenizedCaption>& refs) {
  require_candidate(candidate);
  require_refs(refs);
  constexpr double kBeta = 1.2;
  double best_p = 0, best_r = 0;
  for (const auto& r : refs) {
    if (r.tokens.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(candidate.tokens, r.tokens));
    best_p = std::max(best_p, lcs / static_cast<double>(candidate.tokens.size()));
    best_r = std::max(best_r, lcs / static_cast<double>(r.tokens.size()));
  }
  if (best_p == 0 || best_r == 0) return 0.0;
  return (1 + kBeta * kBeta) * best_p * best_r / (best_r + kBeta * kBeta * best_p);
}

CorpusIdf CorpusIdf::build(const std::vector<std::vector<TokenizedCaption>>& refs_per_image, IdfForm form) {
  CorpusIdf idf;
  idf.form_ = form;
  idf.documents_ = refs_per_image.size();
  for (const auto& refs : refs_per_image) {
    std::set<std::vector<std::string>> present;
    for (const auto& r : refs) {
      for (int n = 1; n <= 4; ++n) {
        for (const auto& [g, c] : ngram_counts(r.tokens, n)) present.insert(g);
      }
    }
    for (const auto& g : present) ++idf.df_[g];
  }
  return idf;
}

int CorpusIdf::df(const std::vector<std::string>& ngram) const {
  auto it = df_.find(ngram);
  return it == df_.end() ? 0 : it->second;
}

double CorpusIdf::idf(const std::vector<std::string>& ngram) const {
  const double n = static_cast<double>(documents_);
  const double d = df(ngram);
  return form_ == IdfForm::kSmoothed ? std::log(n / (1.0 + d)) : std::log(n / std::max(1.0, d));
}

std::vector<double> cider_d(const std::vector<TokenizedCaption>& candidates,
                            const std::vector<std::vector<TokenizedCaption>>& refs_per_candidate,
                            const CorpusIdf& idf) {
  if (idf.empty()) throw Error(ErrorKind::kConfig, "CIDEr-D needs a non-empty idf corpus");
  if (candidates.size() != refs_per_candidate.size()) {
    throw Error(ErrorKind::kInvalidInput, "one reference list per candidate is required");
  }
  std::vector<double> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const auto& refs = refs_per_candidate[i];
    require_candidate(cand);
    require_refs(refs);
    double sum = 0;
    for (int n = 1; n <= 4; ++n) {
      const auto cv = to_vector(cand.tokens, n, idf);
      for (const auto& r : refs) {
        const auto rv = to_vector(r.tokens, n, idf);
        const double delta = static_cast<double>(cand.tokens.size()) - static_cast<double>(r.tokens.size());
        sum += clipped_cosine(cv, rv, delta);
      }
    }
    out.push_back(10.0 * sum / (4.0 * static_cast<double>(refs.size())));
  }
  return out;
}

}  // namespace capeval
