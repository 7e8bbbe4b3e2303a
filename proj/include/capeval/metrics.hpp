#pragma once

#include <map>
#include <string>
#include <vector>

namespace capeval {

struct TokenizedCaption {
  std::vector<std::string> tokens;
  std::string source;

  bool operator==(const TokenizedCaption&) const = default;
};

/// Lowercases, turns every non-alphanumeric byte into a separator except an
/// apostrophe between two word characters, and splits on whitespace.
/// Non-ASCII bytes are kept as word characters. Throws kEmptyCaption when
/// nothing is left.
TokenizedCaption tokenize(const std::string& text);

/// Sentence BLEU-4: clipped n-gram precisions for n = 1..4, geometric mean,
/// brevity penalty against the closest reference length (ties prefer the
/// shorter). No smoothing, so any zero precision yields 0.
double bleu4(const TokenizedCaption& candidate, const std::vector<TokenizedCaption>& refs);

/// ROUGE-L with beta = 1.2, computed the way the COCO caption toolkit does:
/// the best LCS precision and best LCS recall over the references are
/// combined into one F-measure.
double rouge_l(const TokenizedCaption& candidate, const std::vector<TokenizedCaption>& refs);

using NgramCounts = std::map<std::vector<std::string>, int>;

/// Counts of all n-grams of exactly length n.
NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n);

enum class IdfForm {
  // log(N / (1 + df))
  kSmoothed,
  // log(N / max(1, df)), as in the COCO toolkit's CIDEr-D
  kCoco,
};

/// Document frequencies of 1..4-grams over the reference sets, one document
/// per image.
class CorpusIdf {
 public:
  CorpusIdf() = default;
  static CorpusIdf build(const std::vector<std::vector<TokenizedCaption>>& refs_per_image,
                         IdfForm form = IdfForm::kSmoothed);

  double idf(const std::vector<std::string>& ngram) const;
  int df(const std::vector<std::string>& ngram) const;
  std::size_t document_count() const { return documents_; }
  IdfForm form() const { return form_; }
  bool empty() const { return documents_ == 0; }

 private:
  std::map<std::vector<std::string>, int> df_;
  std::size_t documents_ = 0;
  IdfForm form_ = IdfForm::kSmoothed;
};

inline constexpr double kCiderSigma = 6.0;

/// CIDEr-D for every candidate: for n = 1..4, tf-idf vectors, clipped
/// cosine against each reference times a gaussian length penalty
/// (sigma = 6), averaged over references and n, scaled by 10.
/// Throws kConfig on an empty idf.
std::vector<double> cider_d(const std::vector<TokenizedCaption>& candidates,
                            const std::vector<std::vector<TokenizedCaption>>& refs_per_candidate,
                            const CorpusIdf& idf);

}  // namespace capeval
