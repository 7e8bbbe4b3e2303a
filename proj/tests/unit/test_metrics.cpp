#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bedroom_example.hpp"
#include "capeval/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace capeval;

namespace {

std::vector<TokenizedCaption> toks(const std::vector<std::string>& texts) {
  std::vector<TokenizedCaption> out;
  for (const auto& t : texts) out.push_back(tokenize(t));
  return out;
}

// Plain-loop BLEU-4: clipped precisions, closest reference length with ties
// going to the shorter one, no smoothing.
double bleu_oracle(const std::vector<std::string>& c, const std::vector<std::vector<std::string>>& refs) {
  double log_sum = 0;
  for (int n = 1; n <= 4; ++n) {
    const auto cg = oracle::grams(c, n);
    int matched = 0, total = 0;
    for (const auto& [g, cnt] : cg) {
      int best = 0;
      for (const auto& r : refs) {
        const auto rg = oracle::grams(r, n);
        auto it = rg.find(g);
        if (it != rg.end()) best = std::max(best, it->second);
      }
      matched += std::min(cnt, best);
      total += cnt;
    }
    if (matched == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / total);
  }
  std::size_t closest = refs[0].size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return std::abs(static_cast<long>(len) - static_cast<long>(c.size())); };
    if (d(r.size()) < d(closest) || (d(r.size()) == d(closest) && r.size() < closest)) closest = r.size();
  }
  const double bp = c.size() >= closest ? 1.0 : std::exp(1.0 - static_cast<double>(closest) / c.size());
  return bp * std::exp(log_sum / 4.0);
}

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  return t[a.size()][b.size()];
}

std::vector<std::string> random_words(std::mt19937& rng, int min_len, int max_len) {
  static const std::vector<std::string> kVocab{"a", "dog", "cat", "runs", "on", "the", "grass", "red", "ball", "man"};
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, kVocab.size() - 1);
  std::vector<std::string> out;
  for (int i = len(rng); i > 0; --i) out.push_back(kVocab[pick(rng)]);
  return out;
}

std::string join(const std::vector<std::string>& w) {
  std::string s;
  for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
  return s;
}

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("A Dog runs.").tokens, (std::vector<std::string>{"a", "dog", "runs"}));
  EXPECT_EQ(tokenize("man's hat").tokens, (std::vector<std::string>{"man's", "hat"}));
  EXPECT_ERROR_KIND(tokenize("!!!"), ErrorKind::kEmptyCaption);
  EXPECT_ERROR_KIND(tokenize(""), ErrorKind::kEmptyCaption);
}

TEST(Tokenize, PunctuationAndApostrophes) {
  EXPECT_EQ(tokenize("lived-in, cozy; 'quoted' dogs' bowl").tokens,
            (std::vector<std::string>{"lived", "in", "cozy", "quoted", "dogs", "bowl"}));
  EXPECT_EQ(tokenize("  Two\tdogs\n2 cats ").tokens, (std::vector<std::string>{"two", "dogs", "2", "cats"}));
  EXPECT_EQ(tokenize("café au lait").tokens, (std::vector<std::string>{"café", "au", "lait"}));
  const auto t = tokenize("Some text.");
  EXPECT_EQ(t.source, "Some text.");
  EXPECT_EQ(t, tokenize("Some text."));
  for (const auto& w : tokenize(bedroom::kCandidate1).tokens) EXPECT_FALSE(w.empty());
}

TEST(NgramCounts, Basic) {
  const auto c = ngram_counts({"a", "b", "a", "b"}, 2);
  EXPECT_EQ(c.at({"a", "b"}), 2);
  EXPECT_EQ(c.at({"b", "a"}), 1);
  EXPECT_TRUE(ngram_counts({"a"}, 2).empty());
}

TEST(Bleu4, IdentityIsOne) {
  const auto ref = tokenize("a man rides a brown horse on the beach");
  EXPECT_DOUBLE_EQ(bleu4(ref, {tokenize("something else entirely here"), ref}), 1.0);
}

TEST(Bleu4, ZeroCases) {
  EXPECT_EQ(bleu4(tokenize("purple elephants dancing wildly"), toks({"a man rides a horse"})), 0.0);
  const auto refs = toks(bedroom::kReferences);
  EXPECT_EQ(bleu4(tokenize(bedroom::kCandidate1), refs), 0.0);
  EXPECT_EQ(bleu4(tokenize(bedroom::kCandidate2), refs), 0.0);
  EXPECT_EQ(bleu4(tokenize("a man"), toks({"a man rides a horse"})), 0.0);
}

TEST(Bleu4, BrevityPenaltyTiesPreferShorter) {
  // Candidate has 6 tokens; references at 5 and 7 are equally close, so 5 wins and BP is 1.
  const auto cand = tokenize("a b c d e f");
  const auto r5 = tokenize("a b c d e");
  const auto r7 = tokenize("a b c d e f g");
  EXPECT_DOUBLE_EQ(bleu4(cand, {r7, r5}), bleu_oracle(cand.tokens, {r7.tokens, r5.tokens}));
  const auto shorter = tokenize("a b c d e");
  EXPECT_NEAR(bleu4(shorter, {tokenize("a b c d e f g h")}), std::exp(1.0 - 8.0 / 5.0), 1e-12);
}

TEST(Bleu4, MatchesOracleOnRandomCaptions) {
  std::mt19937 rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto c = random_words(rng, 4, 12);
    std::vector<std::vector<std::string>> refs;
    std::vector<TokenizedCaption> refs_t;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 4); ++k) {
      refs.push_back(random_words(rng, 3, 12));
      refs_t.push_back(tokenize(join(refs.back())));
    }
    EXPECT_NEAR(bleu4(tokenize(join(c)), refs_t), bleu_oracle(c, refs), 1e-12);
  }
}

TEST(RougeL, IdentityAndDisjoint) {
  const auto r = tokenize("a dog runs on the grass");
  EXPECT_DOUBLE_EQ(rouge_l(r, {r}), 1.0);
  EXPECT_EQ(rouge_l(tokenize("purple elephants"), {r}), 0.0);
}

TEST(RougeL, HandComputed) {
  // LCS("a dog runs", "a big dog runs fast") = 3: P = 1, R = 3/5.
  const double p = 1.0, r = 0.6, beta = 1.2;
  const double expected = (1 + beta * beta) * p * r / (r + beta * beta * p);
  EXPECT_NEAR(rouge_l(tokenize("a dog runs"), {tokenize("a big dog runs fast")}), expected, 1e-12);
}

TEST(RougeL, ReportedExampleWithinTolerance) {
  const auto refs = toks(bedroom::kReferences);
  EXPECT_NEAR(rouge_l(tokenize(bedroom::kCandidate1), refs), bedroom::kRouge1, 0.05);
  EXPECT_NEAR(rouge_l(tokenize(bedroom::kCandidate2), refs), bedroom::kRouge2, 0.05);
}

TEST(RougeL, AppendingMatchedTokenNeverLowersLcs) {
  std::mt19937 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto c = random_words(rng, 2, 10);
    const auto r = random_words(rng, 2, 10);
    const auto before = lcs(c, r);
    c.push_back(r[rng() % r.size()]);
    EXPECT_GE(lcs(c, r), before);
  }
}

TEST(Metrics, ReferenceOrderDoesNotMatter) {
  std::mt19937 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto c = tokenize(join(random_words(rng, 3, 10)));
    std::vector<TokenizedCaption> refs;
    for (int k = 0; k < 4; ++k) refs.push_back(tokenize(join(random_words(rng, 3, 10))));
    auto shuffled = refs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_DOUBLE_EQ(bleu4(c, refs), bleu4(c, shuffled));
    EXPECT_DOUBLE_EQ(rouge_l(c, refs), rouge_l(c, shuffled));
    const auto idf = CorpusIdf::build({refs, {tokenize("x y z")}});
    EXPECT_NEAR(cider_d({c}, {refs}, idf)[0], cider_d({c}, {shuffled}, idf)[0], 1e-12);
  }
}

TEST(Metrics, EmptyCandidateRejected) {
  const auto refs = toks({"a dog"});
  TokenizedCaption empty;
  EXPECT_ERROR_KIND(bleu4(empty, refs), ErrorKind::kEmptyCaption);
  EXPECT_ERROR_KIND(rouge_l(empty, refs), ErrorKind::kEmptyCaption);
}

TEST(CorpusIdf, DocumentFrequencies) {
  const auto idf = CorpusIdf::build({toks({"a dog", "a dog runs"}), toks({"a cat"})});
  EXPECT_EQ(idf.document_count(), 2u);
  EXPECT_EQ(idf.df({"a"}), 2);
  EXPECT_EQ(idf.df({"dog"}), 1);
  EXPECT_EQ(idf.df({"a", "dog"}), 1);
  EXPECT_EQ(idf.df({"zebra"}), 0);
  EXPECT_NEAR(idf.idf({"dog"}), std::log(2.0 / 2.0), 1e-15);
  EXPECT_NEAR(idf.idf({"zebra"}), std::log(2.0), 1e-15);
  const auto coco = CorpusIdf::build({toks({"a dog"}), toks({"a cat"})}, IdfForm::kCoco);
  EXPECT_NEAR(coco.idf({"dog"}), std::log(2.0), 1e-15);
  EXPECT_NEAR(coco.idf({"a"}), 0.0, 1e-15);
}

TEST(CiderD, EmptyIdfIsConfigError) {
  EXPECT_ERROR_KIND(cider_d({tokenize("a")}, {toks({"a"})}, CorpusIdf{}), ErrorKind::kConfig);
}

TEST(CiderD, NoSharedNgramsIsZero) {
  const auto refs = toks({"a dog runs on grass"});
  const auto idf = CorpusIdf::build({refs, toks({"the cat sleeps"})});
  EXPECT_EQ(cider_d({tokenize("purple elephants dance")}, {refs}, idf)[0], 0.0);
}

TEST(CiderD, SingleDocumentCorpusReachesMaximum) {
  // One document: every n-gram has the same idf, so a candidate equal to its
  // only reference has cosine 1 for each n and no length penalty.
  const auto ref = tokenize("a brown dog runs across the green field");
  const auto idf = CorpusIdf::build({{ref}});
  const auto got = cider_d({ref}, {{ref}}, idf)[0];
  EXPECT_NEAR(got, 10.0, 1e-9);
  EXPECT_NEAR(got, oracle::cider_d({ref.tokens}, {{ref.tokens}}, {{ref.tokens}})[0], 1e-9);
  // Nothing else scores higher against the same corpus.
  EXPECT_LT(cider_d({tokenize("a brown dog runs")}, {{ref}}, idf)[0], got);
}

TEST(CiderD, TwoImageToyCorpusMatchesOracle) {
  const std::vector<std::vector<TokenizedCaption>> corpus{toks({"a dog runs", "the dog runs fast"}),
                                                          toks({"a cat sleeps", "the cat naps"})};
  const auto idf = CorpusIdf::build(corpus);
  const std::vector<TokenizedCaption> cands{tokenize("a dog runs fast"), tokenize("the cat")};
  const auto got = cider_d(cands, {corpus[0], corpus[1]}, idf);

  auto raw = [](const std::vector<TokenizedCaption>& v) {
    std::vector<std::vector<std::string>> out;
    for (const auto& t : v) out.push_back(t.tokens);
    return out;
  };
  const auto expected = oracle::cider_d({cands[0].tokens, cands[1].tokens}, {raw(corpus[0]), raw(corpus[1])},
                                        {raw(corpus[0]), raw(corpus[1])});
  ASSERT_EQ(got.size(), 2u);
  EXPECT_NEAR(got[0], expected[0], 1e-9);
  EXPECT_NEAR(got[1], expected[1], 1e-9);
  EXPECT_GT(got[0], 0.0);
}

TEST(CiderD, RandomCorporaMatchOracle) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int images = 1 + static_cast<int>(rng() % 5);
    std::vector<std::vector<TokenizedCaption>> corpus;
    std::vector<std::vector<std::vector<std::string>>> raw;
    for (int i = 0; i < images; ++i) {
      corpus.emplace_back();
      raw.emplace_back();
      for (int k = 0; k < 1 + static_cast<int>(rng() % 3); ++k) {
        const auto w = random_words(rng, 2, 9);
        corpus.back().push_back(tokenize(join(w)));
        raw.back().push_back(w);
      }
    }
    std::vector<TokenizedCaption> cands;
    std::vector<std::vector<std::string>> raw_cands;
    for (int i = 0; i < images; ++i) {
      raw_cands.push_back(random_words(rng, 2, 9));
      cands.push_back(tokenize(join(raw_cands.back())));
    }
    const auto got = cider_d(cands, corpus, CorpusIdf::build(corpus));
    const auto expected = oracle::cider_d(raw_cands, raw, raw);
    for (int i = 0; i < images; ++i) EXPECT_NEAR(got[i], expected[i], 1e-9);
  }
}
