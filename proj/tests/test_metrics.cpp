// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "bfmd/metrics.hpp"
#include "bfmd/rng.hpp"
#include "metric_oracles.hpp"

using namespace bfmd;

namespace {

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

EvalPair pair_of(const std::string& cand, const std::string& ref) {
  return {words(cand), {words(ref)}};
}

}  // namespace

TEST_CASE("identical candidate scores 1 for all bleu orders") {
  std::vector<EvalPair> corpus = {pair_of("a quick net kill", "a quick net kill")};
  for (int n = 1; n <= 4; ++n) CHECK(bleu(corpus, n) == doctest::Approx(1.0));
}

TEST_CASE("zero overlap hits the epsilon floor") {
  std::vector<EvalPair> corpus = {pair_of("x y z", "a b c")};
  CHECK(bleu(corpus, 1) < 1e-6);
}

TEST_CASE("brevity penalty hand example") {
  // clipped unigrams 5/5, candidate length 5 vs reference 6
  std::vector<EvalPair> corpus = {
      pair_of("the cat sat on mat", "the cat sat on the mat")};
  CHECK(bleu(corpus, 1) == doctest::Approx(std::exp(1.0 - 6.0 / 5.0)).epsilon(1e-12));
}

TEST_CASE("rouge_l basics and hand case") {
  std::vector<EvalPair> same = {pair_of("a b c", "a b c")};
  CHECK(rouge_l(same) == doctest::Approx(1.0));
  std::vector<EvalPair> disjoint = {pair_of("a b c", "x y z")};
  CHECK(rouge_l(disjoint) == doctest::Approx(0.0));
  // LCS("a b c", "a x c") = 2, P = R = 2/3 so F = 2/3
  std::vector<EvalPair> hand = {pair_of("a b c", "a x c")};
  CHECK(rouge_l(hand) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("meteor_lite hand case: identical four-word sentences") {
  std::vector<EvalPair> corpus = {pair_of("a b c d", "a b c d")};
  CHECK(meteor_lite(corpus) == doctest::Approx(0.9921875).epsilon(1e-12));
}

TEST_CASE("meteor_lite zero matches scores zero") {
  std::vector<EvalPair> corpus = {pair_of("x y", "a b")};
  CHECK(meteor_lite(corpus) == doctest::Approx(0.0));
}

TEST_CASE("meteor_lite reversal keeps F but adds chunks") {
  std::vector<EvalPair> fwd = {pair_of("a b c d", "a b c d")};
  std::vector<EvalPair> rev = {pair_of("d c b a", "a b c d")};
  CHECK(meteor_lite(rev) < meteor_lite(fwd));
  // same precision/recall, only the chunk penalty differs
  CHECK(meteor_lite(rev) == doctest::Approx(1.0 - 0.5).epsilon(1e-12));
}

TEST_CASE("meteor_lite stem stage aligns inflections") {
  std::vector<EvalPair> corpus = {pair_of("player smashes", "player smash")};
  CHECK(meteor_lite(corpus) > 0.9);
}

TEST_CASE("meteor penalty strictly increases with chunk count") {
  // fixed matches m=4; chunk counts 1..4
  auto score = [](int chunks) {
    const double f = 1.0;
    const double frac = chunks / 4.0;
    return f * (1.0 - 0.5 * frac * frac * frac);
  };
  for (int c = 2; c <= 4; ++c) CHECK(score(c) < score(c - 1));
}

TEST_CASE("cider needs a document base") {
  std::vector<EvalPair> one = {pair_of("a b", "a b")};
  CHECK_THROWS_AS(cider(one), CorpusTooSmall);
}

TEST_CASE("cider zero for no shared n-grams, maximal for self match") {
  std::vector<EvalPair> corpus = {
      pair_of("a b c", "a b c"),
      pair_of("p q r", "x y z"),
  };
  const double base = cider(corpus);
  CHECK(base > 0.0);
  // pair 2 shares nothing with its reference, so only pair 1 contributes
  std::vector<EvalPair> self_matched = {
      pair_of("a b c", "a b c"),
      pair_of("x y z", "x y z"),
  };
  CHECK(cider(self_matched) > base);
}

TEST_CASE("cider matches an independent tf-idf cosine computation") {
  // two pairs sharing the unigram "net" across reference documents
  std::vector<EvalPair> corpus = {
      pair_of("tight net shot", "tight net shot"),
      pair_of("net kill now", "steep net kill"),
  };
  const double expected = test::cider_oracle(corpus);
  CHECK(cider(corpus) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bleu and rouge match brute-force oracles on fuzzed pairs") {
  Rng rng(31);
  const char* vocab[] = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<EvalPair> corpus;
    const int pairs = 1 + static_cast<int>(rng.next_below(3));
    for (int p = 0; p < pairs; ++p) {
      EvalPair ep;
      const int cl = 1 + static_cast<int>(rng.next_below(8));
      for (int i = 0; i < cl; ++i) ep.candidate.push_back(vocab[rng.next_below(5)]);
      const int rl = 1 + static_cast<int>(rng.next_below(8));
      std::vector<std::string> ref;
      for (int i = 0; i < rl; ++i) ref.push_back(vocab[rng.next_below(5)]);
      ep.references.push_back(ref);
      corpus.push_back(ep);
    }
    for (int n = 1; n <= 4; ++n)
      CHECK(bleu(corpus, n) == doctest::Approx(test::bleu_oracle(corpus, n)).epsilon(1e-12));
    CHECK(rouge_l(corpus) ==
          doctest::Approx(test::rouge_oracle(corpus)).epsilon(1e-12));
  }
}

TEST_CASE("metrics are invariant to corpus order") {
  Rng rng(57);
  const char* vocab[] = {"u", "v", "w", "x"};
  std::vector<EvalPair> corpus;
  for (int p = 0; p < 6; ++p) {
    EvalPair ep;
    for (int i = 0; i < 4 + static_cast<int>(rng.next_below(3)); ++i)
      ep.candidate.push_back(vocab[rng.next_below(4)]);
    std::vector<std::string> ref;
    for (int i = 0; i < 4 + static_cast<int>(rng.next_below(3)); ++i)
      ref.push_back(vocab[rng.next_below(4)]);
    ep.references.push_back(ref);
    corpus.push_back(ep);
  }
  MetricReport before = evaluate_corpus(corpus);
  std::reverse(corpus.begin(), corpus.end());
  MetricReport after = evaluate_corpus(corpus);
  CHECK(before.bleu4 == doctest::Approx(after.bleu4).epsilon(1e-9));
  CHECK(before.meteor == doctest::Approx(after.meteor).epsilon(1e-9));
  CHECK(before.rouge_l == doctest::Approx(after.rouge_l).epsilon(1e-9));
  CHECK(before.cider == doctest::Approx(after.cider).epsilon(1e-9));
}

TEST_CASE("self evaluation and report keys") {
  std::vector<EvalPair> corpus = {
      pair_of("player hits a clear", "player hits a clear"),
      pair_of("tight net shot now", "tight net shot now"),
      pair_of("steep smash to the floor", "steep smash to the floor"),
  };
  MetricReport r = evaluate_corpus(corpus);
  CHECK(r.bleu4 == doctest::Approx(1.0));
  CHECK(r.rouge_l == doctest::Approx(1.0));

  json j = metric_report_to_json(r);
  REQUIRE(j.size() == 7);
  for (const char* key : {"bleu1", "bleu2", "bleu3", "bleu4", "meteor",
                          "rouge_l", "cider"})
    CHECK(j.contains(key));

  // composition consistency with the individual operations
  CHECK(r.bleu1 == doctest::Approx(bleu(corpus, 1)));
  CHECK(r.meteor == doctest::Approx(meteor_lite(corpus)));
  CHECK(r.rouge_l == doctest::Approx(rouge_l(corpus)));
  CHECK(r.cider == doctest::Approx(cider(corpus)));
}

TEST_CASE("empty corpus throws") {
  std::vector<EvalPair> none;
  CHECK_THROWS_AS(bleu(none, 4), EmptyCorpus);
  CHECK_THROWS_AS(rouge_l(none), EmptyCorpus);
  CHECK_THROWS_AS(meteor_lite(none), EmptyCorpus);
}
