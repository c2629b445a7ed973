// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>

namespace bfmd {

namespace {

constexpr double kEpsilonPrecision = 1e-9;

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::int64_t>;

NgramCounts ngram_counts(const Tokens& tokens, int order) {
  NgramCounts counts;
  if (order <= 0 || static_cast<std::size_t>(order) > tokens.size()) return counts;
  for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                    tokens.begin() + static_cast<long>(i) + order)] += 1;
  }
  return counts;
}

void require_nonempty(std::span<const EvalPair> corpus, const char* op) {
  if (corpus.empty()) throw EmptyCorpus(std::string(op) + ": empty corpus");
  for (const auto& p : corpus) {
    if (p.references.empty())
      throw InvalidParameter(std::string(op) + ": pair without references");
  }
}

}  // namespace

double bleu(std::span<const EvalPair> corpus, int max_order) {
  require_nonempty(corpus, "bleu");
  if (max_order < 1 || max_order > 4)
    throw InvalidParameter("bleu: order must be in 1..4");

  std::vector<std::int64_t> matched(static_cast<std::size_t>(max_order), 0);
  std::vector<std::int64_t> total(static_cast<std::size_t>(max_order), 0);
  std::int64_t cand_len = 0, ref_len = 0;

  for (const auto& pair : corpus) {
    cand_len += static_cast<std::int64_t>(pair.candidate.size());
    // Closest reference length; ties go to the shorter one.
    std::int64_t best = static_cast<std::int64_t>(pair.references[0].size());
    for (const auto& ref : pair.references) {
      auto len = static_cast<std::int64_t>(ref.size());
      auto cand = static_cast<std::int64_t>(pair.candidate.size());
      if (std::llabs(len - cand) < std::llabs(best - cand) ||
          (std::llabs(len - cand) == std::llabs(best - cand) && len < best))
        best = len;
    }
    ref_len += best;

    for (int n = 1; n <= max_order; ++n) {
      NgramCounts c = ngram_counts(pair.candidate, n);
      // Clip against the per-ngram max across references.
      NgramCounts rmax;
      for (const auto& ref : pair.references) {
        for (const auto& [g, cnt] : ngram_counts(ref, n))
          rmax[g] = std::max(rmax[g], cnt);
      }
      for (const auto& [g, cnt] : c) {
        total[static_cast<std::size_t>(n - 1)] += cnt;
        auto it = rmax.find(g);
        if (it != rmax.end())
          matched[static_cast<std::size_t>(n - 1)] += std::min(cnt, it->second);
      }
    }
  }

  double log_sum = 0.0;
  for (int n = 0; n < max_order; ++n) {
    const auto nn = static_cast<std::size_t>(n);
    double p = (total[nn] > 0 && matched[nn] > 0)
                   ? static_cast<double>(matched[nn]) / static_cast<double>(total[nn])
                   : kEpsilonPrecision;
    log_sum += std::log(p);
  }
  if (cand_len == 0) return 0.0;
  const double bp =
      cand_len >= ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_sum / max_order);
}

namespace {

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_pair(const Tokens& cand, const Tokens& ref) {
  const double beta = 1.2;
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0 || cand.empty() || ref.empty()) return 0.0;
  const double p = lcs / static_cast<double>(cand.size());
  const double r = lcs / static_cast<double>(ref.size());
  return (1.0 + beta * beta) * p * r / (r + beta * beta * p);
}

}  // namespace

double rouge_l(std::span<const EvalPair> corpus) {
  require_nonempty(corpus, "rouge_l");
  double sum = 0.0;
  for (const auto& pair : corpus) {
    double best = 0.0;
    for (const auto& ref : pair.references)
      best = std::max(best, rouge_l_pair(pair.candidate, ref));
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

double cider(std::span<const EvalPair> corpus) {
  require_nonempty(corpus, "cider");
  if (corpus.size() < 2)
    throw CorpusTooSmall("cider: needs at least 2 pairs for a document base");
  constexpr int kMaxOrder = 4;

  // Document frequency per n-gram over reference sets.
  std::map<std::vector<std::string>, std::int64_t> df;
  for (const auto& pair : corpus) {
    std::map<std::vector<std::string>, bool> seen;
    for (const auto& ref : pair.references) {
      for (int n = 1; n <= kMaxOrder; ++n) {
        for (const auto& [g, cnt] : ngram_counts(ref, n)) seen[g] = true;
      }
    }
    for (const auto& [g, unused] : seen) df[g] += 1;
  }
  const double log_docs = std::log(static_cast<double>(corpus.size()));

  struct Vec {
    std::array<std::map<std::vector<std::string>, double>, kMaxOrder> w;
    std::array<double, kMaxOrder> norm{};
  };
  auto tfidf = [&](const Tokens& tokens) {
    Vec v;
    for (int n = 1; n <= kMaxOrder; ++n) {
      for (const auto& [g, cnt] : ngram_counts(tokens, n)) {
        auto it = df.find(g);
        const double docs_with =
            it == df.end() ? 0.0 : static_cast<double>(it->second);
        const double idf = log_docs - std::log(std::max(1.0, docs_with));
        const double weight = static_cast<double>(cnt) * idf;
        v.w[static_cast<std::size_t>(n - 1)][g] = weight;
        v.norm[static_cast<std::size_t>(n - 1)] += weight * weight;
      }
    }
    for (double& x : v.norm) x = std::sqrt(x);
    return v;
  };

  double sum = 0.0;
  for (const auto& pair : corpus) {
    Vec hyp = tfidf(pair.candidate);
    double pair_score = 0.0;
    for (const auto& ref : pair.references) {
      Vec rv = tfidf(ref);
      double per_n = 0.0;
      for (int n = 0; n < kMaxOrder; ++n) {
        const auto nn = static_cast<std::size_t>(n);
        double dot = 0.0;
        for (const auto& [g, w] : hyp.w[nn]) {
          auto it = rv.w[nn].find(g);
          if (it != rv.w[nn].end()) dot += w * it->second;
        }
        if (hyp.norm[nn] > 0.0 && rv.norm[nn] > 0.0)
          per_n += dot / (hyp.norm[nn] * rv.norm[nn]);
      }
      pair_score += per_n / kMaxOrder;
    }
    sum += 10.0 * pair_score / static_cast<double>(pair.references.size());
  }
  return sum / static_cast<double>(corpus.size());
}

// --- METEOR-lite -------------------------------------------------------------

std::string light_stem(const std::string& word) {
  static const char* kSuffixes[] = {"ing", "edly", "ed", "es", "ly", "s"};
  for (const char* suffix : kSuffixes) {
    const std::size_t len = std::char_traits<char>::length(suffix);
    if (word.size() > len + 2 && word.ends_with(suffix))
      return word.substr(0, word.size() - len);
  }
  return word;
}

namespace {

// One-to-one alignment: exact stage then stem stage; each candidate token
// prefers the reference slot continuing the previous match, otherwise the
// leftmost free compatible slot.
std::vector<int> align_tokens(const Tokens& cand, const Tokens& ref) {
  std::vector<int> match(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);

  auto run_stage = [&](auto&& equal) {
    int prev_ref = -1;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      if (match[i] >= 0) {
        prev_ref = match[i];
        continue;
      }
      int chosen = -1;
      const int cont = prev_ref + 1;
      if (cont >= 0 && static_cast<std::size_t>(cont) < ref.size() &&
          !used[static_cast<std::size_t>(cont)] &&
          equal(cand[i], ref[static_cast<std::size_t>(cont)])) {
        chosen = cont;
      } else {
        for (std::size_t j = 0; j < ref.size(); ++j) {
          if (!used[j] && equal(cand[i], ref[j])) {
            chosen = static_cast<int>(j);
            break;
          }
        }
      }
      if (chosen >= 0) {
        match[i] = chosen;
        used[static_cast<std::size_t>(chosen)] = true;
        prev_ref = chosen;
      }
    }
  };

  run_stage([](const std::string& a, const std::string& b) { return a == b; });
  run_stage([](const std::string& a, const std::string& b) {
    return light_stem(a) == light_stem(b);
  });
  return match;
}

}  // namespace

double meteor_lite_pair(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const std::vector<int> match = align_tokens(cand, ref);

  int matches = 0, chunks = 0, prev_ref = -2;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (match[i] < 0) continue;
    ++matches;
    if (match[i] != prev_ref + 1) ++chunks;
    prev_ref = match[i];
  }
  if (matches == 0) return 0.0;

  const double p = static_cast<double>(matches) / static_cast<double>(cand.size());
  const double r = static_cast<double>(matches) / static_cast<double>(ref.size());
  const double f = 10.0 * p * r / (r + 9.0 * p);
  const double frac = static_cast<double>(chunks) / static_cast<double>(matches);
  const double penalty = 0.5 * frac * frac * frac;
  return f * (1.0 - penalty);
}

double meteor_lite(std::span<const EvalPair> corpus) {
  require_nonempty(corpus, "meteor_lite");
  double sum = 0.0;
  for (const auto& pair : corpus) {
    double best = 0.0;
    for (const auto& ref : pair.references)
      best = std::max(best, meteor_lite_pair(pair.candidate, ref));
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

MetricReport evaluate_corpus(std::span<const EvalPair> corpus) {
  require_nonempty(corpus, "evaluate_corpus");
  MetricReport r;
  r.bleu1 = bleu(corpus, 1);
  r.bleu2 = bleu(corpus, 2);
  r.bleu3 = bleu(corpus, 3);
  r.bleu4 = bleu(corpus, 4);
  r.meteor = meteor_lite(corpus);
  r.rouge_l = rouge_l(corpus);
  r.cider = cider(corpus);
  return r;
}

json metric_report_to_json(const MetricReport& r) {
  return {{"bleu1", r.bleu1},   {"bleu2", r.bleu2},   {"bleu3", r.bleu3},
          {"bleu4", r.bleu4},   {"meteor", r.meteor}, {"rouge_l", r.rouge_l},
          {"cider", r.cider}};
}

MetricReport metric_report_from_json(const json& j) {
  MetricReport r;
  r.bleu1 = j.at("bleu1").get<double>();
  r.bleu2 = j.at("bleu2").get<double>();
  r.bleu3 = j.at("bleu3").get<double>();
  r.bleu4 = j.at("bleu4").get<double>();
  r.meteor = j.at("meteor").get<double>();
  r.rouge_l = j.at("rouge_l").get<double>();
  r.cider = j.at("cider").get<double>();
  return r;
}

std::string render_metric_report(const MetricReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "BLEU-1   " << r.bleu1 << "\n";
  os << "BLEU-2   " << r.bleu2 << "\n";
  os << "BLEU-3   " << r.bleu3 << "\n";
  os << "BLEU-4   " << r.bleu4 << "\n";
  os << "METEOR   " << r.meteor << "\n";
  os << "ROUGE-L  " << r.rouge_l << "\n";
  os << "CIDEr    " << r.cider << "\n";
  return os.str();
}

}  // namespace bfmd
