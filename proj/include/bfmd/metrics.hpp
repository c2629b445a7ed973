// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus-level caption metrics over surface tokens: BLEU-1..4 (clipped
// counts summed before ratios, brevity penalty, epsilon floor only for zero
// precisions), LCS-based ROUGE-L, plain TF-IDF n-gram cosine CIDEr, and a
// dependency-free METEOR variant (exact + suffix-stem matching, no synonym
// stage) labeled "meteor_lite" in report metadata.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfmd/errors.hpp"

namespace bfmd {

using json = nlohmann::json;

inline constexpr const char* kMetricsVersion = "bfmd-metrics/1 meteor_lite cider_plain";

struct EvalPair {
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;  // >= 1
};

// Corpus BLEU-n for n in 1..4.
double bleu(std::span<const EvalPair> corpus, int max_order);

// Mean per-pair LCS F-score with recall weight beta = 1.2.
double rouge_l(std::span<const EvalPair> corpus);

// Plain CIDEr (no length gaussian, no count clipping), IDF over the
// reference corpus; needs at least 2 pairs.
double cider(std::span<const EvalPair> corpus);

// Exact + stem unigram alignment, F = 10PR/(R + 9P), chunk penalty
// 0.5 * (chunks / matches)^3.
double meteor_lite(std::span<const EvalPair> corpus);

double meteor_lite_pair(const std::vector<std::string>& candidate,
                        const std::vector<std::string>& reference);

// Fixed suffix-stripping stemmer used by the stem-match stage.
std::string light_stem(const std::string& word);

struct MetricReport {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double meteor = 0, rouge_l = 0, cider = 0;
};

MetricReport evaluate_corpus(std::span<const EvalPair> corpus);

// Exactly the seven column keys.
json metric_report_to_json(const MetricReport& r);
MetricReport metric_report_from_json(const json& j);

// Fixed 4-decimal text rendering.
std::string render_metric_report(const MetricReport& r);

}  // namespace bfmd
