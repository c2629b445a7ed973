// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shot-type -> tactical-category mapping, sliding-window pattern detection
// over categorized rally sequences, and smoothed per-pattern temporal
// intensity curves.

#pragma once

#include <array>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfmd/annotation.hpp"

namespace bfmd {

enum class TacticCategory { attack, control, defense };

const char* to_string(TacticCategory c);
std::optional<TacticCategory> tactic_category_from_string(const std::string& s);

struct TacticMapping {
  // Total over all 12 shot types.
  std::array<TacticCategory, kNumShotTypes> table{};

  TacticCategory of(ShotType t) const { return table[static_cast<int>(t)]; }

  bool operator==(const TacticMapping&) const = default;
};

const TacticMapping& default_tactic_mapping();
TacticMapping tactic_mapping_from_json(const json& j);
json tactic_mapping_to_json(const TacticMapping& m);

struct TacticPattern {
  std::string pattern_id;
  std::vector<TacticCategory> sequence;  // length in [2, 8]

  bool operator==(const TacticPattern&) const = default;
};

const std::vector<TacticPattern>& default_tactic_patterns();
std::vector<TacticPattern> tactic_patterns_from_json(const json& j);
json tactic_patterns_to_json(const std::vector<TacticPattern>& ps);

std::vector<TacticCategory> categorize_rally(const RallyRecord& rally,
                                             const TacticMapping& mapping);

struct Occurrence {
  std::string pattern_id;
  std::size_t start_index = 0;

  bool operator==(const Occurrence&) const = default;
};

// Exact contiguous-subsequence matches; overlapping matches are all
// reported; result sorted by start_index, then pattern_id.
std::vector<Occurrence> detect_patterns(const std::vector<TacticCategory>& seq,
                                        const std::vector<TacticPattern>& patterns);

struct TimedOccurrence {
  std::string pattern_id;
  double t_seconds = 0.0;  // timestamp of the occurrence's first hit
};

struct IntensityCurve {
  std::string pattern_id;
  std::vector<double> times;   // bin centers, seconds
  std::vector<double> values;  // occurrences per second after smoothing
};

// Bins occurrences over [0, match_duration] and smooths with a unit-mass
// Gaussian kernel reflected at the boundaries; kernel_sigma = 0 disables
// smoothing. Total mass (sum of values * bin_width) equals the raw
// occurrence count. Throws InvalidParameter for non-positive bin_width or
// negative kernel_sigma.
std::vector<IntensityCurve> intensity_curves(
    const std::vector<TimedOccurrence>& occurrences, double match_duration,
    double bin_width, double kernel_sigma);

// Full per-match pipeline: categorize every rally, detect patterns, place
// each occurrence at the time of its first hit.
std::vector<TimedOccurrence> match_occurrences(
    const MatchRecord& match, const TacticMapping& mapping,
    const std::vector<TacticPattern>& patterns);

std::string curves_to_csv(const std::vector<IntensityCurve>& curves);
std::string curves_to_svg(const std::vector<IntensityCurve>& curves,
                          const std::string& title);

}  // namespace bfmd
