// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfmd/annotation.hpp"

namespace bfmd {

struct SplitStats {
  std::int64_t matches = 0;
  double duration_hours = 0.0;
  std::int64_t rallies = 0;
  std::int64_t replays = 0;
  std::int64_t hawkeye = 0;
  std::int64_t hits = 0;
  std::int64_t net_hits = 0;
  std::int64_t landings = 0;
  double avg_hits_per_rally = 0.0;  // hits / rallies, rounded to 2 decimals

  bool operator==(const SplitStats&) const = default;
};

struct StatsReport {
  SplitStats all;
  SplitStats singles;
  SplitStats doubles;

  bool operator==(const StatsReport&) const = default;
};

// Exact sums over the collection, split by discipline.
// duration_hours = sum(total_frames / fps) / 3600.
// Throws EmptyCollection on an empty input and InvalidParameter when a match
// has non-positive fps.
StatsReport dataset_stats(std::span<const MatchRecord> matches);

json stats_to_json(const StatsReport& r);

// Aligned text table: one row per statistic, columns All / Singles / Doubles.
std::string render_stats_table(const StatsReport& r);

struct CaptionStats {
  std::map<int, std::int64_t> length_histogram;  // words -> frequency
  std::vector<std::pair<std::string, std::int64_t>> top_words;
};

// Lengths are whitespace-delimited word counts ("[PLAYER]" is one word).
// top_words excludes the bundled stop-word list and is ranked by count,
// ties broken alphabetically. Throws EmptyCollection when there are no
// captions.
CaptionStats caption_stats(std::span<const MatchRecord> matches,
                           std::size_t top_k = 25);

const std::vector<std::string>& default_stop_words();

json caption_stats_to_json(const CaptionStats& cs);

}  // namespace bfmd
