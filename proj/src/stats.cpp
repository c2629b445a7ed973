// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "bfmd/text.hpp"

namespace bfmd {

namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

void accumulate(SplitStats& s, const MatchRecord& m) {
  s.matches += 1;
  s.duration_hours += static_cast<double>(m.total_frames) / m.fps / 3600.0;
  for (const auto& seg : m.segments) {
    switch (seg.kind) {
      case SegmentKind::rally: break;
      case SegmentKind::replay: s.replays += 1; break;
      case SegmentKind::hawkeye: s.hawkeye += 1; break;
    }
  }
  s.rallies += static_cast<std::int64_t>(m.rallies.size());
  for (const auto& r : m.rallies) {
    s.hits += static_cast<std::int64_t>(r.hits.size());
    s.net_hits += static_cast<std::int64_t>(r.net_hits.size());
    s.landings += static_cast<std::int64_t>(r.landings.size());
  }
}

void finalize(SplitStats& s) {
  s.avg_hits_per_rally =
      s.rallies > 0 ? round2(static_cast<double>(s.hits) / static_cast<double>(s.rallies))
                    : 0.0;
}

json split_to_json(const SplitStats& s) {
  return {{"matches", s.matches},
          {"duration_hours", round2(s.duration_hours)},
          {"rallies", s.rallies},
          {"replays", s.replays},
          {"hawkeye", s.hawkeye},
          {"hits", s.hits},
          {"net_hits", s.net_hits},
          {"landings", s.landings},
          {"avg_hits_per_rally", s.avg_hits_per_rally}};
}

}  // namespace

StatsReport dataset_stats(std::span<const MatchRecord> matches) {
  if (matches.empty()) throw EmptyCollection("dataset_stats: no matches");
  StatsReport r;
  for (const auto& m : matches) {
    if (m.fps <= 0.0)
      throw InvalidParameter("dataset_stats: match \"" + m.match_id +
                             "\" has non-positive fps");
    accumulate(r.all, m);
    accumulate(m.discipline == Discipline::singles ? r.singles : r.doubles, m);
  }
  finalize(r.all);
  finalize(r.singles);
  finalize(r.doubles);
  return r;
}

json stats_to_json(const StatsReport& r) {
  return {{"all", split_to_json(r.all)},
          {"singles", split_to_json(r.singles)},
          {"doubles", split_to_json(r.doubles)}};
}

std::string render_stats_table(const StatsReport& r) {
  struct Row {
    const char* label;
    std::string all, singles, doubles;
  };
  auto num = [](std::int64_t v) { return std::to_string(v); };
  auto fix2 = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };
  const std::vector<Row> rows = {
      {"Matches", num(r.all.matches), num(r.singles.matches), num(r.doubles.matches)},
      {"Total duration (hours)", fix2(r.all.duration_hours),
       fix2(r.singles.duration_hours), fix2(r.doubles.duration_hours)},
      {"Rallies", num(r.all.rallies), num(r.singles.rallies), num(r.doubles.rallies)},
      {"Replays", num(r.all.replays), num(r.singles.replays), num(r.doubles.replays)},
      {"Hawk-Eye challenges", num(r.all.hawkeye), num(r.singles.hawkeye),
       num(r.doubles.hawkeye)},
      {"Hits", num(r.all.hits), num(r.singles.hits), num(r.doubles.hits)},
      {"Net hits", num(r.all.net_hits), num(r.singles.net_hits),
       num(r.doubles.net_hits)},
      {"Shuttle landings", num(r.all.landings), num(r.singles.landings),
       num(r.doubles.landings)},
      {"Avg. hits per rally", fix2(r.all.avg_hits_per_rally),
       fix2(r.singles.avg_hits_per_rally), fix2(r.doubles.avg_hits_per_rally)},
  };

  std::size_t label_w = std::string("Category").size();
  std::size_t col_w = std::string("Singles").size();
  for (const auto& row : rows) {
    label_w = std::max(label_w, std::string(row.label).size());
    col_w = std::max({col_w, row.all.size(), row.singles.size(), row.doubles.size()});
  }

  std::ostringstream os;
  auto line = [&](const std::string& a, const std::string& b, const std::string& c,
                  const std::string& d) {
    os << std::left << std::setw(static_cast<int>(label_w) + 2) << a << std::right
       << std::setw(static_cast<int>(col_w) + 2) << b
       << std::setw(static_cast<int>(col_w) + 2) << c
       << std::setw(static_cast<int>(col_w) + 2) << d << "\n";
  };
  line("Category", "All", "Singles", "Doubles");
  os << std::string(label_w + 2 + 3 * (col_w + 2), '-') << "\n";
  for (const auto& row : rows) line(row.label, row.all, row.singles, row.doubles);
  return os.str();
}

const std::vector<std::string>& default_stop_words() {
  static const std::vector<std::string> words = {
      "a",    "an",   "the",  "and",  "or",    "of",    "to",   "in",
      "on",   "at",   "with", "from", "by",    "for",   "is",   "are",
      "was",  "were", "be",   "been", "being", "it",    "its",  "his",
      "her",  "their", "this", "that", "as",   "then",  "than", "but",
      "into", "onto", "over", "under", "up",   "out",   "off",  "before",
      "after", "while", "when", "who", "which", "there", "here",
  };
  return words;
}

CaptionStats caption_stats(std::span<const MatchRecord> matches, std::size_t top_k) {
  CaptionStats cs;
  std::unordered_map<std::string, std::int64_t> counts;
  std::int64_t captions_seen = 0;

  for (const auto& m : matches) {
    for (const auto& r : m.rallies) {
      for (const auto& h : r.hits) {
        const std::string& caption = h.shot.caption;
        if (caption.empty()) continue;
        ++captions_seen;

        // Whitespace-delimited word count for the histogram.
        int words = 0;
        bool in_word = false;
        for (unsigned char c : caption) {
          if (std::isspace(c)) {
            in_word = false;
          } else if (!in_word) {
            in_word = true;
            ++words;
          }
        }
        cs.length_histogram[words] += 1;

        for (const auto& tok : tokenize_text(caption)) {
          if (is_punct_token(tok)) continue;
          counts[tok] += 1;
        }
      }
    }
  }
  if (captions_seen == 0) throw EmptyCollection("caption_stats: no captions");

  const auto& stops = default_stop_words();
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  for (const auto& [word, count] : counts) {
    if (std::find(stops.begin(), stops.end(), word) != stops.end()) continue;
    ranked.emplace_back(word, count);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > top_k) ranked.resize(top_k);
  cs.top_words = std::move(ranked);
  return cs;
}

json caption_stats_to_json(const CaptionStats& cs) {
  json hist = json::object();
  for (const auto& [len, freq] : cs.length_histogram)
    hist[std::to_string(len)] = freq;
  json top = json::array();
  for (const auto& [word, count] : cs.top_words)
    top.push_back({{"word", word}, {"count", count}});
  return {{"length_histogram", hist}, {"top_words", top}};
}

}  // namespace bfmd
