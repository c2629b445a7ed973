// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/fixtures.hpp"

#include <cstdio>

namespace bfmd {

namespace {

// Spreads `total` units over `n` buckets: the first (total % n) buckets get
// one extra.
std::vector<std::int64_t> spread(std::int64_t total, std::int64_t n) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(n), total / n);
  for (std::int64_t i = 0; i < total % n; ++i) out[static_cast<std::size_t>(i)] += 1;
  return out;
}

struct DisciplineTotals {
  std::int64_t matches, rallies, hits, replays, hawkeye, net_hits, landings,
      frames;
};

void build_matches(std::vector<MatchRecord>& out, Discipline disc,
                   const DisciplineTotals& t, const char* prefix) {
  auto rallies_per_match = spread(t.rallies, t.matches);
  auto replays_per_match = spread(t.replays, t.matches);
  auto hawkeye_per_match = spread(t.hawkeye, t.matches);
  auto net_per_match = spread(t.net_hits, t.matches);
  auto frames_per_match = spread(t.frames, t.matches);
  auto hits_per_rally = spread(t.hits, t.rallies);      // global rally index
  std::int64_t landings_left = t.landings;              // first rallies get one

  const char* captions[] = {
      "[PLAYER] plays a controlled clear deep into the backcourt.",
      "[PLAYER] hits a steep smash toward the sideline.",
      "[PLAYER] places a tight net shot into the forecourt.",
      "[PLAYER] drives the shuttle flat through the mid-court.",
  };
  const ShotType types[] = {ShotType::clear, ShotType::smash, ShotType::net_shot,
                            ShotType::drive};

  std::int64_t global_rally = 0;
  for (std::int64_t mi = 0; mi < t.matches; ++mi) {
    MatchRecord m;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%02lld", prefix,
                  static_cast<long long>(mi));
    m.match_id = buf;
    m.discipline = disc;
    m.fps = 30.0;

    std::int64_t cursor = 50;
    const std::int64_t n_rallies = rallies_per_match[static_cast<std::size_t>(mi)];
    std::int64_t net_left = net_per_match[static_cast<std::size_t>(mi)];

    for (std::int64_t ri = 0; ri < n_rallies; ++ri, ++global_rally) {
      const std::int64_t n_hits = hits_per_rally[static_cast<std::size_t>(global_rally)];
      RallyRecord rally;
      std::snprintf(buf, sizeof(buf), "r%04lld", static_cast<long long>(ri));
      rally.rally_id = buf;

      Segment seg;
      seg.kind = SegmentKind::rally;
      seg.start_frame = cursor;
      seg.end_frame = cursor + 10 + n_hits * 12 + 10;

      for (std::int64_t hi = 0; hi < n_hits; ++hi) {
        HitEvent hit;
        hit.frame = cursor + 10 + hi * 12;
        hit.player_slot = hi % 2 == 0 ? PlayerSlot::near : PlayerSlot::far;
        const auto k = static_cast<std::size_t>((global_rally + hi) % 4);
        hit.shot.shot_type = types[k];
        hit.shot.caption = captions[k];
        rally.hits.push_back(std::move(hit));
      }
      if (net_left > 0) {
        rally.net_hits.push_back(seg.end_frame - 8);
        --net_left;
      }
      if (landings_left > 0) {
        rally.landings.push_back(seg.end_frame - 4);
        --landings_left;
      }
      m.segments.push_back(seg);
      m.rallies.push_back(std::move(rally));
      cursor = seg.end_frame + 25;
    }

    for (std::int64_t k = 0; k < replays_per_match[static_cast<std::size_t>(mi)]; ++k) {
      Segment s;
      s.kind = SegmentKind::replay;
      s.start_frame = cursor;
      s.end_frame = cursor + 30;
      m.segments.push_back(s);
      cursor += 50;
    }
    for (std::int64_t k = 0; k < hawkeye_per_match[static_cast<std::size_t>(mi)]; ++k) {
      Segment s;
      s.kind = SegmentKind::hawkeye;
      s.start_frame = cursor;
      s.end_frame = cursor + 30;
      m.segments.push_back(s);
      cursor += 50;
    }

    m.total_frames = frames_per_match[static_cast<std::size_t>(mi)];
    if (m.total_frames <= cursor)
      throw Error("reference_stats_corpus: frame budget too small");
    out.push_back(std::move(m));
  }
}

}  // namespace

std::vector<MatchRecord> reference_stats_corpus() {
  std::vector<MatchRecord> out;
  // Frame totals chosen so durations at 30 fps render as 13.31 / 7.02 /
  // 20.32 hours at two decimals.
  build_matches(out, Discipline::singles,
                {12, 1054, 11301, 514, 38, 210, 973, 1437048}, "singles_");
  build_matches(out, Discipline::doubles,
                {7, 633, 5450, 281, 14, 209, 583, 757728}, "doubles_");
  return out;
}

}  // namespace bfmd
