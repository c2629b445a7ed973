// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/synth.hpp"

#include <cmath>
#include <filesystem>

#include "bfmd/rng.hpp"

namespace fs = std::filesystem;

namespace bfmd {

const std::vector<const char*>& synth_verbs() {
  static const std::vector<const char*> verbs = {"hits", "plays", "executes",
                                                 "delivers"};
  return verbs;
}

// Phrase pools only use lexicon keywords, so the derived semantic target
// reflects the caption wording.
const std::array<ShotGrammar, kNumShotTypes>& shot_grammars() {
  static const std::array<ShotGrammar, kNumShotTypes> grammars = {{
      // serve
      {"serve",
       {"soft", "controlled", "flat"},
       {"into the forecourt", "toward the mid-court area"},
       {"to reset the exchange", "to disrupt the receiver"}},
      // long_serve
      {"long serve",
       {"high", "lofted", "upward"},
       {"deep into the backcourt"},
       {"to pressure the receiver"}},
      // smash
      {"smash",
       {"steep downward", "downward", "steep"},
       {"into the backcourt", "toward the mid-court area"},
       {"looking to finish the rally with an aggressive attack",
        "going for the outright winner"}},
      // clear
      {"clear",
       {"high", "lofted", "arcing"},
       {"deep into the backcourt"},
       {"to recover and reset the rally", "to neutralize the attack"}},
      // drop
      {"drop",
       {"soft", "gentle", "delicate"},
       {"into the forecourt", "just over the net into the forecourt"},
       {"to disrupt the rhythm", "to pressure the defense"}},
      // push
      {"push",
       {"flat", "controlled"},
       {"toward the mid-court area", "into the backcourt"},
       {"to pressure the defense"}},
      // net_shot
      {"net shot",
       {"tight", "delicate", "soft"},
       {"into the forecourt"},
       {"to disrupt the rhythm", "looking for a loose reply"}},
      // net_kill
      {"net kill",
       {"steep", "downward"},
       {"into the forecourt"},
       {"finishing the rally with an aggressive attack"}},
      // lift
      {"lift",
       {"high", "upward", "lofted"},
       {"deep into the backcourt"},
       {"to recover into a defensive position", "to reset the rally"}},
      // drive
      {"drive",
       {"flat", "skimming"},
       {"through the mid-court area", "into the backcourt"},
       {"to pressure the opponent", "attacking the open space"}},
      // block
      {"block",
       {"soft", "controlled"},
       {"into the forecourt"},
       {"to defend and reset the rally", "absorbing the attack"}},
      // press
      {"press",
       {"steep", "downward", "flat"},
       {"into the forecourt", "toward the mid-court area"},
       {"to pressure the lifter", "rushing the opponent"}},
  }};
  return grammars;
}

namespace {

std::string make_caption(ShotType type, Rng& rng) {
  const ShotGrammar& g = shot_grammars()[static_cast<int>(type)];
  const auto& verbs = synth_verbs();
  const char* verb = verbs[rng.next_below(verbs.size())];
  const char* traj = g.trajectory[rng.next_below(g.trajectory.size())];
  const char* region = g.region[rng.next_below(g.region.size())];

  std::string caption = "[PLAYER] ";
  caption += verb;
  const char first = traj[0];
  caption += (first == 'a' || first == 'e' || first == 'i' || first == 'o' ||
              first == 'u')
                 ? " an "
                 : " a ";
  caption += traj;
  caption += " ";
  caption += g.noun;
  caption += " ";
  caption += region;
  if (rng.next_double() < kIntentClauseProbability) {
    caption += ", ";
    caption += g.intent[rng.next_below(g.intent.size())];
  }
  caption += ".";
  return caption;
}

struct TrackPoint {
  double x, y;
};

// Shuttle position over the post-hit phase, u in [0, 1]. Image coordinates:
// larger y is lower on screen. Profiles are type-specific so clips and
// shuttle tracks are discriminative.
TrackPoint shuttle_point(ShotType type, double u, double x0, double x1) {
  const double x = x0 + (x1 - x0) * u;
  double y = 0;
  switch (type) {
    case ShotType::smash:
      y = 52.0 + 138.0 * u;  // steep descending line, strictly increasing y
      break;
    case ShotType::net_kill:
      y = 92.0 + 96.0 * u;
      break;
    case ShotType::press:
      y = 84.0 + 92.0 * u;
      break;
    case ShotType::clear:
      y = 150.0 - 120.0 * std::sin(3.14159265358979 * std::min(1.0, u * 1.08));
      break;
    case ShotType::lift:
      y = 160.0 - 118.0 * std::sin(3.14159265358979 * std::min(1.0, u * 1.05));
      break;
    case ShotType::long_serve:
      y = 170.0 - 120.0 * std::sin(3.14159265358979 * std::min(1.0, u * 1.02));
      break;
    case ShotType::drop:
      y = 70.0 + 80.0 * std::pow(u, 1.6);
      break;
    case ShotType::net_shot:
      y = 100.0 + 28.0 * std::pow(u, 1.4);
      break;
    case ShotType::block:
      y = 96.0 + 40.0 * u;
      break;
    case ShotType::drive:
      y = 112.0 + 6.0 * std::sin(6.0 * u);
      break;
    case ShotType::push:
      y = 104.0 + 26.0 * u;
      break;
    case ShotType::serve:
      y = 150.0 - 52.0 * std::sin(3.14159265358979 * std::min(1.0, u));
      break;
  }
  return {x, y};
}

struct PlayerGeom {
  double cx, cy;  // bottom-center
  double w, h;
};

PlayerGeom player_geom(PlayerSlot slot, double base_x, double phase, double t) {
  if (slot == PlayerSlot::near) {
    return {base_x + 16.0 * std::sin(0.05 * t + phase), 196.0 + 6.0 * std::sin(0.03 * t),
            32.0, 46.0};
  }
  return {base_x + 13.0 * std::sin(0.04 * t + phase + 1.7),
          56.0 + 5.0 * std::sin(0.025 * t + 0.5), 24.0, 34.0};
}

PlayerFrame make_player_frame(const PlayerGeom& g, int pose_points, Rng& rng) {
  PlayerFrame p;
  p.bbox = {g.cx - g.w / 2.0, g.cy - g.h, g.cx + g.w / 2.0, g.cy};
  p.pose.reserve(static_cast<std::size_t>(pose_points));
  for (int k = 0; k < pose_points; ++k) {
    // Keypoints laid out on a jittered grid inside the box.
    double fx = (k % 4 + 0.5) / 4.0;
    double fy = (k / 4 + 0.5) / 5.0;
    p.pose.push_back({g.cx - g.w / 2.0 + fx * g.w + rng.uniform(-1.0, 1.0),
                      g.cy - g.h + fy * g.h + rng.uniform(-1.0, 1.0)});
  }
  return p;
}

void fill_rect(ClipTensor& clip, std::uint32_t t, double x1, double y1, double x2,
               double y2, std::uint8_t value) {
  const auto xi1 = static_cast<long>(std::max(0.0, std::floor(x1)));
  const auto yi1 = static_cast<long>(std::max(0.0, std::floor(y1)));
  const auto xi2 = static_cast<long>(std::min<double>(clip.width - 1.0, std::ceil(x2)));
  const auto yi2 = static_cast<long>(std::min<double>(clip.height - 1.0, std::ceil(y2)));
  for (long y = yi1; y <= yi2; ++y) {
    for (long x = xi1; x <= xi2; ++x) {
      for (std::uint32_t c = 0; c < clip.channels; ++c)
        clip.at(t, static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), c) =
            value;
    }
  }
}

void fill_disc(ClipTensor& clip, std::uint32_t t, double cx, double cy, double r,
               std::uint8_t value) {
  const auto xi1 = static_cast<long>(std::max(0.0, std::floor(cx - r)));
  const auto yi1 = static_cast<long>(std::max(0.0, std::floor(cy - r)));
  const auto xi2 = static_cast<long>(std::min<double>(clip.width - 1.0, std::ceil(cx + r)));
  const auto yi2 = static_cast<long>(std::min<double>(clip.height - 1.0, std::ceil(cy + r)));
  for (long y = yi1; y <= yi2; ++y) {
    for (long x = xi1; x <= xi2; ++x) {
      double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy > r * r) continue;
      for (std::uint32_t c = 0; c < clip.channels; ++c)
        clip.at(t, static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), c) =
            value;
    }
  }
}

}  // namespace

ClipTensor render_clip(const ModalityTrack& track,
                       const std::array<std::int64_t, kClipFrames>& window,
                       int clip_size) {
  ClipTensor clip;
  clip.frames = kClipFrames;
  clip.height = static_cast<std::uint32_t>(clip_size);
  clip.width = static_cast<std::uint32_t>(clip_size);
  clip.channels = 3;
  clip.pixels.assign(static_cast<std::size_t>(clip.frames) * clip.height *
                         clip.width * clip.channels,
                     12);
  const double s = clip_size / 224.0;

  for (std::uint32_t t = 0; t < clip.frames; ++t) {
    // Court outline and net line.
    fill_rect(clip, t, 30 * s, 20 * s, 194 * s, 21 * s, 70);
    fill_rect(clip, t, 30 * s, 203 * s, 194 * s, 204 * s, 70);
    fill_rect(clip, t, 30 * s, 20 * s, 31 * s, 204 * s, 70);
    fill_rect(clip, t, 193 * s, 20 * s, 194 * s, 204 * s, 70);
    fill_rect(clip, t, 30 * s, 111 * s, 194 * s, 113 * s, 90);

    const FrameModalities* fm = track.find(window[t]);
    if (!fm) continue;
    if (fm->far) {
      const BBox& b = fm->far->bbox;
      fill_rect(clip, t, b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s, 100);
    }
    if (fm->near) {
      const BBox& b = fm->near->bbox;
      fill_rect(clip, t, b.x1 * s, b.y1 * s, b.x2 * s, b.y2 * s, 130);
    }
    if (fm->shuttle) {
      fill_disc(clip, t, fm->shuttle->x * s, fm->shuttle->y * s, 4.0 * s, 255);
    }
  }
  return clip;
}

Corpus synth_generate(const SynthOptions& opts, const std::string& out_dir) {
  if (opts.samples < 1) throw InvalidParameter("synth_generate: samples must be >= 1");
  if (opts.hits_per_rally < 1 || opts.rallies_per_match < 1)
    throw InvalidParameter("synth_generate: corpus shape parameters must be >= 1");

  Rng rng(opts.seed);
  Corpus corpus;

  const int hits_per_match = opts.hits_per_rally * opts.rallies_per_match;
  const int n_matches = (opts.samples + hits_per_match - 1) / hits_per_match;
  int remaining = opts.samples;
  int global_hit = 0;

  const double fps = 30.0;
  const int hit_gap = 18;

  for (int mi = 0; mi < n_matches; ++mi) {
    MatchRecord match;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_m%03d", mi);
    match.match_id = buf;
    match.discipline = Discipline::singles;
    match.fps = fps;

    std::int64_t cursor = 60;
    int rallies_here =
        std::min(opts.rallies_per_match,
                 (remaining + opts.hits_per_rally - 1) / opts.hits_per_rally);

    for (int ri = 0; ri < rallies_here; ++ri) {
      int hits_here = std::min(opts.hits_per_rally, remaining);
      remaining -= hits_here;

      RallyRecord rally;
      std::snprintf(buf, sizeof(buf), "r%03d", ri);
      rally.rally_id = buf;

      Segment seg;
      seg.kind = SegmentKind::rally;
      seg.start_frame = cursor;
      seg.end_frame = cursor + 5 + (hits_here - 1) * hit_gap + 12 + 18;

      ModalityTrack track;
      track.rally_id = rally.rally_id;

      // Player drift parameters for this rally.
      const double near_x = rng.uniform(90.0, 134.0);
      const double far_x = rng.uniform(94.0, 130.0);
      const double near_phase = rng.uniform(0.0, 6.28);
      const double far_phase = rng.uniform(0.0, 6.28);

      struct ShotPlan {
        std::int64_t frame;
        ShotType type;
        double x0, x1;
      };
      std::vector<ShotPlan> plan;
      for (int hi = 0; hi < hits_here; ++hi) {
        ShotPlan sp;
        sp.frame = cursor + 5 + hi * hit_gap;
        sp.type = opts.uniform_shot_types
                      ? static_cast<ShotType>(global_hit % kNumShotTypes)
                      : static_cast<ShotType>(rng.next_below(kNumShotTypes));
        sp.x0 = rng.uniform(60.0, 164.0);
        sp.x1 = rng.uniform(60.0, 164.0);
        ++global_hit;

        HitEvent hit;
        hit.frame = sp.frame;
        hit.player_slot = hi % 2 == 0 ? PlayerSlot::near : PlayerSlot::far;
        hit.shot.shot_type = sp.type;
        hit.shot.caption = make_caption(sp.type, rng);
        rally.hits.push_back(std::move(hit));
        plan.push_back(sp);
      }

      if (rng.next_double() < 0.2) {
        rally.net_hits.push_back(plan.back().frame + 3);
      }
      rally.landings.push_back(seg.end_frame - 3);
      rally.winner_side = rng.next_double() < 0.5 ? "near" : "far";

      // Dense per-frame modalities for the whole rally segment. The shuttle
      // follows the most recent hit's profile; a few pre-rally frames may
      // drop the shuttle detection to exercise missing masks.
      for (std::int64_t f = seg.start_frame; f <= seg.end_frame; ++f) {
        FrameModalities fm;
        fm.frame = f;
        const double t = static_cast<double>(f - seg.start_frame);
        fm.near = make_player_frame(
            player_geom(PlayerSlot::near, near_x, near_phase, t), opts.pose_points,
            rng);
        fm.far = make_player_frame(player_geom(PlayerSlot::far, far_x, far_phase, t),
                                   opts.pose_points, rng);

        // Locate the governing hit for this frame.
        int cur = -1;
        for (std::size_t k = 0; k < plan.size(); ++k) {
          if (f >= plan[k].frame) cur = static_cast<int>(k);
        }
        if (cur < 0) {
          // Before the first hit: shuttle hovers near the first start point,
          // occasionally missing.
          if (rng.next_double() >= 0.15) {
            fm.shuttle = Point{plan[0].x0 + rng.uniform(-2.0, 2.0),
                               shuttle_point(plan[0].type, 0.0, plan[0].x0,
                                             plan[0].x1)
                                   .y};
          }
        } else {
          const ShotPlan& sp = plan[static_cast<std::size_t>(cur)];
          const double u =
              std::min(1.0, static_cast<double>(f - sp.frame) / kPostHitFrames);
          TrackPoint pt = shuttle_point(sp.type, u, sp.x0, sp.x1);
          fm.shuttle = Point{pt.x, pt.y};
        }
        track.frames.push_back(std::move(fm));
      }

      corpus.tracks[match.match_id + "/" + rally.rally_id] = std::move(track);
      match.segments.push_back(seg);
      match.rallies.push_back(std::move(rally));
      cursor = seg.end_frame + 30;

      // Occasional broadcast interruption.
      if (ri % 3 == 2) {
        Segment rep;
        rep.kind = ri % 6 == 5 ? SegmentKind::hawkeye : SegmentKind::replay;
        rep.start_frame = cursor;
        rep.end_frame = cursor + 40;
        match.segments.push_back(rep);
        cursor = rep.end_frame + 20;
      }
    }
    match.total_frames = cursor + 60;
    corpus.matches.push_back(std::move(match));
  }

  if (!out_dir.empty()) {
    save_corpus(corpus, (fs::path(out_dir) / "annotations").string(),
                (fs::path(out_dir) / "modalities").string());
    if (opts.write_clips) {
      corpus.clips_dir = (fs::path(out_dir) / "clips").string();
      for (const auto& m : corpus.matches) {
        auto segs = m.rally_segments();
        for (std::size_t ri = 0; ri < m.rallies.size(); ++ri) {
          const auto& rally = m.rallies[ri];
          const auto& track = corpus.tracks.at(m.match_id + "/" + rally.rally_id);
          for (std::size_t hi = 0; hi < rally.hits.size(); ++hi) {
            auto window = clip_window(rally.hits[hi].frame, segs[ri]->start_frame,
                                      segs[ri]->end_frame);
            ClipTensor clip = render_clip(track, window, opts.clip_size);
            fs::path path =
                fs::path(corpus.clips_dir) /
                clip_relative_path(m.match_id, rally.rally_id, static_cast<int>(hi));
            fs::create_directories(path.parent_path());
            write_clip(path.string(), clip);
          }
        }
      }
    }
  }
  return corpus;
}

}  // namespace bfmd
