// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bfmd/rng.hpp"
#include "bfmd/text.hpp"

namespace bfmd {

Point position_from_bbox(const BBox& box) {
  if (box.x1 > box.x2 || box.y1 > box.y2)
    throw DegenerateBox("position_from_bbox: inverted box");
  return {(box.x1 + box.x2) / 2.0, box.y2};
}

const FrameModalities* ModalityTrack::find(std::int64_t frame) const {
  auto it = std::lower_bound(
      frames.begin(), frames.end(), frame,
      [](const FrameModalities& f, std::int64_t v) { return f.frame < v; });
  if (it == frames.end() || it->frame != frame) return nullptr;
  return &*it;
}

namespace {

json player_to_json(const PlayerFrame& p) {
  json pose = json::array();
  for (const auto& pt : p.pose) pose.push_back({pt.x, pt.y});
  return {{"bbox", {p.bbox.x1, p.bbox.y1, p.bbox.x2, p.bbox.y2}}, {"pose", pose}};
}

PlayerFrame player_from_json(const json& j, const std::string& path) {
  PlayerFrame p;
  const json& b = j.at("bbox");
  if (!b.is_array() || b.size() != 4)
    throw SchemaViolation(path + "/bbox", "expected [x1,y1,x2,y2]");
  p.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
            b[3].get<double>()};
  if (auto it = j.find("pose"); it != j.end() && !it->is_null()) {
    for (const auto& pt : *it) {
      if (!pt.is_array() || pt.size() != 2)
        throw SchemaViolation(path + "/pose", "expected [x,y] pairs");
      p.pose.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
  }
  return p;
}

}  // namespace

ModalityTrack modality_from_json(const json& j) {
  ModalityTrack t;
  t.rally_id = j.at("rally_id").get<std::string>();
  const json& frames = j.at("frames");
  if (!frames.is_array()) throw SchemaViolation("/frames", "expected an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& f = frames[i];
    const std::string path = "/frames/" + std::to_string(i);
    FrameModalities fm;
    fm.frame = f.at("frame").get<std::int64_t>();
    if (auto it = f.find("players"); it != f.end() && !it->is_null()) {
      if (auto np = it->find("near"); np != it->end() && !np->is_null())
        fm.near = player_from_json(*np, path + "/players/near");
      if (auto fp = it->find("far"); fp != it->end() && !fp->is_null())
        fm.far = player_from_json(*fp, path + "/players/far");
    }
    if (auto it = f.find("shuttle"); it != f.end() && !it->is_null()) {
      if (!it->is_array() || it->size() != 2)
        throw SchemaViolation(path + "/shuttle", "expected [x,y] or null");
      fm.shuttle = Point{(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
    t.frames.push_back(std::move(fm));
  }
  std::sort(t.frames.begin(), t.frames.end(),
            [](const FrameModalities& a, const FrameModalities& b) {
              return a.frame < b.frame;
            });
  return t;
}

json modality_to_json(const ModalityTrack& t) {
  json frames = json::array();
  for (const auto& f : t.frames) {
    json players = json::object();
    if (f.near) players["near"] = player_to_json(*f.near);
    if (f.far) players["far"] = player_to_json(*f.far);
    json entry = {{"frame", f.frame}, {"players", players}};
    entry["shuttle"] = f.shuttle ? json({f.shuttle->x, f.shuttle->y}) : json();
    frames.push_back(std::move(entry));
  }
  return {{"rally_id", t.rally_id}, {"frames", frames}};
}

std::array<std::int64_t, kClipFrames> clip_window(std::int64_t hit_frame,
                                                  std::int64_t segment_start,
                                                  std::int64_t segment_end) {
  std::array<std::int64_t, kClipFrames> out{};
  for (int i = 0; i < kClipFrames; ++i) {
    std::int64_t f = hit_frame - kPreHitFrames + i;
    out[i] = std::clamp(f, segment_start, segment_end);
  }
  return out;
}

// --- Vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary() {
  insert("<pad>");
  insert("<bos>");
  insert("<eos>");
  insert("<unk>");
}

void Vocabulary::insert(const std::string& token) {
  if (token_to_id_.contains(token)) return;
  token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

Vocabulary Vocabulary::build(std::span<const std::string> captions, int min_count) {
  // Count, then insert in (count desc, token asc) order so ids are stable
  // regardless of caption order.
  std::map<std::string, std::int64_t> counts;
  for (const auto& caption : captions) {
    for (const auto& tok : tokenize_text(caption)) counts[tok] += 1;
  }
  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(),
                                                           counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, count] : ranked) {
    if (count >= min_count) v.insert(tok);
  }
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) return id_to_token_[kUnk];
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.contains(token);
}

std::vector<int> Vocabulary::encode(const std::string& caption) const {
  std::vector<int> ids;
  ids.push_back(kBos);
  for (const auto& tok : tokenize_text(caption)) ids.push_back(id(tok));
  ids.push_back(kEos);
  return ids;
}

std::vector<std::string> Vocabulary::surface(std::span<const int> ids) const {
  std::vector<std::string> toks;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    toks.push_back(token(i));
  }
  return toks;
}

std::string Vocabulary::decode(std::span<const int> ids) const {
  return detokenize_text(surface(ids));
}

json Vocabulary::to_json() const {
  return {{"tokens", id_to_token_}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  Vocabulary v;
  const auto& tokens = j.at("tokens");
  for (std::size_t i = 4; i < tokens.size(); ++i)
    v.insert(tokens[i].get<std::string>());
  return v;
}

// --- Sample construction ----------------------------------------------------

ShotSample build_sample(const MatchRecord& match, std::size_t rally_index,
                        std::size_t hit_index, const ModalityTrack& track,
                        const std::string& clip_path, const Vocabulary& vocab,
                        const SemanticLexicon& lexicon, int max_tokens) {
  if (rally_index >= match.rallies.size())
    throw InvalidParameter("build_sample: rally index out of range");
  const RallyRecord& rally = match.rallies[rally_index];
  if (hit_index >= rally.hits.size())
    throw InvalidParameter("build_sample: hit index out of range");
  const HitEvent& hit = rally.hits[hit_index];

  auto rally_segs = match.rally_segments();
  if (rally_index >= rally_segs.size())
    throw InvalidParameter("build_sample: no rally segment for rally " +
                           rally.rally_id);
  const Segment& seg = *rally_segs[rally_index];

  ShotSample s;
  s.match_id = match.match_id;
  s.rally_id = rally.rally_id;
  s.hit_index = static_cast<int>(hit_index);
  s.shot_type = hit.shot.shot_type;
  s.frame_window = clip_window(hit.frame, seg.start_frame, seg.end_frame);
  s.clip_path = clip_path;
  s.caption = hit.shot.caption;

  s.caption_tokens = vocab.encode(hit.shot.caption);
  if (static_cast<int>(s.caption_tokens.size()) > max_tokens)
    throw SequenceTooLong("build_sample: caption of " +
                          std::to_string(s.caption_tokens.size()) +
                          " tokens exceeds the cap of " + std::to_string(max_tokens));

  s.semantic_target = hit.shot.semantic_target
                          ? *hit.shot.semantic_target
                          : derive_semantic_vector(hit.shot, lexicon);

  ModalityWindow& w = s.modalities;
  int pose_points = kDefaultPosePoints;
  for (const auto& f : track.frames) {
    if (f.near && !f.near->pose.empty()) {
      pose_points = static_cast<int>(f.near->pose.size());
      break;
    }
  }
  w.pose_points = pose_points;
  w.pose.assign(static_cast<std::size_t>(kClipFrames) * 2 * pose_points * 2, 0.0);

  int missing_near = 0, missing_far = 0;
  for (int i = 0; i < kClipFrames; ++i) {
    const FrameModalities* fm = track.find(s.frame_window[i]);
    const PlayerFrame* near = fm && fm->near ? &*fm->near : nullptr;
    const PlayerFrame* far = fm && fm->far ? &*fm->far : nullptr;
    if (!near) ++missing_near;
    if (!far) ++missing_far;

    if (near && far) {
      Point np = position_from_bbox(near->bbox);
      Point fp = position_from_bbox(far->bbox);
      w.position[i] = {np.x, np.y, fp.x, fp.y};
      w.players_present[i] = true;
      auto write_pose = [&](const PlayerFrame& p, int slot) {
        const std::size_t base =
            (static_cast<std::size_t>(i) * 2 + slot) * pose_points * 2;
        const std::size_t n =
            std::min<std::size_t>(p.pose.size(), static_cast<std::size_t>(pose_points));
        for (std::size_t k = 0; k < n; ++k) {
          w.pose[base + 2 * k] = p.pose[k].x;
          w.pose[base + 2 * k + 1] = p.pose[k].y;
        }
      };
      write_pose(*near, 0);
      write_pose(*far, 1);
    }
    if (fm && fm->shuttle) {
      w.shuttle[i] = {fm->shuttle->x, fm->shuttle->y};
      w.shuttle_present[i] = true;
    }
  }

  const int gap_threshold = kClipFrames / 2;  // > 8 of 16 missing is a gap
  if (missing_near > gap_threshold || missing_far > gap_threshold)
    throw ModalityGap("build_sample: player bbox missing on " +
                      std::to_string(std::max(missing_near, missing_far)) + " of " +
                      std::to_string(kClipFrames) + " frames in rally " +
                      rally.rally_id);
  return s;
}

// --- Splitting ----------------------------------------------------------------

DatasetSplit split_dataset(std::span<const ShotSample> samples,
                           std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw InvalidRatios("split_dataset: ratios must be non-negative and sum to 1");

  // Group sample indices by rally, keyed in first-appearance order.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  std::map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::string key = samples[i].match_id + "/" + samples[i].rally_id;
    auto [it, inserted] = group_of.emplace(key, groups.size());
    if (inserted) groups.push_back({key, {}});
    groups[it->second].second.push_back(i);
  }

  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n = static_cast<double>(groups.size());
  const auto c1 = static_cast<std::size_t>(std::llround(n * ratios[0]));
  const auto c2 = static_cast<std::size_t>(std::llround(n * (ratios[0] + ratios[1])));

  DatasetSplit split;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    auto& dest = rank < c1 ? split.train : (rank < c2 ? split.val : split.test);
    for (std::size_t idx : groups[order[rank]].second) dest.push_back(idx);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace bfmd
