// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Turns annotations + precomputed modality sidecars into model-ready shot
// samples: 16-frame clip windows around each hit, per-frame player/shuttle
// features with explicit missing masks, tokenized captions, rally-granular
// dataset splits.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "bfmd/annotation.hpp"
#include "bfmd/semantics.hpp"

namespace bfmd {

inline constexpr int kClipFrames = 16;   // 3 pre-hit + the hit + 12 post-hit
inline constexpr int kPreHitFrames = 3;
inline constexpr int kPostHitFrames = 12;
inline constexpr int kDefaultPosePoints = 17;
inline constexpr int kMaxCaptionTokens = 120;

struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  bool operator==(const BBox&) const = default;
};

struct Point {
  double x = 0, y = 0;

  bool operator==(const Point&) const = default;
};

// Center of the bounding box's bottom edge. Throws DegenerateBox when
// x1 > x2 or y1 > y2 (zero-area boxes are fine).
Point position_from_bbox(const BBox& box);

struct PlayerFrame {
  BBox bbox;
  std::vector<Point> pose;  // keypoints, pixel coordinates

  bool operator==(const PlayerFrame&) const = default;
};

struct FrameModalities {
  std::int64_t frame = 0;
  std::optional<PlayerFrame> near;
  std::optional<PlayerFrame> far;
  std::optional<Point> shuttle;  // absent = detection missing, never zero

  bool operator==(const FrameModalities&) const = default;
};

struct ModalityTrack {
  std::string rally_id;
  std::vector<FrameModalities> frames;  // sorted by frame index

  const FrameModalities* find(std::int64_t frame) const;
};

ModalityTrack modality_from_json(const json& j);
json modality_to_json(const ModalityTrack& t);

// Window of 16 frame indices [hit-3 .. hit+12], clamped to the inclusive
// segment bounds (edge frames repeat).
std::array<std::int64_t, kClipFrames> clip_window(std::int64_t hit_frame,
                                                  std::int64_t segment_start,
                                                  std::int64_t segment_end);

// Token vocabulary with reserved ids 0..3 for PAD/BOS/EOS/UNK. Entries are
// lowercased by the surface tokenizer except bracketed specials such as
// "[PLAYER]".
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary();

  static Vocabulary build(std::span<const std::string> captions, int min_count = 1);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;

  // BOS + token ids + EOS. OOV tokens map to UNK.
  std::vector<int> encode(const std::string& caption) const;
  // Inverse up to casing/whitespace normalization; PAD/BOS/EOS are dropped,
  // UNK surfaces as its reserved form.
  std::string decode(std::span<const int> ids) const;

  // Surface tokens for the ids (specials dropped) — the form shared with the
  // metric suite.
  std::vector<std::string> surface(std::span<const int> ids) const;

  json to_json() const;
  static Vocabulary from_json(const json& j);

 private:
  void insert(const std::string& token);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

struct ModalityWindow {
  int pose_points = kDefaultPosePoints;
  // Per window frame: near(x,y), far(x,y) bottom-center court positions.
  std::array<std::array<double, 4>, kClipFrames> position{};
  // Per window frame: both players' keypoints, near then far, (x,y) pairs.
  std::vector<double> pose;  // kClipFrames * 2 * pose_points * 2
  std::array<std::array<double, 2>, kClipFrames> shuttle{};
  std::array<bool, kClipFrames> players_present{};
  std::array<bool, kClipFrames> shuttle_present{};
};

struct ShotSample {
  std::string match_id;
  std::string rally_id;
  int hit_index = 0;
  ShotType shot_type = ShotType::serve;
  std::array<std::int64_t, kClipFrames> frame_window{};
  std::string clip_path;  // pixel tensor reference (clip container file)
  ModalityWindow modalities;
  std::vector<int> caption_tokens;  // BOS ... EOS, <= 120
  std::string caption;
  SemanticVector semantic_target;
};

// Builds one model-ready sample for `rally.hits[hit_index]`.
// Throws ModalityGap when a player's bbox is missing on more than 8 of the
// 16 window frames, SequenceTooLong when the tokenized caption exceeds
// max_tokens.
ShotSample build_sample(const MatchRecord& match, std::size_t rally_index,
                        std::size_t hit_index, const ModalityTrack& track,
                        const std::string& clip_path, const Vocabulary& vocab,
                        const SemanticLexicon& lexicon,
                        int max_tokens = kMaxCaptionTokens);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Deterministic rally-granular split: samples of one rally never straddle
// splits. Ratios must sum to 1 (1e-9 tolerance) and be non-negative.
DatasetSplit split_dataset(std::span<const ShotSample> samples,
                           std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace bfmd
