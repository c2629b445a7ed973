// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic corpus generator for desk-scale experiments.
// Every shot gets a parametric shuttle trajectory driven by its shot type
// (a smash descends steeply, a clear arcs high, a drive stays flat, ...),
// smoothly drifting player boxes with pose keypoints, a rendered 224x224
// clip of the resulting geometry, and a template-grammar caption whose
// wording is consistent with the derived semantic target.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bfmd/clip_io.hpp"
#include "bfmd/corpus.hpp"

namespace bfmd {

struct SynthOptions {
  std::uint64_t seed = 7;
  int samples = 32;
  int hits_per_rally = 8;
  int rallies_per_match = 6;
  // Round-robin over the 12 shot types (exactly uniform up to remainder)
  // instead of sampling them.
  bool uniform_shot_types = true;
  int clip_size = 224;
  int pose_points = kDefaultPosePoints;
  bool write_clips = true;
};

// Generates annotations + modality tracks in memory and, when
// opts.write_clips is set, writes the full corpus under out_dir:
//   out_dir/annotations, out_dir/modalities, out_dir/clips
// The result is identical for identical options.
Corpus synth_generate(const SynthOptions& opts, const std::string& out_dir);

// Caption template grammar, exposed so tests can enumerate it.
struct ShotGrammar {
  const char* noun;                      // e.g. "net shot"
  std::vector<const char*> trajectory;   // adjective phrase pool
  std::vector<const char*> region;       // destination phrase pool
  std::vector<const char*> intent;       // optional trailing clause pool
};

const std::array<ShotGrammar, kNumShotTypes>& shot_grammars();
const std::vector<const char*>& synth_verbs();

// Probability that a caption carries an intent clause.
inline constexpr double kIntentClauseProbability = 0.5;

// Renders one clip frame sequence for a window of a rally's modality track.
ClipTensor render_clip(const ModalityTrack& track,
                       const std::array<std::int64_t, kClipFrames>& window,
                       int clip_size);

}  // namespace bfmd
