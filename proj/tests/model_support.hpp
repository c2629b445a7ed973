// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "bfmd/model.hpp"
#include "bfmd/rng.hpp"

namespace bfmd::test {

// D=8, 2 heads, 1 decoder layer, V=11, N=4 visual tokens, 3T=6 modality
// tokens; nothing frozen so every parameter is exercised.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.embed_dim = 8;
  c.heads = 2;
  c.decoder_layers = 1;
  c.backbone_blocks = 2;
  c.refiner_layers = 1;
  c.frames = 2;
  c.tubelet = 2;
  c.input_size = 8;
  c.patch = 4;  // N = 1 * 2 * 2 = 4
  c.pose_points = 2;
  c.ffn_mult = 2;
  c.vocab_size = 11;
  c.max_len = 8;
  c.freeze_backbone = false;
  c.init_seed = 5;
  return c;
}

// Random but structured batch: row 0 uses the full caption length, row 1 is
// shorter so padding paths run; a few modality rows are masked.
template <class S>
ModelInput<S> random_input(const ModelConfig& cfg, long batch, long caption_len,
                           std::uint64_t seed) {
  Rng rng(seed);
  ModelInput<S> in;
  in.batch = batch;
  in.patches = nn::Tens<S>({batch * cfg.visual_tokens(), cfg.patch_dim()});
  for (auto& v : in.patches.data) v = static_cast<S>(rng.next_double());

  const long t = cfg.frames;
  in.positions = nn::Tens<S>({batch, t, 4});
  in.poses = nn::Tens<S>({batch, t, cfg.pose_dim()});
  in.shuttles = nn::Tens<S>({batch, t, 2});
  for (auto& v : in.positions.data) v = static_cast<S>(rng.uniform(0.0, 1.0));
  for (auto& v : in.poses.data) v = static_cast<S>(rng.uniform(0.0, 1.0));
  for (auto& v : in.shuttles.data) v = static_cast<S>(rng.uniform(0.0, 1.0));
  in.modality_mask = nn::Tens<std::uint8_t>({batch, 3 * t});
  for (auto& m : in.modality_mask.data) m = 1;
  // mask one shuttle row per sample
  for (long b = 0; b < batch; ++b)
    in.modality_mask.data[static_cast<std::size_t>(b * 3 * t + 2 * t)] = 0;

  in.caption_len = caption_len;
  in.tokens.assign(static_cast<std::size_t>(batch * caption_len), Vocabulary::kPad);
  in.targets.assign(static_cast<std::size_t>(batch * caption_len), Vocabulary::kPad);
  in.token_valid.assign(static_cast<std::size_t>(batch * caption_len), 0);
  in.target_valid.assign(static_cast<std::size_t>(batch * caption_len), 0);
  for (long b = 0; b < batch; ++b) {
    const long len = b == 0 ? caption_len : std::max<long>(2, caption_len - 2);
    for (long i = 0; i < len; ++i) {
      const auto at = static_cast<std::size_t>(b * caption_len + i);
      in.tokens[at] = i == 0 ? Vocabulary::kBos
                             : 4 + static_cast<int>(rng.next_below(
                                       static_cast<std::uint64_t>(cfg.vocab_size - 4)));
      in.targets[at] =
          i == len - 1 ? Vocabulary::kEos
                       : 4 + static_cast<int>(rng.next_below(
                                 static_cast<std::uint64_t>(cfg.vocab_size - 4)));
      in.token_valid[at] = 1;
      in.target_valid[at] = 1;
    }
  }

  in.semantic_targets = nn::Tens<S>({batch, kSemanticDim});
  for (auto& v : in.semantic_targets.data)
    v = static_cast<S>(rng.next_below(2));
  return in;
}

}  // namespace bfmd::test
