// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// The captioning network: tubelet-patchify video backbone (pluggable,
// randomly initialized stand-in with the same token contract as a pretrained
// encoder), single-block token refiner, modality MLPs + self/cross-attention
// fusion scaled by alpha, transformer caption decoder, semantic head with
// learnable feedback strength beta, and the joint loss
// L_total = L_cap + lambda * L_sf.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfmd/autograd.hpp"
#include "bfmd/clip_io.hpp"
#include "bfmd/pipeline.hpp"
#include "bfmd/rng.hpp"

namespace bfmd {

inline constexpr int kSemanticDim = SemanticVector::kDim;  // K = 22

struct ModelConfig {
  long embed_dim = 256;  // D
  long heads = 8;
  long decoder_layers = 6;
  long refiner_layers = 1;
  long backbone_blocks = 2;  // stand-in encoder depth
  double alpha = 0.2;        // fusion strength
  double lambda_sf = 0.1;    // semantic loss weight
  double beta_init = 0.1;    // semantic feedback strength (learnable)
  long max_len = 120;        // caption token cap
  long frames = kClipFrames; // T
  long tubelet = 2;          // t_p
  long patch = 16;           // p
  long input_size = 224;     // Hin = Win
  long pose_points = kDefaultPosePoints;
  long ffn_mult = 4;
  long vocab_size = 0;
  bool use_refiner = true;
  bool use_sf = true;
  bool sf_at_inference = true;
  bool freeze_backbone = true;  // all but the last two blocks
  std::uint64_t init_seed = 0;

  long tokens_per_frame_axis() const { return frames / tubelet; }
  long tokens_per_row_axis() const { return input_size / patch; }
  long visual_tokens() const {  // N
    return tokens_per_frame_axis() * tokens_per_row_axis() * tokens_per_row_axis();
  }
  long patch_dim() const { return tubelet * patch * patch * 3; }
  long modality_tokens() const { return 3 * frames; }
  long pose_dim() const { return 2 * pose_points * 2; }

  void validate() const;

  json to_json() const;
  static ModelConfig from_json(const json& j);
};

template <class S>
struct Parameter {
  std::string name;
  nn::Ref<S> node;
  bool trainable = true;
};

// Scalar-typed inputs for one forward pass.
template <class S>
struct ModelInput {
  long batch = 0;
  // Either raw patchified pixels [B*N, patch_dim] or a precomputed frozen
  // prefix [B, N, D] (patchify + positional) when `embedded` is set.
  nn::Tens<S> patches;
  bool embedded = false;

  nn::Tens<S> positions;  // [B, T, 4]
  nn::Tens<S> poses;      // [B, T, pose_dim]
  nn::Tens<S> shuttles;   // [B, T, 2]
  nn::Tens<std::uint8_t> modality_mask;  // [B, 3T]

  long caption_len = 0;               // L (decoder input positions)
  std::vector<int> tokens;            // B*L decoder input ids
  std::vector<std::uint8_t> token_valid;   // B*L non-pad input positions
  std::vector<int> targets;           // B*L shifted targets
  std::vector<std::uint8_t> target_valid;  // B*L

  nn::Tens<S> semantic_targets;  // [B, K]
};

template <class S>
struct ForwardResult {
  nn::Ref<S> visual;      // backbone token grid
  nn::Ref<S> refined;     // after token refiner (== visual when disabled)
  nn::Ref<S> fused;       // after multimodal fusion
  nn::Ref<S> hidden;      // decoder states before semantic feedback
  nn::Ref<S> logits_pre_sf;  // vocabulary logits from `hidden`
  nn::Ref<S> sem_logits;  // [B,K], null when SF disabled
  nn::Ref<S> sem_probs;   // sigmoid(sem_logits)
  nn::Ref<S> hidden_sf;   // states after feedback (== hidden when disabled)
  nn::Ref<S> logits;      // vocabulary logits used for the caption loss
  nn::Ref<S> loss_cap;
  nn::Ref<S> loss_sf;     // zero-valued constant when SF disabled
  nn::Ref<S> loss_total;
  // Attention probability tensors (row-stochastic), for probes.
  std::vector<nn::Ref<S>> attention_probs;
};

template <class S>
class CaptionModel {
 public:
  explicit CaptionModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  std::vector<Parameter<S>>& parameters() { return params_; }
  const std::vector<Parameter<S>>& parameters() const { return params_; }
  nn::Ref<S> parameter(const std::string& name) const;
  double beta() const;

  // Input assembly. Clips are patchified and scaled to [0,1]; coordinates
  // are normalized by the configured input size.
  ModelInput<S> make_input(std::span<const ShotSample* const> samples,
                           std::span<const ClipTensor* const> clips,
                           bool with_captions) const;

  // Same, but with precomputed frozen prefixes instead of raw clips.
  ModelInput<S> make_input_embedded(std::span<const ShotSample* const> samples,
                                    std::span<const nn::Tens<S>* const> prefixes,
                                    bool with_captions) const;

  // Patchify + embed + positional for one clip without building a graph;
  // valid as `patches`+`embedded` input whenever those tensors are frozen.
  nn::Tens<S> frozen_prefix(const ClipTensor& clip) const;
  bool backbone_prefix_frozen() const { return config_.freeze_backbone; }

  nn::Ref<S> encode_video(const ModelInput<S>& in,
                          ForwardResult<S>* probes = nullptr) const;
  nn::Ref<S> refine_tokens(nn::Ref<S> grid, ForwardResult<S>* probes = nullptr) const;
  std::pair<nn::Ref<S>, nn::Tens<std::uint8_t>> embed_modalities(
      const ModelInput<S>& in) const;
  nn::Ref<S> fuse(nn::Ref<S> refined, nn::Ref<S> modal,
                  const nn::Tens<std::uint8_t>& modal_mask,
                  ForwardResult<S>* probes = nullptr) const;
  nn::Ref<S> decode(nn::Ref<S> fused, const std::vector<int>& tokens, long batch,
                    long caption_len, ForwardResult<S>* probes = nullptr) const;
  nn::Ref<S> vocab_logits(nn::Ref<S> hidden) const;

  struct Feedback {
    nn::Ref<S> pooled;      // z
    nn::Ref<S> sem_logits;  // S
    nn::Ref<S> sem_probs;   // P
    nn::Ref<S> hidden_sf;   // H'
  };
  Feedback semantic_feedback(nn::Ref<S> hidden,
                             const std::vector<std::uint8_t>& token_valid) const;

  ForwardResult<S> forward(const ModelInput<S>& in, bool with_losses) const;

  // Greedy decoding from a fused token grid ([1,N,D] value). Returns BOS ...
  // (EOS) ids, capped at max_len tokens total.
  std::vector<int> generate(const nn::Tens<S>& fused_value, int max_len) const;

  // Runs the visual/fusion half for one sample and returns the fused grid value.
  nn::Tens<S> encode_for_generation(const ModelInput<S>& in) const;

  // Deterministic parameter snapshot / restore by name.
  std::map<std::string, nn::Tens<S>> state() const;
  void load_state(const std::map<std::string, nn::Tens<S>>& state);

 private:
  struct Attn {
    nn::Ref<S> wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Ln {
    nn::Ref<S> gain, bias;
  };
  struct Ffn {
    nn::Ref<S> w1, b1, w2, b2;
  };
  struct EncoderBlock {
    Attn attn;
    Ln ln1;
    Ffn ffn;
    Ln ln2;
  };
  struct DecoderLayer {
    Attn self_attn;
    Ln ln1;
    Attn cross_attn;
    Ln ln2;
    Ffn ffn;
    Ln ln3;
  };
  struct Mlp2 {
    nn::Ref<S> w1, b1, w2, b2;
  };

  nn::Ref<S> add_param(const std::string& name, nn::Tens<S> init, bool trainable);
  void fill_input_common(ModelInput<S>& in,
                         std::span<const ShotSample* const> samples,
                         bool with_captions) const;
  Attn make_attn(const std::string& prefix, long kv_dim, bool trainable);
  Ln make_ln(const std::string& prefix, bool trainable);
  Ffn make_ffn(const std::string& prefix, bool trainable);
  Mlp2 make_mlp2(const std::string& prefix, long in_dim);
  nn::Tens<S> trunc_normal(nn::Shape shape, double stddev);

  enum class AttnMaskMode { none, causal, key };
  nn::Ref<S> attention(const Attn& p, nn::Ref<S> queries, nn::Ref<S> keys_values,
                       AttnMaskMode mode, const nn::Tens<std::uint8_t>* key_mask,
                       ForwardResult<S>* probes) const;

  ModelConfig config_;
  std::vector<Parameter<S>> params_;
  std::map<std::string, std::size_t> param_index_;
  mutable Rng* init_rng_ = nullptr;  // only set during construction

  struct RefinerBlock {
    Attn attn;
    Ln ln;
  };

  // backbone
  nn::Ref<S> patch_w_, patch_b_, vis_pos_;
  std::vector<EncoderBlock> backbone_;
  // refiner: MHSA + residual + LayerNorm per block
  std::vector<RefinerBlock> refiner_;
  // modalities + fusion
  Mlp2 mlp_pos_, mlp_pose_, mlp_shuttle_;
  nn::Ref<S> modal_pos_;
  Attn fusion_self_;
  Attn fusion_cross_;
  // decoder
  nn::Ref<S> tok_emb_, dec_pos_;
  std::vector<DecoderLayer> decoder_;
  nn::Ref<S> vocab_w_, vocab_b_;
  // semantic feedback head
  nn::Ref<S> sf_ws_, sf_w1_, sf_w2_, sf_beta_;
};

using CaptionModelF = CaptionModel<float>;
using CaptionModelD = CaptionModel<double>;

}  // namespace bfmd
