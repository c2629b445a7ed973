// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/model.hpp"

#include <algorithm>
#include <cmath>

namespace bfmd {

using nn::Ref;
using nn::Tens;

void ModelConfig::validate() const {
  if (embed_dim <= 0 || embed_dim % heads != 0)
    throw ShapeMismatch("config: embed_dim must be a positive multiple of heads");
  if (frames % tubelet != 0)
    throw ShapeMismatch("config: frames must be divisible by tubelet depth");
  if (input_size % patch != 0)
    throw ShapeMismatch("config: input size must be divisible by patch size");
  if (vocab_size < 5) throw ShapeMismatch("config: vocabulary not set");
  if (max_len < 2) throw ShapeMismatch("config: max_len too small");
  if (decoder_layers < 1 || backbone_blocks < 1 || refiner_layers < 1)
    throw ShapeMismatch("config: layer counts must be >= 1");
}

json ModelConfig::to_json() const {
  return {{"embed_dim", embed_dim},
          {"heads", heads},
          {"decoder_layers", decoder_layers},
          {"refiner_layers", refiner_layers},
          {"backbone_blocks", backbone_blocks},
          {"alpha", alpha},
          {"lambda_sf", lambda_sf},
          {"beta_init", beta_init},
          {"max_len", max_len},
          {"frames", frames},
          {"tubelet", tubelet},
          {"patch", patch},
          {"input_size", input_size},
          {"pose_points", pose_points},
          {"ffn_mult", ffn_mult},
          {"vocab_size", vocab_size},
          {"use_refiner", use_refiner},
          {"use_sf", use_sf},
          {"sf_at_inference", sf_at_inference},
          {"freeze_backbone", freeze_backbone},
          {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("embed_dim", c.embed_dim);
  get("heads", c.heads);
  get("decoder_layers", c.decoder_layers);
  get("refiner_layers", c.refiner_layers);
  get("backbone_blocks", c.backbone_blocks);
  get("alpha", c.alpha);
  get("lambda_sf", c.lambda_sf);
  get("beta_init", c.beta_init);
  get("max_len", c.max_len);
  get("frames", c.frames);
  get("tubelet", c.tubelet);
  get("patch", c.patch);
  get("input_size", c.input_size);
  get("pose_points", c.pose_points);
  get("ffn_mult", c.ffn_mult);
  get("vocab_size", c.vocab_size);
  get("use_refiner", c.use_refiner);
  get("use_sf", c.use_sf);
  get("sf_at_inference", c.sf_at_inference);
  get("freeze_backbone", c.freeze_backbone);
  get("init_seed", c.init_seed);
  return c;
}

// --- construction ------------------------------------------------------------

template <class S>
Tens<S> CaptionModel<S>::trunc_normal(nn::Shape shape, double stddev) {
  Tens<S> t(std::move(shape));
  for (auto& v : t.data) {
    double x;
    do {
      x = init_rng_->normal(0.0, stddev);
    } while (std::abs(x) > 2.0 * stddev);
    v = static_cast<S>(x);
  }
  return t;
}

template <class S>
Ref<S> CaptionModel<S>::add_param(const std::string& name, Tens<S> init,
                                  bool trainable) {
  auto node = nn::leaf(std::move(init), trainable, name);
  param_index_[name] = params_.size();
  params_.push_back({name, node, trainable});
  return node;
}

template <class S>
typename CaptionModel<S>::Attn CaptionModel<S>::make_attn(const std::string& prefix,
                                                          long kv_dim,
                                                          bool trainable) {
  const long d = config_.embed_dim;
  Attn a;
  a.wq = add_param(prefix + ".wq", trunc_normal({d, d}, 0.02), trainable);
  a.bq = add_param(prefix + ".bq", Tens<S>({d}), trainable);
  a.wk = add_param(prefix + ".wk", trunc_normal({kv_dim, d}, 0.02), trainable);
  a.bk = add_param(prefix + ".bk", Tens<S>({d}), trainable);
  a.wv = add_param(prefix + ".wv", trunc_normal({kv_dim, d}, 0.02), trainable);
  a.bv = add_param(prefix + ".bv", Tens<S>({d}), trainable);
  a.wo = add_param(prefix + ".wo", trunc_normal({d, d}, 0.02), trainable);
  a.bo = add_param(prefix + ".bo", Tens<S>({d}), trainable);
  return a;
}

template <class S>
typename CaptionModel<S>::Ln CaptionModel<S>::make_ln(const std::string& prefix,
                                                      bool trainable) {
  const long d = config_.embed_dim;
  Ln ln;
  Tens<S> ones({d});
  ones.fill(S(1));
  ln.gain = add_param(prefix + ".gain", std::move(ones), trainable);
  ln.bias = add_param(prefix + ".bias", Tens<S>({d}), trainable);
  return ln;
}

template <class S>
typename CaptionModel<S>::Ffn CaptionModel<S>::make_ffn(const std::string& prefix,
                                                        bool trainable) {
  const long d = config_.embed_dim;
  const long hidden = d * config_.ffn_mult;
  Ffn f;
  f.w1 = add_param(prefix + ".w1", trunc_normal({d, hidden}, 0.02), trainable);
  f.b1 = add_param(prefix + ".b1", Tens<S>({hidden}), trainable);
  f.w2 = add_param(prefix + ".w2", trunc_normal({hidden, d}, 0.02), trainable);
  f.b2 = add_param(prefix + ".b2", Tens<S>({d}), trainable);
  return f;
}

template <class S>
typename CaptionModel<S>::Mlp2 CaptionModel<S>::make_mlp2(const std::string& prefix,
                                                          long in_dim) {
  const long d = config_.embed_dim;
  Mlp2 m;
  m.w1 = add_param(prefix + ".w1", trunc_normal({in_dim, d}, 0.02), true);
  m.b1 = add_param(prefix + ".b1", Tens<S>({d}), true);
  m.w2 = add_param(prefix + ".w2", trunc_normal({d, d}, 0.02), true);
  m.b2 = add_param(prefix + ".b2", Tens<S>({d}), true);
  return m;
}

template <class S>
CaptionModel<S>::CaptionModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.init_seed ^ 0x5eed5eedULL);
  init_rng_ = &rng;
  const long d = config_.embed_dim;

  // Backbone: everything except the last two blocks follows the freeze policy.
  const bool embed_trainable = !config_.freeze_backbone;
  patch_w_ = add_param("backbone.patch.w",
                       trunc_normal({config_.patch_dim(), d}, 0.02), embed_trainable);
  patch_b_ = add_param("backbone.patch.b", Tens<S>({d}), embed_trainable);
  vis_pos_ = add_param("backbone.pos", trunc_normal({config_.visual_tokens(), d}, 0.02),
                       embed_trainable);
  for (long i = 0; i < config_.backbone_blocks; ++i) {
    const bool trainable =
        !config_.freeze_backbone || i >= config_.backbone_blocks - 2;
    const std::string prefix = "backbone.block" + std::to_string(i);
    EncoderBlock blk;
    blk.attn = make_attn(prefix + ".attn", d, trainable);
    blk.ln1 = make_ln(prefix + ".ln1", trainable);
    blk.ffn = make_ffn(prefix + ".ffn", trainable);
    blk.ln2 = make_ln(prefix + ".ln2", trainable);
    backbone_.push_back(std::move(blk));
  }

  for (long i = 0; i < config_.refiner_layers; ++i) {
    const std::string prefix = "refiner.block" + std::to_string(i);
    RefinerBlock blk;
    blk.attn = make_attn(prefix + ".attn", d, true);
    blk.ln = make_ln(prefix + ".ln", true);
    refiner_.push_back(std::move(blk));
  }

  mlp_pos_ = make_mlp2("modal.pos", 4);
  mlp_pose_ = make_mlp2("modal.pose", config_.pose_dim());
  mlp_shuttle_ = make_mlp2("modal.shuttle", 2);
  modal_pos_ = add_param("modal.pos_emb",
                         trunc_normal({config_.modality_tokens(), d}, 0.02), true);
  fusion_self_ = make_attn("fusion.self", d, true);
  fusion_cross_ = make_attn("fusion.cross", d, true);

  tok_emb_ = add_param("decoder.tok_emb",
                       trunc_normal({config_.vocab_size, d}, 0.02), true);
  dec_pos_ = add_param("decoder.pos", trunc_normal({config_.max_len, d}, 0.02), true);
  for (long i = 0; i < config_.decoder_layers; ++i) {
    const std::string prefix = "decoder.layer" + std::to_string(i);
    DecoderLayer layer;
    layer.self_attn = make_attn(prefix + ".self", d, true);
    layer.ln1 = make_ln(prefix + ".ln1", true);
    layer.cross_attn = make_attn(prefix + ".cross", d, true);
    layer.ln2 = make_ln(prefix + ".ln2", true);
    layer.ffn = make_ffn(prefix + ".ffn", true);
    layer.ln3 = make_ln(prefix + ".ln3", true);
    decoder_.push_back(std::move(layer));
  }
  vocab_w_ = add_param("decoder.vocab.w", trunc_normal({d, config_.vocab_size}, 0.02),
                       true);
  vocab_b_ = add_param("decoder.vocab.b", Tens<S>({config_.vocab_size}), true);

  sf_ws_ = add_param("sf.ws", trunc_normal({d, kSemanticDim}, 0.02), true);
  sf_w1_ = add_param("sf.w1", trunc_normal({kSemanticDim, d}, 0.02), true);
  sf_w2_ = add_param("sf.w2", trunc_normal({d, d}, 0.02), true);
  Tens<S> beta({1});
  beta.data[0] = static_cast<S>(config_.beta_init);
  sf_beta_ = add_param("sf.beta", std::move(beta), true);

  init_rng_ = nullptr;
}

template <class S>
Ref<S> CaptionModel<S>::parameter(const std::string& name) const {
  auto it = param_index_.find(name);
  if (it == param_index_.end()) throw Error("unknown parameter " + name);
  return params_[it->second].node;
}

template <class S>
double CaptionModel<S>::beta() const {
  return static_cast<double>(sf_beta_->value.data[0]);
}

// --- input assembly -------------------------------------------------------------

namespace {

template <class S>
void patchify_clip(const ModelConfig& cfg, const ClipTensor& clip, S* out) {
  if (clip.frames != static_cast<std::uint32_t>(cfg.frames) ||
      clip.height != static_cast<std::uint32_t>(cfg.input_size) ||
      clip.width != static_cast<std::uint32_t>(cfg.input_size) || clip.channels != 3)
    throw ShapeMismatch("clip dimensions do not match the model configuration");
  const long grid = cfg.tokens_per_row_axis();
  const long tp = cfg.tubelet, p = cfg.patch;
  long write = 0;
  for (long tt = 0; tt < cfg.tokens_per_frame_axis(); ++tt) {
    for (long gy = 0; gy < grid; ++gy) {
      for (long gx = 0; gx < grid; ++gx) {
        for (long dt = 0; dt < tp; ++dt) {
          const auto t = static_cast<std::uint32_t>(tt * tp + dt);
          for (long y = 0; y < p; ++y) {
            const auto yy = static_cast<std::uint32_t>(gy * p + y);
            for (long x = 0; x < p; ++x) {
              const auto xx = static_cast<std::uint32_t>(gx * p + x);
              for (std::uint32_t c = 0; c < 3; ++c)
                out[write++] = static_cast<S>(clip.at(t, yy, xx, c)) / S(255);
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class S>
ModelInput<S> CaptionModel<S>::make_input(std::span<const ShotSample* const> samples,
                                          std::span<const ClipTensor* const> clips,
                                          bool with_captions) const {
  if (samples.empty()) throw InvalidParameter("make_input: empty batch");
  if (clips.size() != samples.size())
    throw InvalidParameter("make_input: clip count mismatch");
  const long b = static_cast<long>(samples.size());
  const long n = config_.visual_tokens();
  const long pd = config_.patch_dim();

  ModelInput<S> in;
  in.batch = b;
  in.patches = Tens<S>({b * n, pd});
  for (long bi = 0; bi < b; ++bi)
    patchify_clip(config_, *clips[static_cast<std::size_t>(bi)],
                  in.patches.ptr() + bi * n * pd);
  fill_input_common(in, samples, with_captions);
  return in;
}

template <class S>
ModelInput<S> CaptionModel<S>::make_input_embedded(
    std::span<const ShotSample* const> samples,
    std::span<const nn::Tens<S>* const> prefixes, bool with_captions) const {
  if (samples.empty()) throw InvalidParameter("make_input_embedded: empty batch");
  if (prefixes.size() != samples.size())
    throw InvalidParameter("make_input_embedded: prefix count mismatch");
  const long b = static_cast<long>(samples.size());
  const long n = config_.visual_tokens();
  const long d = config_.embed_dim;

  ModelInput<S> in;
  in.batch = b;
  in.embedded = true;
  in.patches = Tens<S>({b, n, d});
  for (long bi = 0; bi < b; ++bi) {
    const Tens<S>& prefix = *prefixes[static_cast<std::size_t>(bi)];
    if (prefix.shape != nn::Shape{n, d})
      throw ShapeMismatch("make_input_embedded: bad prefix shape");
    std::copy(prefix.data.begin(), prefix.data.end(),
              in.patches.data.begin() + static_cast<std::ptrdiff_t>(bi * n * d));
  }
  fill_input_common(in, samples, with_captions);
  return in;
}

template <class S>
void CaptionModel<S>::fill_input_common(ModelInput<S>& in,
                                        std::span<const ShotSample* const> samples,
                                        bool with_captions) const {
  const long b = in.batch;
  const long t = config_.frames;
  const long pose_dim = config_.pose_dim();
  const double norm = static_cast<double>(config_.input_size);

  in.positions = Tens<S>({b, t, 4});
  in.poses = Tens<S>({b, t, pose_dim});
  in.shuttles = Tens<S>({b, t, 2});
  in.modality_mask = Tens<std::uint8_t>({b, 3 * t});

  for (long bi = 0; bi < b; ++bi) {
    const ShotSample& s = *samples[static_cast<std::size_t>(bi)];
    const ModalityWindow& w = s.modalities;
    if (w.pose_points != config_.pose_points)
      throw ShapeMismatch("make_input: pose keypoint count mismatch");
    for (long ti = 0; ti < t; ++ti) {
      const auto tu = static_cast<std::size_t>(ti);
      if (w.players_present[tu]) {
        for (int j = 0; j < 4; ++j)
          in.positions.data[static_cast<std::size_t>((bi * t + ti) * 4 + j)] =
              static_cast<S>(w.position[tu][static_cast<std::size_t>(j)] / norm);
        for (long j = 0; j < pose_dim; ++j)
          in.poses.data[static_cast<std::size_t>((bi * t + ti) * pose_dim + j)] =
              static_cast<S>(w.pose[static_cast<std::size_t>(ti * pose_dim + j)] / norm);
        in.modality_mask.data[static_cast<std::size_t>(bi * 3 * t + ti)] = 1;
        in.modality_mask.data[static_cast<std::size_t>(bi * 3 * t + t + ti)] = 1;
      }
      if (w.shuttle_present[tu]) {
        in.shuttles.data[static_cast<std::size_t>((bi * t + ti) * 2)] =
            static_cast<S>(w.shuttle[tu][0] / norm);
        in.shuttles.data[static_cast<std::size_t>((bi * t + ti) * 2 + 1)] =
            static_cast<S>(w.shuttle[tu][1] / norm);
        in.modality_mask.data[static_cast<std::size_t>(bi * 3 * t + 2 * t + ti)] = 1;
      }
    }
  }

  if (with_captions) {
    long max_tokens = 0;
    for (const ShotSample* s : samples)
      max_tokens = std::max(max_tokens, static_cast<long>(s->caption_tokens.size()));
    if (max_tokens > config_.max_len)
      throw SequenceTooLong("make_input: caption exceeds max_len");
    const long l = max_tokens - 1;  // input positions (BOS..), targets shifted
    in.caption_len = l;
    in.tokens.assign(static_cast<std::size_t>(b * l), Vocabulary::kPad);
    in.targets.assign(static_cast<std::size_t>(b * l), Vocabulary::kPad);
    in.token_valid.assign(static_cast<std::size_t>(b * l), 0);
    in.target_valid.assign(static_cast<std::size_t>(b * l), 0);
    for (long bi = 0; bi < b; ++bi) {
      const auto& toks = samples[static_cast<std::size_t>(bi)]->caption_tokens;
      const long len = static_cast<long>(toks.size());
      for (long i = 0; i < len - 1; ++i) {
        in.tokens[static_cast<std::size_t>(bi * l + i)] = toks[static_cast<std::size_t>(i)];
        in.targets[static_cast<std::size_t>(bi * l + i)] =
            toks[static_cast<std::size_t>(i + 1)];
        in.token_valid[static_cast<std::size_t>(bi * l + i)] = 1;
        in.target_valid[static_cast<std::size_t>(bi * l + i)] = 1;
      }
    }

    in.semantic_targets = Tens<S>({b, kSemanticDim});
    for (long bi = 0; bi < b; ++bi) {
      const auto& bits = samples[static_cast<std::size_t>(bi)]->semantic_target.bits;
      for (int k = 0; k < kSemanticDim; ++k)
        in.semantic_targets.data[static_cast<std::size_t>(bi * kSemanticDim + k)] =
            static_cast<S>(bits[static_cast<std::size_t>(k)]);
    }
  }
}

template <class S>
Tens<S> CaptionModel<S>::frozen_prefix(const ClipTensor& clip) const {
  const long n = config_.visual_tokens();
  const long pd = config_.patch_dim();
  const long d = config_.embed_dim;
  Tens<S> patches({n, pd});
  patchify_clip(config_, clip, patches.ptr());
  Tens<S> out({n, d});
  nn::gemm_nn(n, d, pd, patches.ptr(), patch_w_->value.ptr(), out.ptr(), false);
  // Two separate additions, in the same order as the graph path (bias, then
  // positional), so both paths produce bitwise-identical prefixes.
  for (long i = 0; i < n; ++i) {
    S* row = out.ptr() + i * d;
    const S* pos = vis_pos_->value.ptr() + i * d;
    for (long j = 0; j < d; ++j) {
      row[j] = row[j] + patch_b_->value.data[static_cast<std::size_t>(j)];
      row[j] = row[j] + pos[j];
    }
  }
  return out;
}

// --- forward pieces -------------------------------------------------------------

template <class S>
Ref<S> CaptionModel<S>::attention(const Attn& p, Ref<S> queries, Ref<S> keys_values,
                                  AttnMaskMode mode,
                                  const Tens<std::uint8_t>* key_mask,
                                  ForwardResult<S>* probes) const {
  const long h = config_.heads;
  const long dk = config_.embed_dim / h;
  auto q = nn::split_heads(nn::add_bias(nn::matmul(queries, p.wq), p.bq), h);
  auto k = nn::split_heads(nn::add_bias(nn::matmul(keys_values, p.wk), p.bk), h);
  auto v = nn::split_heads(nn::add_bias(nn::matmul(keys_values, p.wv), p.bv), h);
  auto scores = nn::scale(nn::bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dk)));
  nn::MaskKind kind = mode == AttnMaskMode::causal ? nn::MaskKind::causal
                      : mode == AttnMaskMode::key  ? nn::MaskKind::key
                                                   : nn::MaskKind::none;
  auto probs = nn::softmax_rows(scores, kind, h, key_mask);
  if (probes) probes->attention_probs.push_back(probs);
  auto ctx = nn::merge_heads(nn::bmm(probs, v), h);
  return nn::add_bias(nn::matmul(ctx, p.wo), p.bo);
}

template <class S>
Ref<S> CaptionModel<S>::encode_video(const ModelInput<S>& in,
                                     ForwardResult<S>* probes) const {
  const long b = in.batch;
  const long n = config_.visual_tokens();
  const long d = config_.embed_dim;

  Ref<S> x;
  if (in.embedded) {
    if (in.patches.shape != nn::Shape{b, n, d})
      throw ShapeMismatch("encode_video: bad embedded prefix shape");
    x = nn::leaf(in.patches);
  } else {
    if (in.patches.shape != nn::Shape{b * n, config_.patch_dim()})
      throw ShapeMismatch("encode_video: bad patch shape");
    auto patches = nn::leaf(in.patches);
    auto embedded = nn::add_bias(nn::matmul(patches, patch_w_), patch_b_);
    x = nn::add_positional(nn::reshape(embedded, {b, n, d}), vis_pos_);
  }
  for (const auto& blk : backbone_) {
    x = nn::layernorm(nn::add(x, attention(blk.attn, x, x, AttnMaskMode::none,
                                           nullptr, probes)),
                      blk.ln1.gain, blk.ln1.bias);
    auto ff = nn::add_bias(
        nn::matmul(nn::gelu(nn::add_bias(nn::matmul(x, blk.ffn.w1), blk.ffn.b1)),
                   blk.ffn.w2),
        blk.ffn.b2);
    x = nn::layernorm(nn::add(x, ff), blk.ln2.gain, blk.ln2.bias);
  }
  return x;
}

template <class S>
Ref<S> CaptionModel<S>::refine_tokens(Ref<S> grid, ForwardResult<S>* probes) const {
  Ref<S> x = grid;
  for (const auto& blk : refiner_) {
    auto attended = attention(blk.attn, x, x, AttnMaskMode::none, nullptr, probes);
    x = nn::layernorm(nn::add(x, attended), blk.ln.gain, blk.ln.bias);
  }
  return x;
}

template <class S>
std::pair<Ref<S>, Tens<std::uint8_t>> CaptionModel<S>::embed_modalities(
    const ModelInput<S>& in) const {
  auto mlp = [&](const Mlp2& m, const Tens<S>& input) {
    auto x = nn::leaf(input);
    auto h = nn::gelu(nn::add_bias(nn::matmul(x, m.w1), m.b1));
    return nn::add_bias(nn::matmul(h, m.w2), m.b2);
  };
  auto pos_tokens = mlp(mlp_pos_, in.positions);
  auto pose_tokens = mlp(mlp_pose_, in.poses);
  auto shuttle_tokens = mlp(mlp_shuttle_, in.shuttles);
  auto cat = nn::concat_tokens<S>({pos_tokens, pose_tokens, shuttle_tokens});
  auto with_pos = nn::add_positional(cat, modal_pos_);
  return {with_pos, in.modality_mask};
}

template <class S>
Ref<S> CaptionModel<S>::fuse(Ref<S> refined, Ref<S> modal,
                             const Tens<std::uint8_t>& modal_mask,
                             ForwardResult<S>* probes) const {
  auto mixed = attention(fusion_self_, modal, modal, AttnMaskMode::key, &modal_mask,
                         probes);
  auto m_s = nn::add(mixed, modal);
  auto delta = attention(fusion_cross_, refined, m_s, AttnMaskMode::key, &modal_mask,
                         probes);
  return nn::add(refined, nn::scale(delta, config_.alpha));
}

template <class S>
Ref<S> CaptionModel<S>::decode(Ref<S> fused, const std::vector<int>& tokens,
                               long batch, long caption_len,
                               ForwardResult<S>* probes) const {
  if (caption_len > config_.max_len)
    throw SequenceTooLong("decode: sequence longer than max_len");
  if (caption_len < 1) throw InvalidParameter("decode: empty sequence");
  auto x = nn::add_positional(nn::embedding(tok_emb_, tokens, batch, caption_len),
                              dec_pos_);
  for (const auto& layer : decoder_) {
    auto self = attention(layer.self_attn, x, x, AttnMaskMode::causal, nullptr,
                          probes);
    x = nn::layernorm(nn::add(x, self), layer.ln1.gain, layer.ln1.bias);
    auto cross = attention(layer.cross_attn, x, fused, AttnMaskMode::none, nullptr,
                           probes);
    x = nn::layernorm(nn::add(x, cross), layer.ln2.gain, layer.ln2.bias);
    auto ff = nn::add_bias(
        nn::matmul(
            nn::gelu(nn::add_bias(nn::matmul(x, layer.ffn.w1), layer.ffn.b1)),
            layer.ffn.w2),
        layer.ffn.b2);
    x = nn::layernorm(nn::add(x, ff), layer.ln3.gain, layer.ln3.bias);
  }
  return x;
}

template <class S>
Ref<S> CaptionModel<S>::vocab_logits(Ref<S> hidden) const {
  return nn::add_bias(nn::matmul(hidden, vocab_w_), vocab_b_);
}

template <class S>
typename CaptionModel<S>::Feedback CaptionModel<S>::semantic_feedback(
    Ref<S> hidden, const std::vector<std::uint8_t>& token_valid) const {
  const long b = hidden->value.dim(0);
  const long l = hidden->value.dim(1);
  if (static_cast<long>(token_valid.size()) != b * l)
    throw ShapeMismatch("semantic_feedback: mask size mismatch");
  Tens<std::uint8_t> mask({b, l});
  std::copy(token_valid.begin(), token_valid.end(), mask.data.begin());

  Feedback fb;
  fb.pooled = nn::masked_mean(hidden, mask);
  fb.sem_logits = nn::matmul(fb.pooled, sf_ws_);
  fb.sem_probs = nn::sigmoid(fb.sem_logits);
  auto projected = nn::gelu(nn::matmul(fb.sem_probs, sf_w1_));
  auto delta = nn::matmul(projected, sf_w2_);
  fb.hidden_sf = nn::add_scaled_rows(hidden, delta, sf_beta_);
  return fb;
}

template <class S>
ForwardResult<S> CaptionModel<S>::forward(const ModelInput<S>& in,
                                          bool with_losses) const {
  ForwardResult<S> r;
  r.visual = encode_video(in, &r);
  r.refined = config_.use_refiner ? refine_tokens(r.visual, &r) : r.visual;
  auto [modal, modal_mask] = embed_modalities(in);
  r.fused = fuse(r.refined, modal, modal_mask, &r);
  r.hidden = decode(r.fused, in.tokens, in.batch, in.caption_len, &r);
  r.logits_pre_sf = vocab_logits(r.hidden);

  if (config_.use_sf) {
    auto fb = semantic_feedback(r.hidden, in.token_valid);
    r.sem_logits = fb.sem_logits;
    r.sem_probs = fb.sem_probs;
    r.hidden_sf = fb.hidden_sf;
    r.logits = vocab_logits(r.hidden_sf);
  } else {
    r.hidden_sf = r.hidden;
    r.logits = r.logits_pre_sf;
  }

  if (with_losses) {
    r.loss_cap = nn::cross_entropy_mean(r.logits, in.targets, in.target_valid);
    if (config_.use_sf) {
      r.loss_sf = nn::bce_with_logits_mean(r.sem_logits, in.semantic_targets);
      r.loss_total = nn::add(r.loss_cap, nn::scale(r.loss_sf, config_.lambda_sf));
    } else {
      r.loss_sf = nn::leaf(Tens<S>({1}));
      r.loss_total = r.loss_cap;
    }
  }
  return r;
}

template <class S>
Tens<S> CaptionModel<S>::encode_for_generation(const ModelInput<S>& in) const {
  auto visual = encode_video(in, nullptr);
  auto refined = config_.use_refiner ? refine_tokens(visual, nullptr) : visual;
  auto [modal, modal_mask] = embed_modalities(in);
  auto fused = fuse(refined, modal, modal_mask, nullptr);
  return fused->value;
}

template <class S>
std::vector<int> CaptionModel<S>::generate(const Tens<S>& fused_value,
                                           int max_len) const {
  std::vector<int> ids = {Vocabulary::kBos};
  while (static_cast<int>(ids.size()) < max_len) {
    const long l = static_cast<long>(ids.size());
    auto fused = nn::leaf(fused_value);
    auto hidden = decode(fused, ids, 1, l, nullptr);
    Ref<S> logits;
    if (config_.use_sf && config_.sf_at_inference) {
      std::vector<std::uint8_t> valid(static_cast<std::size_t>(l), 1);
      auto fb = semantic_feedback(hidden, valid);
      logits = vocab_logits(fb.hidden_sf);
    } else {
      logits = vocab_logits(hidden);
    }
    const long v = config_.vocab_size;
    const S* row = logits->value.ptr() + (l - 1) * v;
    int best = 0;
    for (long j = 1; j < v; ++j) {
      if (row[j] > row[best]) best = static_cast<int>(j);
    }
    ids.push_back(best);
    if (best == Vocabulary::kEos) break;
  }
  return ids;
}

template <class S>
std::map<std::string, Tens<S>> CaptionModel<S>::state() const {
  std::map<std::string, Tens<S>> out;
  for (const auto& p : params_) out.emplace(p.name, p.node->value);
  return out;
}

template <class S>
void CaptionModel<S>::load_state(const std::map<std::string, Tens<S>>& state) {
  for (auto& p : params_) {
    auto it = state.find(p.name);
    if (it == state.end()) throw Error("load_state: missing tensor " + p.name);
    if (it->second.shape != p.node->value.shape)
      throw ShapeMismatch("load_state: shape mismatch for " + p.name);
    p.node->value = it->second;
  }
}

template class CaptionModel<float>;
template class CaptionModel<double>;

}  // namespace bfmd
