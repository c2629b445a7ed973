// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "bfmd/rng.hpp"
#include "bfmd/text.hpp"

namespace fs = std::filesystem;

namespace bfmd {

AdamW::AdamW(CaptionModel<float>& model, AdamWOptions opts)
    : model_(&model), opts_(opts) {
  for (const auto& p : model.parameters()) {
    if (!p.trainable) continue;
    Slot slot;
    slot.m = nn::Tens<float>(p.node->value.shape);
    slot.v = nn::Tens<float>(p.node->value.shape);
    slots_.emplace(p.name, std::move(slot));
  }
}

void AdamW::zero_grad() {
  for (auto& p : model_->parameters()) p.node->zero_grad();
}

void AdamW::step() {
  ++t_;
  const auto t = static_cast<double>(t_);
  const double bias1 = 1.0 - std::pow(opts_.beta1, t);
  const double bias2 = 1.0 - std::pow(opts_.beta2, t);
  for (auto& p : model_->parameters()) {
    if (!p.trainable || p.node->grad.empty()) continue;
    Slot& slot = slots_.at(p.name);
    float* w = p.node->value.ptr();
    const float* g = p.node->grad.ptr();
    float* m = slot.m.ptr();
    float* v = slot.v.ptr();
    const long n = p.node->value.numel();
    for (long i = 0; i < n; ++i) {
      m[i] = static_cast<float>(opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g[i]);
      v[i] = static_cast<float>(opts_.beta2 * v[i] +
                                (1.0 - opts_.beta2) * static_cast<double>(g[i]) * g[i]);
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      double update = opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
      if (opts_.weight_decay > 0.0) update += opts_.lr * opts_.weight_decay * w[i];
      w[i] = static_cast<float>(w[i] - update);
    }
  }
}

ClipLoader file_clip_loader() {
  return [](const ShotSample& s) { return read_clip(s.clip_path); };
}

// --- batching helpers ---------------------------------------------------------

namespace {

// Prefix cache for the frozen backbone stem (patchify + positional): each
// clip is read and embedded once per run.
class PrefixCache {
 public:
  PrefixCache(CaptionModel<float>& model, std::span<const ShotSample> samples,
              const ClipLoader& clips)
      : model_(&model), samples_(samples), clips_(&clips),
        cache_(samples.size()) {}

  bool enabled() const { return model_->backbone_prefix_frozen(); }

  ModelInput<float> batch_input(std::span<const std::size_t> indices,
                                bool with_captions) {
    std::vector<const ShotSample*> batch;
    batch.reserve(indices.size());
    for (std::size_t i : indices) batch.push_back(&samples_[i]);
    if (enabled()) {
      std::vector<const nn::Tens<float>*> prefixes;
      prefixes.reserve(indices.size());
      for (std::size_t i : indices) {
        if (!cache_[i]) cache_[i] = model_->frozen_prefix((*clips_)(samples_[i]));
        prefixes.push_back(&*cache_[i]);
      }
      return model_->make_input_embedded(batch, prefixes, with_captions);
    }
    std::vector<ClipTensor> loaded;
    loaded.reserve(indices.size());
    for (std::size_t i : indices) loaded.push_back((*clips_)(samples_[i]));
    std::vector<const ClipTensor*> clip_ptrs;
    for (const auto& c : loaded) clip_ptrs.push_back(&c);
    return model_->make_input(batch, clip_ptrs, with_captions);
  }

 private:
  CaptionModel<float>* model_;
  std::span<const ShotSample> samples_;
  const ClipLoader* clips_;
  std::vector<std::optional<nn::Tens<float>>> cache_;
};

std::vector<std::vector<std::size_t>> make_batches(
    std::span<const std::size_t> indices, int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < indices.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(indices.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(indices.begin() + static_cast<std::ptrdiff_t>(i),
                         indices.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

LossSummary losses_over(CaptionModel<float>& model, PrefixCache& cache,
                        std::span<const std::size_t> indices, int batch_size) {
  LossSummary sum;
  std::size_t count = 0;
  for (const auto& batch : make_batches(indices, batch_size)) {
    auto in = cache.batch_input(batch, true);
    auto fwd = model.forward(in, true);
    const auto b = static_cast<double>(batch.size());
    sum.l_cap += fwd.loss_cap->value.data[0] * b;
    sum.l_sf += fwd.loss_sf->value.data[0] * b;
    sum.l_total += fwd.loss_total->value.data[0] * b;
    count += batch.size();
  }
  if (count > 0) {
    sum.l_cap /= static_cast<double>(count);
    sum.l_sf /= static_cast<double>(count);
    sum.l_total /= static_cast<double>(count);
  }
  return sum;
}

}  // namespace

LossSummary evaluate_losses(CaptionModel<float>& model,
                            std::span<const ShotSample> samples,
                            std::span<const std::size_t> indices,
                            const ClipLoader& clips, int batch_size) {
  PrefixCache cache(model, samples, clips);
  return losses_over(model, cache, indices, batch_size);
}

TrainResult train_model(CaptionModel<float>& model,
                        std::span<const ShotSample> samples,
                        const DatasetSplit& split, const ClipLoader& clips,
                        const TrainOptions& opts) {
  if (split.train.empty()) throw InvalidParameter("train_model: empty train split");

  AdamWOptions aopts;
  aopts.lr = opts.lr;
  aopts.weight_decay = opts.weight_decay;
  AdamW optimizer(model, aopts);

  PrefixCache cache(model, samples, clips);
  Rng shuffle_rng(opts.seed ^ 0x7aa1bee5ULL);
  TrainResult result;

  std::ofstream log_file;
  if (!opts.log_path.empty()) {
    fs::create_directories(fs::path(opts.log_path).parent_path());
    log_file.open(opts.log_path);
    if (!log_file) throw IoError("train_model: cannot open log " + opts.log_path);
  }
  if (!opts.checkpoint_dir.empty()) fs::create_directories(opts.checkpoint_dir);

  long step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < opts.epochs && !stop; ++epoch) {
    std::vector<std::size_t> order(split.train.begin(), split.train.end());
    shuffle_rng.shuffle(order);

    for (const auto& batch : make_batches(order, opts.batch_size)) {
      auto in = cache.batch_input(batch, true);
      optimizer.zero_grad();
      auto fwd = model.forward(in, true);
      const double l_total = fwd.loss_total->value.data[0];
      if (!std::isfinite(l_total))
        throw NonFiniteLoss("train_model: non-finite loss at step " +
                            std::to_string(step));
      nn::backward(fwd.loss_total);
      optimizer.step();
      ++step;

      StepRecord rec;
      rec.step = step;
      rec.l_cap = fwd.loss_cap->value.data[0];
      rec.l_sf = fwd.loss_sf->value.data[0];
      rec.l_total = l_total;
      rec.beta = model.beta();
      rec.lr = opts.lr;
      result.log.push_back(rec);
      if (log_file) {
        json line = {{"step", rec.step},     {"L_cap", rec.l_cap},
                     {"L_sf", rec.l_sf},     {"L_total", rec.l_total},
                     {"beta", rec.beta},     {"lr", rec.lr}};
        log_file << line.dump() << "\n";
      }
      if (opts.max_steps > 0 && step >= opts.max_steps) {
        stop = true;
        break;
      }
    }

    if (!split.val.empty()) {
      LossSummary val = losses_over(model, cache, split.val, opts.batch_size);
      if (val.l_total < result.best_val_total) {
        result.best_val_total = val.l_total;
        if (!opts.checkpoint_dir.empty()) {
          result.best_checkpoint =
              (fs::path(opts.checkpoint_dir) / "best.ckpt").string();
          save_checkpoint(result.best_checkpoint, model, &optimizer);
        }
      }
    }

    if (opts.target_train_cap > 0.0) {
      LossSummary train_loss = losses_over(model, cache, split.train, opts.batch_size);
      result.final_train_cap = train_loss.l_cap;
      if (train_loss.l_cap < opts.target_train_cap) stop = true;
    }
  }

  if (opts.target_train_cap <= 0.0) {
    LossSummary train_loss = losses_over(model, cache, split.train, opts.batch_size);
    result.final_train_cap = train_loss.l_cap;
  }

  result.steps = step;
  if (!opts.checkpoint_dir.empty()) {
    result.last_checkpoint = (fs::path(opts.checkpoint_dir) / "last.ckpt").string();
    save_checkpoint(result.last_checkpoint, model, &optimizer);
    if (result.best_checkpoint.empty()) {
      result.best_checkpoint = (fs::path(opts.checkpoint_dir) / "best.ckpt").string();
      save_checkpoint(result.best_checkpoint, model, &optimizer);
    }
  }
  return result;
}

// --- evaluation -----------------------------------------------------------------

double semantic_micro_f1(CaptionModel<float>& model,
                         std::span<const ShotSample> samples,
                         std::span<const std::size_t> indices,
                         const ClipLoader& clips, double threshold,
                         int batch_size) {
  if (!model.config().use_sf)
    throw InvalidParameter("semantic_micro_f1: model has no semantic head");
  PrefixCache cache(model, samples, clips);
  long tp = 0, fp = 0, fn = 0;
  for (const auto& batch : make_batches(indices, batch_size)) {
    auto in = cache.batch_input(batch, true);
    auto fwd = model.forward(in, false);
    const auto& probs = fwd.sem_probs->value;
    for (long i = 0; i < probs.numel(); ++i) {
      const bool pred = probs.data[i] >= static_cast<float>(threshold);
      const bool truth = in.semantic_targets.data[static_cast<std::size_t>(i)] > 0.5f;
      if (pred && truth) ++tp;
      else if (pred && !truth) ++fp;
      else if (!pred && truth) ++fn;
    }
  }
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

EvalOutputs evaluate_model(CaptionModel<float>& model,
                           std::span<const ShotSample> samples,
                           std::span<const std::size_t> indices,
                           const ClipLoader& clips, const Vocabulary& vocab) {
  PrefixCache cache(model, samples, clips);
  EvalOutputs out;
  std::vector<EvalPair> pairs;
  for (std::size_t idx : indices) {
    const ShotSample& s = samples[idx];
    const std::size_t one[] = {idx};
    auto in = cache.batch_input(one, false);
    auto fused = model.encode_for_generation(in);
    auto ids = model.generate(fused, static_cast<int>(model.config().max_len));
    if (ids == s.caption_tokens) ++out.token_exact;

    EvalPair pair;
    pair.candidate = vocab.surface(ids);
    pair.references.push_back(tokenize_text(s.caption));
    pairs.push_back(std::move(pair));
    out.generated.push_back(vocab.decode(ids));
  }
  out.metrics = evaluate_corpus(pairs);
  if (model.config().use_sf)
    out.semantic_f1 = semantic_micro_f1(model, samples, indices, clips);
  return out;
}

// --- checkpoints ------------------------------------------------------------------

namespace {

constexpr char kCkptMagic[8] = {'B', 'F', 'M', 'D', 'C', 'K', 'P', 'T'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_tensor(std::ostream& os, const nn::Tens<float>& t) {
  os.write(reinterpret_cast<const char*>(t.ptr()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

nn::Tens<float> read_tensor(std::istream& is, nn::Shape shape) {
  nn::Tens<float> t(std::move(shape));
  is.read(reinterpret_cast<char*>(t.ptr()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const CaptionModel<float>& model,
                     const AdamW* optimizer) {
  json header;
  header["config"] = model.config().to_json();
  json tensors = json::array();
  for (const auto& p : model.parameters())
    tensors.push_back({{"name", p.name}, {"shape", p.node->value.shape}});
  header["tensors"] = tensors;
  if (optimizer) {
    json opt;
    opt["step"] = optimizer->step_count();
    json slots = json::array();
    for (const auto& [name, slot] : optimizer->slots())
      slots.push_back({{"name", name}, {"shape", slot.m.shape}});
    opt["slots"] = slots;
    header["optimizer"] = opt;
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);
  const std::string header_str = header.dump();
  os.write(kCkptMagic, sizeof(kCkptMagic));
  write_u32(os, 1);
  write_u64(os, header_str.size());
  os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& p : model.parameters()) write_tensor(os, p.node->value);
  if (optimizer) {
    for (const auto& [name, slot] : optimizer->slots()) {
      write_tensor(os, slot.m);
      write_tensor(os, slot.v);
    }
  }
  if (!os) throw IoError("save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw IoError("load_checkpoint: bad magic in " + path);
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw IoError("load_checkpoint: unsupported version");
  const std::uint64_t header_len = read_u64(is);
  std::string header_str(header_len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(header_len));
  json header = json::parse(header_str);

  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(header.at("config"));
  for (const auto& t : header.at("tensors")) {
    nn::Shape shape = t.at("shape").get<nn::Shape>();
    ckpt.tensors.emplace(t.at("name").get<std::string>(),
                         read_tensor(is, std::move(shape)));
  }
  if (header.contains("optimizer")) {
    ckpt.has_optimizer = true;
    ckpt.optimizer_step = header["optimizer"].at("step").get<long>();
    for (const auto& t : header["optimizer"].at("slots")) {
      nn::Shape shape = t.at("shape").get<nn::Shape>();
      AdamW::Slot slot;
      slot.m = read_tensor(is, shape);
      slot.v = read_tensor(is, std::move(shape));
      ckpt.moments.emplace(t.at("name").get<std::string>(), std::move(slot));
    }
  }
  if (!is) throw IoError("load_checkpoint: truncated file " + path);
  return ckpt;
}

CaptionModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
  CaptionModel<float> model(ckpt.config);
  model.load_state(ckpt.tensors);
  return model;
}

}  // namespace bfmd
