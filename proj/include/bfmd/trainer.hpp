// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training loop (decoupled-weight-decay Adam over the trainable parameter
// set, frozen tensors untouched), checkpoint container, and evaluation
// helpers (greedy generation + caption metrics + semantic-attribute F1).

#pragma once

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bfmd/metrics.hpp"
#include "bfmd/model.hpp"

namespace bfmd {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  struct Slot {
    nn::Tens<float> m, v;
  };

  AdamW(CaptionModel<float>& model, AdamWOptions opts);

  void zero_grad();
  // One update over trainable parameters with non-empty gradients.
  void step();

  long step_count() const { return t_; }
  const AdamWOptions& options() const { return opts_; }
  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }
  void set_step_count(long t) { t_ = t; }

 private:
  CaptionModel<float>* model_;
  AdamWOptions opts_;
  long t_ = 0;
  std::map<std::string, Slot> slots_;
};

// Loads the pixel clip for a sample; by default from its clip_path.
using ClipLoader = std::function<ClipTensor(const ShotSample&)>;
ClipLoader file_clip_loader();

struct TrainOptions {
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::uint64_t seed = 7;
  long max_steps = 0;            // 0 = no cap
  double target_train_cap = 0.0; // early stop on full-train L_cap (0 = off)
  std::string log_path;          // JSONL step log ("" = no file)
  std::string checkpoint_dir;    // ""= no checkpoints
};

struct StepRecord {
  long step = 0;
  double l_cap = 0, l_sf = 0, l_total = 0, beta = 0, lr = 0;
};

struct TrainResult {
  long steps = 0;
  double final_train_cap = 0;
  double best_val_total = std::numeric_limits<double>::infinity();
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::vector<StepRecord> log;
};

struct LossSummary {
  double l_cap = 0, l_sf = 0, l_total = 0;
};

// Batched forward/backward/update over the train split; per-epoch validation
// loss selects the `best` checkpoint (minimum total loss). Aborts with
// NonFiniteLoss if a step produces a non-finite total.
TrainResult train_model(CaptionModel<float>& model,
                        std::span<const ShotSample> samples,
                        const DatasetSplit& split, const ClipLoader& clips,
                        const TrainOptions& opts);

// Forward-only mean losses over the given sample indices.
LossSummary evaluate_losses(CaptionModel<float>& model,
                            std::span<const ShotSample> samples,
                            std::span<const std::size_t> indices,
                            const ClipLoader& clips, int batch_size = 16);

struct EvalOutputs {
  MetricReport metrics;
  double semantic_f1 = 0.0;  // micro-F1 of thresholded P vs S* (SF models)
  int token_exact = 0;       // generated token sequences equal to reference
  std::vector<std::string> generated;
};

EvalOutputs evaluate_model(CaptionModel<float>& model,
                           std::span<const ShotSample> samples,
                           std::span<const std::size_t> indices,
                           const ClipLoader& clips, const Vocabulary& vocab);

double semantic_micro_f1(CaptionModel<float>& model,
                         std::span<const ShotSample> samples,
                         std::span<const std::size_t> indices,
                         const ClipLoader& clips, double threshold = 0.5,
                         int batch_size = 16);

// --- checkpoints --------------------------------------------------------------
// "BFMDCKPT" magic, u32 version, u64 JSON header length, header, then raw
// little-endian float32 tensors in header order (model tensors, then m and v
// moment pairs when optimizer state is present).

struct Checkpoint {
  ModelConfig config;
  std::map<std::string, nn::Tens<float>> tensors;
  std::map<std::string, AdamW::Slot> moments;
  long optimizer_step = 0;
  bool has_optimizer = false;
};

void save_checkpoint(const std::string& path, const CaptionModel<float>& model,
                     const AdamW* optimizer = nullptr);
Checkpoint load_checkpoint(const std::string& path);
CaptionModel<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace bfmd
