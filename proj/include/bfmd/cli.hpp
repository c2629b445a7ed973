// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind the `bfmd` binary. Every command
// returns a process exit code: 0 ok, 1 domain failure, 2 usage/io failure.
// Failed commands remove the partial output files they created.

#pragma once

#include <array>
#include <optional>
#include <string>

#include "bfmd/model.hpp"

namespace bfmd::cli {

struct RunConfig {
  std::string annotations_dir;
  std::string modalities_dir;
  std::string clips_dir;
  std::string out_dir;

  ModelConfig model;  // vocab_size is filled from the training vocabulary

  int epochs = 30;
  int batch = 16;
  double lr = 1e-4;
  double weight_decay = 0.0;
  std::optional<std::uint64_t> seed;
  long max_steps = 0;
  double target_train_cap = 0.0;

  std::array<double, 3> ratios{0.7, 0.2, 0.1};

  std::string tactic_mapping_file;
  std::string tactic_patterns_file;
  std::string lexicon_file;
  double tactics_bin_width = 30.0;
  double tactics_sigma = 60.0;

  json to_json() const;
  static RunConfig from_json(const json& j);
};

// Loads a config file, following its optional "include" chain (relative to
// the including file, nearest file wins).
RunConfig load_run_config(const std::string& path);

int cmd_validate(const std::string& annotations_dir, const std::string& out_file);
int cmd_stats(const std::string& annotations_dir, const std::string& out_dir);
int cmd_tactics(const RunConfig& config);
int cmd_synth(const std::string& out_dir, int samples, std::uint64_t seed,
              bool write_clips);
int cmd_train(const RunConfig& config);
int cmd_eval(const RunConfig& config, const std::string& checkpoint_path);
int cmd_caption(const RunConfig& config, const std::string& checkpoint_path,
                long sample_index);

}  // namespace bfmd::cli
