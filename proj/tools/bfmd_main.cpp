// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// bfmd — badminton match annotation analysis and shot captioning toolkit.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "bfmd/cli.hpp"

using namespace bfmd;

int main(int argc, char** argv) {
  CLI::App app{"badminton full-match annotation and shot captioning toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::string out_flag;

  // validate
  auto* validate = app.add_subcommand("validate", "check annotation files");
  std::string annotations_dir, out_file;
  validate->add_option("--annotations", annotations_dir, "annotation directory")
      ->required();
  validate->add_option("--out", out_file, "violation report file");

  // stats
  auto* stats = app.add_subcommand("stats", "dataset and caption statistics");
  std::string stats_annotations, stats_out;
  stats->add_option("--annotations", stats_annotations, "annotation directory")
      ->required();
  stats->add_option("--out", stats_out, "output directory");

  // tactics
  auto* tactics = app.add_subcommand("tactics", "tactical pattern curves");
  std::string tactics_annotations, tactics_out, mapping_file, patterns_file;
  double bin_width = 30.0, sigma = 60.0;
  bool has_bin = false, has_sigma = false;
  tactics->add_option("--config", config_path, "run config JSON");
  tactics->add_option("--annotations", tactics_annotations, "annotation directory");
  tactics->add_option("--out", tactics_out, "output directory");
  tactics->add_option("--mapping", mapping_file, "shot type to category mapping");
  tactics->add_option("--patterns", patterns_file, "pattern definitions");
  tactics->add_option("--bin-width", bin_width, "bin width in seconds")
      ->each([&](const std::string&) { has_bin = true; });
  tactics->add_option("--sigma", sigma, "kernel sigma in seconds")
      ->each([&](const std::string&) { has_sigma = true; });

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out;
  int synth_samples = 32;
  std::uint64_t synth_seed = 7;
  bool no_clips = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--samples", synth_samples, "sample count");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--no-clips", no_clips, "skip pixel clip rendering");

  // train / eval / caption
  auto* train = app.add_subcommand("train", "train the captioning model");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--seed", seed_flag, "seed override");
  train->add_option("--out", out_flag, "output directory override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string checkpoint;
  eval->add_option("--config", config_path, "run config JSON")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--seed", seed_flag, "seed override");
  eval->add_option("--out", out_flag, "output directory override");

  auto* caption = app.add_subcommand("caption", "caption one sample");
  long sample_index = 0;
  caption->add_option("--config", config_path, "run config JSON")->required();
  caption->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  caption->add_option("--sample", sample_index, "sample index")->required();
  caption->add_option("--seed", seed_flag, "seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto run_config = [&]() {
    cli::RunConfig cfg =
        config_path.empty() ? cli::RunConfig{} : cli::load_run_config(config_path);
    if (seed_flag) cfg.seed = *seed_flag;
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    return cfg;
  };

  try {
    if (*validate) return cli::cmd_validate(annotations_dir, out_file);
    if (*stats) return cli::cmd_stats(stats_annotations, stats_out);
    if (*tactics) {
      cli::RunConfig cfg = run_config();
      if (!tactics_annotations.empty()) cfg.annotations_dir = tactics_annotations;
      if (!tactics_out.empty()) cfg.out_dir = tactics_out;
      if (!mapping_file.empty()) cfg.tactic_mapping_file = mapping_file;
      if (!patterns_file.empty()) cfg.tactic_patterns_file = patterns_file;
      if (has_bin) cfg.tactics_bin_width = bin_width;
      if (has_sigma) cfg.tactics_sigma = sigma;
      return cli::cmd_tactics(cfg);
    }
    if (*synth) return cli::cmd_synth(synth_out, synth_samples, synth_seed, !no_clips);
    if (*train) return cli::cmd_train(run_config());
    if (*eval) return cli::cmd_eval(run_config(), checkpoint);
    if (*caption) return cli::cmd_caption(run_config(), checkpoint, sample_index);
  } catch (const std::exception& e) {
    std::cerr << "bfmd: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
