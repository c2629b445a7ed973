// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "bfmd/corpus.hpp"
#include "bfmd/fixtures.hpp"
#include "bfmd/metrics.hpp"
#include "bfmd/semantics.hpp"
#include "bfmd/stats.hpp"
#include "bfmd/synth.hpp"
#include "bfmd/tactics.hpp"
#include "bfmd/trainer.hpp"

namespace fs = std::filesystem;

namespace bfmd::cli {

namespace {

constexpr int kOk = 0;
constexpr int kDomainFailure = 1;
constexpr int kUsageFailure = 2;

std::string read_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

// Removes everything this command created if it throws.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (!armed_) return;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) {
      std::error_code ec;
      fs::remove_all(*it, ec);
    }
  }
  void disarm() { armed_ = false; }
  void write(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    if (!fs::exists(path)) created_.push_back(path);
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << content;
  }
  void track(const fs::path& path) { created_.push_back(path); }

 private:
  bool armed_ = true;
  std::vector<fs::path> created_;
};

int report_error(const std::exception& e, int code) {
  std::cerr << "bfmd: " << e.what() << "\n";
  return code;
}

std::vector<fs::path> annotation_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no annotation files in " + dir);
  return files;
}

SemanticLexicon lexicon_for(const RunConfig& config) {
  if (config.lexicon_file.empty()) return default_lexicon();
  return lexicon_from_json(json::parse(read_file(config.lexicon_file)));
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["paths"] = {{"annotations", annotations_dir},
                {"modalities", modalities_dir},
                {"clips", clips_dir},
                {"out", out_dir}};
  j["model"] = model.to_json();
  j["training"] = {{"epochs", epochs},
                   {"batch", batch},
                   {"lr", lr},
                   {"weight_decay", weight_decay},
                   {"max_steps", max_steps},
                   {"target_train_cap", target_train_cap}};
  if (seed) j["training"]["seed"] = *seed;
  j["split"] = {{"ratios", ratios}};
  j["tactics"] = {{"mapping", tactic_mapping_file},
                  {"patterns", tactic_patterns_file},
                  {"bin_width", tactics_bin_width},
                  {"sigma", tactics_sigma}};
  j["semantics"] = {{"lexicon", lexicon_file}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (auto it = j.find("paths"); it != j.end()) {
    const json& p = *it;
    if (p.contains("annotations")) c.annotations_dir = p["annotations"];
    if (p.contains("modalities")) c.modalities_dir = p["modalities"];
    if (p.contains("clips")) c.clips_dir = p["clips"];
    if (p.contains("out")) c.out_dir = p["out"];
  }
  if (j.contains("model")) c.model = ModelConfig::from_json(j["model"]);
  if (auto it = j.find("training"); it != j.end()) {
    const json& t = *it;
    if (t.contains("epochs")) c.epochs = t["epochs"];
    if (t.contains("batch")) c.batch = t["batch"];
    if (t.contains("lr")) c.lr = t["lr"];
    if (t.contains("weight_decay")) c.weight_decay = t["weight_decay"];
    if (t.contains("seed")) c.seed = t["seed"].get<std::uint64_t>();
    if (t.contains("max_steps")) c.max_steps = t["max_steps"];
    if (t.contains("target_train_cap")) c.target_train_cap = t["target_train_cap"];
  }
  if (j.contains("split") && j["split"].contains("ratios")) {
    auto r = j["split"]["ratios"];
    if (!r.is_array() || r.size() != 3)
      throw SchemaViolation("/split/ratios", "expected three ratios");
    for (int i = 0; i < 3; ++i) c.ratios[static_cast<std::size_t>(i)] = r[i];
  }
  if (auto it = j.find("tactics"); it != j.end()) {
    const json& t = *it;
    if (t.contains("mapping")) c.tactic_mapping_file = t["mapping"];
    if (t.contains("patterns")) c.tactic_patterns_file = t["patterns"];
    if (t.contains("bin_width")) c.tactics_bin_width = t["bin_width"];
    if (t.contains("sigma")) c.tactics_sigma = t["sigma"];
  }
  if (j.contains("semantics") && j["semantics"].contains("lexicon"))
    c.lexicon_file = j["semantics"]["lexicon"];
  return c;
}

RunConfig load_run_config(const std::string& path) {
  json merged = json::object();
  std::vector<std::string> chain;
  std::string current = path;
  for (int depth = 0; depth < 16 && !current.empty(); ++depth) {
    chain.push_back(current);
    json j = json::parse(read_file(current));
    std::string include;
    if (j.contains("include")) {
      include = (fs::path(current).parent_path() / j["include"].get<std::string>())
                    .string();
      j.erase("include");
    }
    // nearest file wins: current values overlay what includes provided
    j.update(merged, true);
    merged = std::move(j);
    current = include;
    if (std::count(chain.begin(), chain.end(), current) > 0)
      throw InvalidParameter("config include cycle at " + current);
  }
  return RunConfig::from_json(merged);
}

// --- validate -------------------------------------------------------------

int cmd_validate(const std::string& annotations_dir, const std::string& out_file) {
  try {
    auto files = annotation_files(annotations_dir);
    OutputGuard guard;
    json report = json::array();
    bool any_error = false;
    for (const auto& file : files) {
      json entry;
      entry["file"] = file.filename().string();
      json violations = json::array();
      try {
        MatchRecord m = parse_match(read_file(file));
        for (const auto& v : validate_match(m)) {
          violations.push_back({{"severity", to_string(v.severity)},
                                {"rule_id", v.rule_id},
                                {"path", v.path},
                                {"message", v.message}});
          if (v.severity == Severity::error) any_error = true;
        }
      } catch (const MalformedDocument& e) {
        violations.push_back({{"severity", "error"},
                              {"rule_id", "parse-error"},
                              {"path", ""},
                              {"message", e.what()}});
        any_error = true;
      } catch (const SchemaViolation& e) {
        violations.push_back({{"severity", "error"},
                              {"rule_id", "schema-violation"},
                              {"path", e.path},
                              {"message", e.what()}});
        any_error = true;
      }
      entry["violations"] = std::move(violations);
      report.push_back(std::move(entry));
    }
    if (!out_file.empty()) guard.write(out_file, report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    guard.disarm();
    return any_error ? kDomainFailure : kOk;
  } catch (const std::exception& e) {
    return report_error(e, kUsageFailure);
  }
}

// --- stats ----------------------------------------------------------------

int cmd_stats(const std::string& annotations_dir, const std::string& out_dir) {
  try {
    std::vector<MatchRecord> matches;
    for (const auto& file : annotation_files(annotations_dir))
      matches.push_back(parse_match(read_file(file)));

    OutputGuard guard;
    StatsReport report = dataset_stats(matches);
    const std::string table = render_stats_table(report);
    std::cout << table;
    if (!out_dir.empty()) {
      guard.write(fs::path(out_dir) / "stats.json", stats_to_json(report).dump(2) + "\n");
      guard.write(fs::path(out_dir) / "stats.txt", table);
      CaptionStats cs = caption_stats(matches);
      guard.write(fs::path(out_dir) / "caption_stats.json",
                  caption_stats_to_json(cs).dump(2) + "\n");
    }
    guard.disarm();
    return kOk;
  } catch (const IoError& e) {
    return report_error(e, kUsageFailure);
  } catch (const std::exception& e) {
    return report_error(e, kDomainFailure);
  }
}

// --- tactics ----------------------------------------------------------------

int cmd_tactics(const RunConfig& config) {
  try {
    if (config.out_dir.empty()) throw IoError("tactics: no output directory");
    TacticMapping mapping = config.tactic_mapping_file.empty()
                                ? default_tactic_mapping()
                                : tactic_mapping_from_json(json::parse(
                                      read_file(config.tactic_mapping_file)));
    std::vector<TacticPattern> patterns =
        config.tactic_patterns_file.empty()
            ? default_tactic_patterns()
            : tactic_patterns_from_json(
                  json::parse(read_file(config.tactic_patterns_file)));

    OutputGuard guard;
    for (const auto& file : annotation_files(config.annotations_dir)) {
      MatchRecord m = parse_match(read_file(file));
      auto occurrences = match_occurrences(m, mapping, patterns);
      const double duration =
          static_cast<double>(m.total_frames) / m.fps;
      auto curves = intensity_curves(occurrences, duration,
                                     config.tactics_bin_width, config.tactics_sigma);
      const fs::path base = fs::path(config.out_dir) / m.match_id;
      guard.write(base.string() + "_curves.csv", curves_to_csv(curves));
      guard.write(base.string() + "_curves.svg",
                  curves_to_svg(curves, m.match_id));
      json meta = {{"match_id", m.match_id},
                   {"occurrences", occurrences.size()},
                   {"bin_width_seconds", config.tactics_bin_width},
                   {"kernel_sigma_seconds", config.tactics_sigma},
                   {"smoothing", "gaussian, unit-mass kernel, reflected bounds"}};
      guard.write(base.string() + "_meta.json", meta.dump(2) + "\n");
    }
    guard.disarm();
    return kOk;
  } catch (const IoError& e) {
    return report_error(e, kUsageFailure);
  } catch (const std::exception& e) {
    return report_error(e, kDomainFailure);
  }
}

// --- synth -----------------------------------------------------------------

int cmd_synth(const std::string& out_dir, int samples, std::uint64_t seed,
              bool write_clips) {
  try {
    if (out_dir.empty()) throw IoError("synth: no output directory");
    SynthOptions opts;
    opts.seed = seed;
    opts.samples = samples;
    opts.write_clips = write_clips;
    Corpus corpus = synth_generate(opts, out_dir);
    std::cout << "generated " << samples << " samples across "
              << corpus.matches.size() << " matches in " << out_dir << "\n";
    return kOk;
  } catch (const std::exception& e) {
    return report_error(e, kUsageFailure);
  }
}

// --- train -------------------------------------------------------------------

namespace {

struct LoadedDataset {
  Corpus corpus;
  Vocabulary vocab;
  std::vector<ShotSample> samples;
  DatasetSplit split;
};

LoadedDataset load_dataset(const RunConfig& config, bool vocab_from_file,
                           const std::string& vocab_path) {
  for (const std::string& dir :
       {config.annotations_dir, config.modalities_dir, config.clips_dir}) {
    if (dir.empty() || !fs::is_directory(dir))
      throw IoError("dataset directory missing: " + (dir.empty() ? "<unset>" : dir));
  }
  if (!config.seed) throw InvalidParameter("a seed is required for train/eval runs");

  LoadedDataset d;
  d.corpus = load_corpus(config.annotations_dir, config.modalities_dir,
                         config.clips_dir);
  if (vocab_from_file) {
    d.vocab = Vocabulary::from_json(json::parse(read_file(vocab_path)));
  } else {
    d.vocab = Vocabulary::build(corpus_captions(d.corpus));
  }
  d.samples = build_corpus_samples(d.corpus, d.vocab, lexicon_for(config),
                                   static_cast<int>(config.model.max_len));
  d.split = split_dataset(d.samples, config.ratios, *config.seed);
  return d;
}

}  // namespace

int cmd_train(const RunConfig& config) {
  try {
    if (config.out_dir.empty()) throw IoError("train: no output directory");
    LoadedDataset d = load_dataset(config, false, "");

    ModelConfig mc = config.model;
    mc.vocab_size = d.vocab.size();
    mc.init_seed = *config.seed;
    CaptionModel<float> model(mc);

    OutputGuard guard;
    guard.write(fs::path(config.out_dir) / "vocab.json", d.vocab.to_json().dump() + "\n");
    guard.write(fs::path(config.out_dir) / "run_config.json",
                config.to_json().dump(2) + "\n");

    TrainOptions topts;
    topts.epochs = config.epochs;
    topts.batch_size = config.batch;
    topts.lr = config.lr;
    topts.weight_decay = config.weight_decay;
    topts.seed = *config.seed;
    topts.max_steps = config.max_steps;
    topts.target_train_cap = config.target_train_cap;
    topts.log_path = (fs::path(config.out_dir) / "train_log.jsonl").string();
    topts.checkpoint_dir = config.out_dir;
    guard.track(topts.log_path);
    guard.track(fs::path(config.out_dir) / "best.ckpt");
    guard.track(fs::path(config.out_dir) / "last.ckpt");

    TrainResult r = train_model(model, d.samples, d.split, file_clip_loader(), topts);

    json summary = {{"steps", r.steps},
                    {"final_train_cap", r.final_train_cap},
                    {"best_val_total", r.best_val_total},
                    {"best_checkpoint", r.best_checkpoint},
                    {"last_checkpoint", r.last_checkpoint},
                    {"train_samples", d.split.train.size()},
                    {"val_samples", d.split.val.size()},
                    {"test_samples", d.split.test.size()},
                    {"vocab_size", d.vocab.size()}};
    guard.write(fs::path(config.out_dir) / "train_summary.json",
                summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    guard.disarm();
    return kOk;
  } catch (const IoError& e) {
    return report_error(e, kUsageFailure);
  } catch (const std::exception& e) {
    return report_error(e, kDomainFailure);
  }
}

// --- eval ---------------------------------------------------------------------

int cmd_eval(const RunConfig& config, const std::string& checkpoint_path) {
  try {
    if (config.out_dir.empty()) throw IoError("eval: no output directory");
    if (!fs::exists(checkpoint_path))
      throw IoError("checkpoint not found: " + checkpoint_path);

    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const std::string vocab_path =
        (fs::path(checkpoint_path).parent_path() / "vocab.json").string();
    LoadedDataset d = load_dataset(config, true, vocab_path);
    if (ckpt.config.vocab_size != d.vocab.size())
      throw InvalidParameter("checkpoint vocabulary does not match dataset");

    if (d.split.test.empty())
      throw InvalidParameter(
          "test split is empty; adjust split ratios or corpus size");

    CaptionModel<float> model = model_from_checkpoint(ckpt);
    EvalOutputs outputs = evaluate_model(model, d.samples, d.split.test,
                                         file_clip_loader(), d.vocab);

    OutputGuard guard;
    json result = {{"metrics", metric_report_to_json(outputs.metrics)},
                   {"semantic_f1", outputs.semantic_f1},
                   {"token_exact", outputs.token_exact},
                   {"test_samples", d.split.test.size()},
                   {"meta",
                    {{"metrics_version", kMetricsVersion},
                     {"checkpoint", fs::path(checkpoint_path).filename().string()},
                     {"seed", *config.seed}}}};
    guard.write(fs::path(config.out_dir) / "metrics.json", result.dump(2) + "\n");

    std::string generations;
    for (std::size_t i = 0; i < d.split.test.size(); ++i) {
      const ShotSample& s = d.samples[d.split.test[i]];
      json line = {{"match_id", s.match_id},
                   {"rally_id", s.rally_id},
                   {"hit_index", s.hit_index},
                   {"reference", s.caption},
                   {"generated", outputs.generated[i]}};
      generations += line.dump() + "\n";
    }
    guard.write(fs::path(config.out_dir) / "generations.jsonl", generations);
    std::cout << render_metric_report(outputs.metrics);
    guard.disarm();
    return kOk;
  } catch (const IoError& e) {
    return report_error(e, kUsageFailure);
  } catch (const std::exception& e) {
    return report_error(e, kDomainFailure);
  }
}

// --- caption -------------------------------------------------------------------

int cmd_caption(const RunConfig& config, const std::string& checkpoint_path,
                long sample_index) {
  try {
    if (!fs::exists(checkpoint_path))
      throw IoError("checkpoint not found: " + checkpoint_path);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const std::string vocab_path =
        (fs::path(checkpoint_path).parent_path() / "vocab.json").string();
    LoadedDataset d = load_dataset(config, true, vocab_path);
    if (sample_index < 0 || sample_index >= static_cast<long>(d.samples.size()))
      throw InvalidParameter("sample index out of range (have " +
                             std::to_string(d.samples.size()) + ")");

    CaptionModel<float> model = model_from_checkpoint(ckpt);
    const ShotSample& s = d.samples[static_cast<std::size_t>(sample_index)];
    ClipTensor clip = read_clip(s.clip_path);
    const ShotSample* sample_ptr = &s;
    const ClipTensor* clip_ptr = &clip;
    auto in = model.make_input({&sample_ptr, 1}, {&clip_ptr, 1}, false);
    auto fused = model.encode_for_generation(in);
    auto ids = model.generate(fused, static_cast<int>(model.config().max_len));
    std::cout << d.vocab.decode(ids) << "\n";
    return kOk;
  } catch (const IoError& e) {
    return report_error(e, kUsageFailure);
  } catch (const std::exception& e) {
    return report_error(e, kDomainFailure);
  }
}

}  // namespace bfmd::cli
