// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace bfmd {

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << content;
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext)
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string clip_relative_path(const std::string& match_id,
                               const std::string& rally_id, int hit_index) {
  return match_id + "/" + rally_id + "_h" + std::to_string(hit_index) + ".clip";
}

void save_corpus(const Corpus& corpus, const std::string& annotations_dir,
                 const std::string& modalities_dir) {
  for (const auto& m : corpus.matches) {
    write_file(fs::path(annotations_dir) / (m.match_id + ".json"),
               serialize_match(m));
  }
  for (const auto& [key, track] : corpus.tracks) {
    auto slash = key.find('/');
    const std::string match_id = key.substr(0, slash);
    write_file(fs::path(modalities_dir) / match_id / (track.rally_id + ".json"),
               modality_to_json(track).dump(2));
  }
}

Corpus load_corpus(const std::string& annotations_dir,
                   const std::string& modalities_dir,
                   const std::string& clips_dir) {
  Corpus corpus;
  corpus.clips_dir = clips_dir;
  for (const auto& path : sorted_files(annotations_dir, ".json")) {
    corpus.matches.push_back(parse_match(read_file(path)));
  }
  for (const auto& m : corpus.matches) {
    for (const auto& r : m.rallies) {
      fs::path p = fs::path(modalities_dir) / m.match_id / (r.rally_id + ".json");
      if (!fs::exists(p)) continue;  // samples without modality files are skipped
      corpus.tracks[m.match_id + "/" + r.rally_id] =
          modality_from_json(json::parse(read_file(p)));
    }
  }
  return corpus;
}

std::vector<std::string> corpus_captions(const Corpus& corpus) {
  std::vector<std::string> captions;
  for (const auto& m : corpus.matches) {
    for (const auto& r : m.rallies) {
      for (const auto& h : r.hits) captions.push_back(h.shot.caption);
    }
  }
  return captions;
}

std::vector<ShotSample> build_corpus_samples(const Corpus& corpus,
                                             const Vocabulary& vocab,
                                             const SemanticLexicon& lexicon,
                                             int max_tokens) {
  std::vector<ShotSample> samples;
  for (const auto& m : corpus.matches) {
    for (std::size_t ri = 0; ri < m.rallies.size(); ++ri) {
      const auto& rally = m.rallies[ri];
      auto it = corpus.tracks.find(m.match_id + "/" + rally.rally_id);
      if (it == corpus.tracks.end()) continue;
      for (std::size_t hi = 0; hi < rally.hits.size(); ++hi) {
        std::string clip_path;
        if (!corpus.clips_dir.empty()) {
          clip_path = (fs::path(corpus.clips_dir) /
                       clip_relative_path(m.match_id, rally.rally_id,
                                          static_cast<int>(hi)))
                          .string();
        }
        samples.push_back(build_sample(m, ri, hi, it->second, clip_path, vocab,
                                       lexicon, max_tokens));
      }
    }
  }
  return samples;
}

}  // namespace bfmd
