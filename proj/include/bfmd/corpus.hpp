// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// A corpus on disk is three sibling trees:
//   annotations/<match_id>.json            one match document per file
//   modalities/<match_id>/<rally_id>.json  one sidecar per rally
//   clips/<match_id>/<rally>_h<hit>.clip   one pixel container per shot
// Directory scans are sorted so loading order is reproducible.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "bfmd/annotation.hpp"
#include "bfmd/pipeline.hpp"

namespace bfmd {

struct Corpus {
  std::vector<MatchRecord> matches;
  std::map<std::string, ModalityTrack> tracks;  // keyed "<match_id>/<rally_id>"
  std::string clips_dir;  // root of the clip tree ("" when clips not on disk)
};

std::string clip_relative_path(const std::string& match_id,
                               const std::string& rally_id, int hit_index);

void save_corpus(const Corpus& corpus, const std::string& annotations_dir,
                 const std::string& modalities_dir);

Corpus load_corpus(const std::string& annotations_dir,
                   const std::string& modalities_dir,
                   const std::string& clips_dir);

std::vector<std::string> corpus_captions(const Corpus& corpus);

// Builds one ShotSample per hit, in match/rally/hit order.
std::vector<ShotSample> build_corpus_samples(const Corpus& corpus,
                                             const Vocabulary& vocab,
                                             const SemanticLexicon& lexicon,
                                             int max_tokens = kMaxCaptionTokens);

}  // namespace bfmd
