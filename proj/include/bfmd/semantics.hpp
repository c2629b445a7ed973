// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Semantic attribute vocabulary and the rule that derives the 22-flag
// attribute vector for a shot: the shot-category block is the one-hot of the
// annotated shot type; trajectory / court-region / intent flags are set when
// any keyword of that attribute appears (token-wise, case-insensitively) in
// the caption.

#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "bfmd/annotation.hpp"

namespace bfmd {

struct AttributeDef {
  std::string name;
  // Each keyword may be a multi-word phrase; it matches a contiguous run of
  // caption tokens.
  std::vector<std::string> keywords;

  bool operator==(const AttributeDef&) const = default;
};

struct SemanticLexicon {
  std::vector<AttributeDef> trajectory;  // 4 entries
  std::vector<AttributeDef> region;      // 3 entries
  std::vector<AttributeDef> intent;      // 3 entries

  bool operator==(const SemanticLexicon&) const = default;
};

// The bundled lexicon; data/semantic_lexicon.json carries the same content
// as an overridable file.
const SemanticLexicon& default_lexicon();

SemanticLexicon lexicon_from_json(const json& j);
json lexicon_to_json(const SemanticLexicon& lex);

SemanticVector derive_semantic_vector(const ShotAnnotation& shot,
                                      const SemanticLexicon& lexicon);

// Flat list of the 22 attribute names in bit order (categories first).
std::vector<std::string> semantic_attribute_names(const SemanticLexicon& lexicon);

}  // namespace bfmd
