// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/semantics.hpp"

#include "bfmd/text.hpp"

namespace bfmd {

const SemanticLexicon& default_lexicon() {
  static const SemanticLexicon lex = {
      // Trajectory & intensity
      {
          {"high_upward_arc",
           {"high", "upward", "arc", "arcing", "lofted", "rising", "looping"}},
          {"downward_steep",
           {"downward", "steep", "steeply", "descending", "plunging"}},
          {"flat_horizontal", {"flat", "horizontal", "skimming"}},
          {"soft_gentle_controlled",
           {"soft", "softly", "gentle", "gently", "controlled", "delicate",
            "tight"}},
      },
      // Court region
      {
          {"forecourt", {"forecourt", "net area", "front court"}},
          {"mid_court", {"mid-court", "midcourt", "mid court"}},
          {"backcourt", {"backcourt", "back court", "rear court", "baseline"}},
      },
      // Tactical intent
      {
          {"attack_aggressive_finish",
           {"attack", "attacking", "aggressive", "aggressively", "finish",
            "finishing", "kill", "winner"}},
          {"defensive_recover_reset",
           {"defensive", "defensively", "defend", "recover", "recovering",
            "reset", "resetting", "neutralize"}},
          {"pressure_disrupt",
           {"pressure", "pressuring", "disrupt", "disrupting", "rushing",
            "hurry"}},
      },
  };
  return lex;
}

namespace {

std::vector<AttributeDef> attrs_from_json(const json& arr, const char* group,
                                          std::size_t expected) {
  if (!arr.is_array() || arr.size() != expected)
    throw SchemaViolation(std::string("/") + group,
                          "expected an array of " + std::to_string(expected) +
                              " attribute entries");
  std::vector<AttributeDef> out;
  for (const auto& e : arr) {
    AttributeDef def;
    def.name = e.at("name").get<std::string>();
    for (const auto& k : e.at("keywords")) def.keywords.push_back(k.get<std::string>());
    out.push_back(std::move(def));
  }
  return out;
}

json attrs_to_json(const std::vector<AttributeDef>& attrs) {
  json arr = json::array();
  for (const auto& a : attrs) {
    arr.push_back({{"name", a.name}, {"keywords", a.keywords}});
  }
  return arr;
}

// Earliest caption-token index where any keyword of `def` occurs as a
// contiguous token run, or npos when none does.
std::size_t match_position(const std::vector<std::string>& caption_tokens,
                           const AttributeDef& def) {
  std::size_t best = std::string::npos;
  for (const auto& kw : def.keywords) {
    const std::vector<std::string> kw_tokens = tokenize_text(kw);
    if (kw_tokens.empty() || kw_tokens.size() > caption_tokens.size()) continue;
    for (std::size_t i = 0; i + kw_tokens.size() <= caption_tokens.size(); ++i) {
      bool all = true;
      for (std::size_t k = 0; k < kw_tokens.size(); ++k) {
        if (caption_tokens[i + k] != kw_tokens[k]) {
          all = false;
          break;
        }
      }
      if (all) {
        best = std::min(best, i);
        break;
      }
    }
  }
  return best;
}

bool matches(const std::vector<std::string>& caption_tokens,
             const AttributeDef& def) {
  return match_position(caption_tokens, def) != std::string::npos;
}

}  // namespace

SemanticLexicon lexicon_from_json(const json& j) {
  SemanticLexicon lex;
  lex.trajectory = attrs_from_json(j.at("trajectory"), "trajectory",
                                   SemanticVector::kTrajectory);
  lex.region = attrs_from_json(j.at("region"), "region", SemanticVector::kRegion);
  lex.intent = attrs_from_json(j.at("intent"), "intent", SemanticVector::kIntent);
  return lex;
}

json lexicon_to_json(const SemanticLexicon& lex) {
  return {{"trajectory", attrs_to_json(lex.trajectory)},
          {"region", attrs_to_json(lex.region)},
          {"intent", attrs_to_json(lex.intent)}};
}

SemanticVector derive_semantic_vector(const ShotAnnotation& shot,
                                      const SemanticLexicon& lexicon) {
  SemanticVector v;
  v.bits[static_cast<int>(shot.shot_type)] = 1;

  const std::vector<std::string> tokens = tokenize_text(shot.caption);
  auto apply = [&](const std::vector<AttributeDef>& group, int offset) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (matches(tokens, group[i])) v.bits[offset + static_cast<int>(i)] = 1;
    }
  };
  apply(lexicon.trajectory, SemanticVector::kTrajectoryOffset);
  apply(lexicon.intent, SemanticVector::kIntentOffset);

  // The region group is at-most-one; when a caption names several regions the
  // earliest mention wins.
  std::size_t best_pos = std::string::npos;
  int best_region = -1;
  for (std::size_t i = 0; i < lexicon.region.size(); ++i) {
    std::size_t pos = match_position(tokens, lexicon.region[i]);
    if (pos < best_pos) {
      best_pos = pos;
      best_region = static_cast<int>(i);
    }
  }
  if (best_region >= 0) v.bits[SemanticVector::kRegionOffset + best_region] = 1;
  return v;
}

std::vector<std::string> semantic_attribute_names(const SemanticLexicon& lexicon) {
  std::vector<std::string> names;
  for (int i = 0; i < kNumShotTypes; ++i)
    names.push_back(to_string(static_cast<ShotType>(i)));
  for (const auto& a : lexicon.trajectory) names.push_back(a.name);
  for (const auto& a : lexicon.region) names.push_back(a.name);
  for (const auto& a : lexicon.intent) names.push_back(a.name);
  return names;
}

}  // namespace bfmd
