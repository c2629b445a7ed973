// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical match annotation model: a match is segmented into rally /
// replay / hawkeye intervals; each rally carries frame-level hit, net-hit
// and landing events; each hit carries a shot annotation (type + caption).

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bfmd/errors.hpp"

namespace bfmd {

using json = nlohmann::json;

enum class Discipline { singles, doubles };

enum class SegmentKind { rally, replay, hawkeye };

enum class PlayerSlot { near, far };

// The closed set of 12 shot types. Order is significant: it defines the
// shot-category block of SemanticVector.
enum class ShotType {
  serve,
  long_serve,
  smash,
  clear,
  drop,
  push,
  net_shot,
  net_kill,
  lift,
  drive,
  block,
  press,
};

inline constexpr int kNumShotTypes = 12;

const char* to_string(Discipline d);
const char* to_string(SegmentKind k);
const char* to_string(PlayerSlot s);
const char* to_string(ShotType t);

std::optional<Discipline> discipline_from_string(const std::string& s);
std::optional<SegmentKind> segment_kind_from_string(const std::string& s);
std::optional<PlayerSlot> player_slot_from_string(const std::string& s);
std::optional<ShotType> shot_type_from_string(const std::string& s);

// 22 binary attribute flags laid out as
// [12 shot categories | 4 trajectory/intensity | 3 court regions | 3 intents].
struct SemanticVector {
  static constexpr int kCategories = 12;
  static constexpr int kTrajectory = 4;
  static constexpr int kRegion = 3;
  static constexpr int kIntent = 3;
  static constexpr int kDim = kCategories + kTrajectory + kRegion + kIntent;

  static constexpr int kTrajectoryOffset = kCategories;
  static constexpr int kRegionOffset = kCategories + kTrajectory;
  static constexpr int kIntentOffset = kCategories + kTrajectory + kRegion;

  std::array<std::uint8_t, kDim> bits{};

  bool operator==(const SemanticVector&) const = default;

  int count() const {
    int n = 0;
    for (auto b : bits) n += b ? 1 : 0;
    return n;
  }
};

struct ShotAnnotation {
  ShotType shot_type = ShotType::serve;
  std::string caption;
  std::optional<SemanticVector> semantic_target;
  json extras;  // unknown JSON fields, preserved on round-trip

  bool operator==(const ShotAnnotation&) const;
};

struct HitEvent {
  std::int64_t frame = 0;
  PlayerSlot player_slot = PlayerSlot::near;
  ShotAnnotation shot;
  json extras;

  bool operator==(const HitEvent&) const;
};

struct RallyRecord {
  std::string rally_id;
  std::vector<HitEvent> hits;
  std::vector<std::int64_t> net_hits;
  // Wire format carries `landing` as int|null. The in-memory list exists so
  // the at-most-one invariant is checkable rather than true by construction.
  std::vector<std::int64_t> landings;
  std::optional<std::string> winner_side;  // "near" | "far"
  json extras;

  bool operator==(const RallyRecord&) const;
};

struct Segment {
  SegmentKind kind = SegmentKind::rally;
  // Inclusive frame indices, start_frame < end_frame, both < total_frames.
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  json extras;

  bool operator==(const Segment&) const;
};

struct MatchRecord {
  std::string match_id;
  Discipline discipline = Discipline::singles;
  double fps = 0.0;
  std::int64_t total_frames = 0;
  std::vector<Segment> segments;
  std::vector<RallyRecord> rallies;
  json extras;

  bool operator==(const MatchRecord&) const;

  std::vector<const Segment*> rally_segments() const;
};

// --- Parsing / serialization -------------------------------------------

// Throws MalformedDocument on bad JSON and SchemaViolation (with a
// JSON-pointer path) on missing fields / wrong types / closed-enum misses.
// Unknown fields are preserved in each record's `extras`.
MatchRecord parse_match(const std::string& document);

std::string serialize_match(const MatchRecord& m, int indent = 2);
json match_to_json(const MatchRecord& m);

// --- Validation ----------------------------------------------------------

enum class Severity { warn, error };

struct Violation {
  Severity severity = Severity::error;
  std::string rule_id;
  std::string path;  // JSON-pointer into the match document
  std::string message;
};

// Violations are data, not failures: a clean record yields an empty list.
// Hard rules (severity `error`): segment bounds and ordering, rally/segment
// correspondence, events inside their rally span, strictly increasing hit
// frames, at most one landing, non-empty captions. Soft rules (`warn`):
// player-slot alternation, empty rallies, suspicious bracketed tokens.
std::vector<Violation> validate_match(const MatchRecord& m);

const char* to_string(Severity s);

}  // namespace bfmd
