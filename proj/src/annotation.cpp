// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "bfmd/annotation.hpp"

#include <algorithm>
#include <cmath>

namespace bfmd {

namespace {

const char* kDisciplineNames[] = {"singles", "doubles"};
const char* kSegmentKindNames[] = {"rally", "replay", "hawkeye"};
const char* kPlayerSlotNames[] = {"near", "far"};
const char* kShotTypeNames[] = {"serve",  "long_serve", "smash", "clear",
                                "drop",   "push",       "net_shot",
                                "net_kill", "lift",     "drive", "block",
                                "press"};

template <typename E, std::size_t N>
std::optional<E> from_name(const char* (&names)[N], const std::string& s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  return std::nullopt;
}

}  // namespace

const char* to_string(Discipline d) { return kDisciplineNames[static_cast<int>(d)]; }
const char* to_string(SegmentKind k) { return kSegmentKindNames[static_cast<int>(k)]; }
const char* to_string(PlayerSlot s) { return kPlayerSlotNames[static_cast<int>(s)]; }
const char* to_string(ShotType t) { return kShotTypeNames[static_cast<int>(t)]; }
const char* to_string(Severity s) { return s == Severity::warn ? "warn" : "error"; }

std::optional<Discipline> discipline_from_string(const std::string& s) {
  return from_name<Discipline>(kDisciplineNames, s);
}
std::optional<SegmentKind> segment_kind_from_string(const std::string& s) {
  return from_name<SegmentKind>(kSegmentKindNames, s);
}
std::optional<PlayerSlot> player_slot_from_string(const std::string& s) {
  return from_name<PlayerSlot>(kPlayerSlotNames, s);
}
std::optional<ShotType> shot_type_from_string(const std::string& s) {
  return from_name<ShotType>(kShotTypeNames, s);
}

bool ShotAnnotation::operator==(const ShotAnnotation& o) const {
  return shot_type == o.shot_type && caption == o.caption &&
         semantic_target == o.semantic_target && extras == o.extras;
}

bool HitEvent::operator==(const HitEvent& o) const {
  return frame == o.frame && player_slot == o.player_slot && shot == o.shot &&
         extras == o.extras;
}

bool RallyRecord::operator==(const RallyRecord& o) const {
  return rally_id == o.rally_id && hits == o.hits && net_hits == o.net_hits &&
         landings == o.landings && winner_side == o.winner_side &&
         extras == o.extras;
}

bool Segment::operator==(const Segment& o) const {
  return kind == o.kind && start_frame == o.start_frame &&
         end_frame == o.end_frame && extras == o.extras;
}

bool MatchRecord::operator==(const MatchRecord& o) const {
  return match_id == o.match_id && discipline == o.discipline &&
         fps == o.fps && total_frames == o.total_frames &&
         segments == o.segments && rallies == o.rallies && extras == o.extras;
}

std::vector<const Segment*> MatchRecord::rally_segments() const {
  std::vector<const Segment*> out;
  for (const auto& s : segments) {
    if (s.kind == SegmentKind::rally) out.push_back(&s);
  }
  return out;
}

// --- Parsing ---------------------------------------------------------------

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw SchemaViolation(path, msg);
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing required field");
  return *it;
}

std::string require_string(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_string()) fail(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

std::int64_t require_int(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_number_integer()) fail(path + "/" + key, "expected an integer");
  return v.get<std::int64_t>();
}

double require_number(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_number()) fail(path + "/" + key, "expected a number");
  return v.get<double>();
}

const json& require_array(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_array()) fail(path + "/" + key, "expected an array");
  return v;
}

// Copies fields not in `known` into an extras object (null if none).
json collect_extras(const json& obj, std::initializer_list<const char*> known) {
  json extras = json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) {
      if (it.key() == k) {
        is_known = true;
        break;
      }
    }
    if (!is_known) extras[it.key()] = it.value();
  }
  return extras.empty() ? json() : extras;
}

ShotAnnotation parse_shot(const json& j, const std::string& path) {
  ShotAnnotation shot;
  std::string type_name = require_string(j, path, "shot_type");
  auto type = shot_type_from_string(type_name);
  if (!type) fail(path + "/shot_type", "unknown shot type \"" + type_name + "\"");
  shot.shot_type = *type;
  shot.caption = require_string(j, path, "caption");
  if (auto it = j.find("semantic_target"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != SemanticVector::kDim)
      fail(path + "/semantic_target", "expected an array of 22 binary flags");
    SemanticVector v;
    for (int i = 0; i < SemanticVector::kDim; ++i) {
      const json& b = (*it)[i];
      if (!b.is_number_integer() || (b.get<int>() != 0 && b.get<int>() != 1))
        fail(path + "/semantic_target/" + std::to_string(i), "expected 0 or 1");
      v.bits[i] = static_cast<std::uint8_t>(b.get<int>());
    }
    shot.semantic_target = v;
  }
  shot.extras = collect_extras(j, {"shot_type", "caption", "semantic_target"});
  return shot;
}

HitEvent parse_hit(const json& j, const std::string& path) {
  HitEvent hit;
  hit.frame = require_int(j, path, "frame");
  std::string slot_name = require_string(j, path, "player_slot");
  auto slot = player_slot_from_string(slot_name);
  if (!slot) fail(path + "/player_slot", "unknown player slot \"" + slot_name + "\"");
  hit.player_slot = *slot;
  const json& shot = require(j, path, "shot");
  hit.shot = parse_shot(shot, path + "/shot");
  hit.extras = collect_extras(j, {"frame", "player_slot", "shot"});
  return hit;
}

RallyRecord parse_rally(const json& j, const std::string& path) {
  RallyRecord rally;
  rally.rally_id = require_string(j, path, "rally_id");
  const json& hits = require_array(j, path, "hits");
  for (std::size_t i = 0; i < hits.size(); ++i) {
    rally.hits.push_back(parse_hit(hits[i], path + "/hits/" + std::to_string(i)));
  }
  if (auto it = j.find("net_hits"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) fail(path + "/net_hits", "expected an array of frame indices");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& f = (*it)[i];
      if (!f.is_number_integer())
        fail(path + "/net_hits/" + std::to_string(i), "expected an integer");
      rally.net_hits.push_back(f.get<std::int64_t>());
    }
  }
  if (auto it = j.find("landing"); it != j.end() && !it->is_null()) {
    // Canonical form is int|null. An array is accepted leniently so that
    // multi-landing data reaches the validator instead of failing the parse.
    if (it->is_number_integer()) {
      rally.landings.push_back(it->get<std::int64_t>());
    } else if (it->is_array()) {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const json& f = (*it)[i];
        if (!f.is_number_integer())
          fail(path + "/landing/" + std::to_string(i), "expected an integer");
        rally.landings.push_back(f.get<std::int64_t>());
      }
    } else {
      fail(path + "/landing", "expected an integer or null");
    }
  }
  if (auto it = j.find("winner_side"); it != j.end() && !it->is_null()) {
    if (!it->is_string() || !player_slot_from_string(it->get<std::string>()))
      fail(path + "/winner_side", "expected \"near\" or \"far\"");
    rally.winner_side = it->get<std::string>();
  }
  rally.extras = collect_extras(
      j, {"rally_id", "hits", "net_hits", "landing", "winner_side"});
  return rally;
}

Segment parse_segment(const json& j, const std::string& path) {
  Segment seg;
  std::string kind_name = require_string(j, path, "kind");
  auto kind = segment_kind_from_string(kind_name);
  if (!kind) fail(path + "/kind", "unknown segment kind \"" + kind_name + "\"");
  seg.kind = *kind;
  seg.start_frame = require_int(j, path, "start_frame");
  seg.end_frame = require_int(j, path, "end_frame");
  seg.extras = collect_extras(j, {"kind", "start_frame", "end_frame"});
  return seg;
}

}  // namespace

MatchRecord parse_match(const std::string& document) {
  json j;
  try {
    j = json::parse(document);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("", "top level must be an object");

  MatchRecord m;
  m.match_id = require_string(j, "", "match_id");
  std::string disc_name = require_string(j, "", "discipline");
  auto disc = discipline_from_string(disc_name);
  if (!disc) fail("/discipline", "unknown discipline \"" + disc_name + "\"");
  m.discipline = *disc;
  m.fps = require_number(j, "", "fps");
  m.total_frames = require_int(j, "", "total_frames");

  const json& segments = require_array(j, "", "segments");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    m.segments.push_back(parse_segment(segments[i], "/segments/" + std::to_string(i)));
  }
  const json& rallies = require_array(j, "", "rallies");
  for (std::size_t i = 0; i < rallies.size(); ++i) {
    m.rallies.push_back(parse_rally(rallies[i], "/rallies/" + std::to_string(i)));
  }
  m.extras = collect_extras(
      j, {"match_id", "discipline", "fps", "total_frames", "segments", "rallies"});
  return m;
}

// --- Serialization -----------------------------------------------------------

namespace {

json base_object(const json& extras) {
  return extras.is_object() ? extras : json::object();
}

json shot_to_json(const ShotAnnotation& s) {
  json j = base_object(s.extras);
  j["shot_type"] = to_string(s.shot_type);
  j["caption"] = s.caption;
  if (s.semantic_target) {
    json bits = json::array();
    for (auto b : s.semantic_target->bits) bits.push_back(static_cast<int>(b));
    j["semantic_target"] = bits;
  }
  return j;
}

json hit_to_json(const HitEvent& h) {
  json j = base_object(h.extras);
  j["frame"] = h.frame;
  j["player_slot"] = to_string(h.player_slot);
  j["shot"] = shot_to_json(h.shot);
  return j;
}

json rally_to_json(const RallyRecord& r) {
  json j = base_object(r.extras);
  j["rally_id"] = r.rally_id;
  json hits = json::array();
  for (const auto& h : r.hits) hits.push_back(hit_to_json(h));
  j["hits"] = std::move(hits);
  j["net_hits"] = r.net_hits;
  // int|null for valid records; the lenient array form round-trips records
  // that violate the at-most-one invariant.
  if (r.landings.empty()) {
    j["landing"] = json();
  } else if (r.landings.size() == 1) {
    j["landing"] = r.landings.front();
  } else {
    j["landing"] = r.landings;
  }
  if (r.winner_side) j["winner_side"] = *r.winner_side;
  return j;
}

json segment_to_json(const Segment& s) {
  json j = base_object(s.extras);
  j["kind"] = to_string(s.kind);
  j["start_frame"] = s.start_frame;
  j["end_frame"] = s.end_frame;
  return j;
}

}  // namespace

json match_to_json(const MatchRecord& m) {
  json j = base_object(m.extras);
  j["match_id"] = m.match_id;
  j["discipline"] = to_string(m.discipline);
  j["fps"] = m.fps;
  j["total_frames"] = m.total_frames;
  json segments = json::array();
  for (const auto& s : m.segments) segments.push_back(segment_to_json(s));
  j["segments"] = std::move(segments);
  json rallies = json::array();
  for (const auto& r : m.rallies) rallies.push_back(rally_to_json(r));
  j["rallies"] = std::move(rallies);
  return j;
}

std::string serialize_match(const MatchRecord& m, int indent) {
  return match_to_json(m).dump(indent);
}

// --- Validation --------------------------------------------------------------

namespace {

void add(std::vector<Violation>& out, Severity sev, std::string rule,
         std::string path, std::string msg) {
  out.push_back({sev, std::move(rule), std::move(path), std::move(msg)});
}

// Flags bracketed tokens other than the [PLAYER] anonymization token.
bool has_foreign_bracket_token(const std::string& caption) {
  std::size_t pos = 0;
  while ((pos = caption.find('[', pos)) != std::string::npos) {
    std::size_t end = caption.find(']', pos);
    if (end == std::string::npos) return true;
    if (caption.substr(pos, end - pos + 1) != "[PLAYER]") return true;
    pos = end + 1;
  }
  return false;
}

}  // namespace

std::vector<Violation> validate_match(const MatchRecord& m) {
  std::vector<Violation> out;

  if (m.fps <= 0.0)
    add(out, Severity::error, "fps-positive", "/fps", "fps must be positive");

  for (std::size_t i = 0; i < m.segments.size(); ++i) {
    const Segment& s = m.segments[i];
    const std::string path = "/segments/" + std::to_string(i);
    if (s.start_frame >= s.end_frame)
      add(out, Severity::error, "segment-bounds", path,
          "start_frame must be < end_frame");
    if (s.start_frame < 0 || s.end_frame >= m.total_frames)
      add(out, Severity::error, "segment-bounds", path,
          "segment frames must lie in [0, total_frames)");
    if (i > 0) {
      const Segment& prev = m.segments[i - 1];
      if (s.start_frame < prev.start_frame)
        add(out, Severity::error, "segment-order", path,
            "segments must be sorted by start frame");
      else if (s.start_frame <= prev.end_frame)
        add(out, Severity::error, "segment-order", path,
            "segments must not overlap");
    }
  }

  auto rally_segs = m.rally_segments();
  if (rally_segs.size() != m.rallies.size())
    add(out, Severity::error, "rally-segment-count", "/rallies",
        std::to_string(m.rallies.size()) + " rallies but " +
            std::to_string(rally_segs.size()) + " rally segments");

  for (std::size_t ri = 0; ri < m.rallies.size(); ++ri) {
    const RallyRecord& r = m.rallies[ri];
    const std::string rpath = "/rallies/" + std::to_string(ri);
    const Segment* seg = ri < rally_segs.size() ? rally_segs[ri] : nullptr;

    auto in_span = [&](std::int64_t frame) {
      return seg && frame >= seg->start_frame && frame <= seg->end_frame;
    };

    if (r.hits.empty())
      add(out, Severity::warn, "rally-empty", rpath, "rally has no hits");

    for (std::size_t hi = 0; hi < r.hits.size(); ++hi) {
      const HitEvent& h = r.hits[hi];
      const std::string hpath = rpath + "/hits/" + std::to_string(hi);
      if (hi > 0 && h.frame <= r.hits[hi - 1].frame)
        add(out, Severity::error, "hits-sorted", hpath,
            "hit frames must be strictly increasing");
      if (seg && !in_span(h.frame))
        add(out, Severity::error, "event-in-span", hpath,
            "hit frame " + std::to_string(h.frame) + " outside rally segment");
      if (hi > 0 && h.player_slot == r.hits[hi - 1].player_slot)
        add(out, Severity::warn, "player-alternation", hpath,
            "consecutive hits by the same player slot");
      if (h.shot.caption.empty())
        add(out, Severity::error, "shot-caption-nonempty", hpath + "/shot/caption",
            "caption must be non-empty");
      else if (has_foreign_bracket_token(h.shot.caption))
        add(out, Severity::warn, "caption-player-token", hpath + "/shot/caption",
            "bracketed tokens other than [PLAYER] in caption");
    }

    for (std::size_t ni = 0; ni < r.net_hits.size(); ++ni) {
      if (seg && !in_span(r.net_hits[ni]))
        add(out, Severity::error, "event-in-span",
            rpath + "/net_hits/" + std::to_string(ni),
            "net hit frame outside rally segment");
    }

    if (r.landings.size() > 1)
      add(out, Severity::error, "landing-at-most-one", rpath + "/landing",
          "rally has " + std::to_string(r.landings.size()) + " landing events");
    for (std::int64_t lf : r.landings) {
      if (seg && !in_span(lf))
        add(out, Severity::error, "event-in-span", rpath + "/landing",
            "landing frame outside rally segment");
    }
  }

  return out;
}

}  // namespace bfmd
