// Copyright (c) 2026 BFMD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "bfmd/clip_io.hpp"
#include "bfmd/pipeline.hpp"
#include "bfmd/rng.hpp"
#include "bfmd/text.hpp"
#include "test_support.hpp"

using namespace bfmd;

TEST_CASE("clip window away from boundaries") {
  auto w = clip_window(100, 0, 100000);
  REQUIRE(w.size() == 16);
  CHECK(w.front() == 97);
  CHECK(w[3] == 100);
  CHECK(w.back() == 112);
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] == w[i - 1] + 1);
}

TEST_CASE("clip window clamps at segment start") {
  auto w = clip_window(1, 0, 100000);
  std::array<std::int64_t, 16> expected = {0, 0, 0, 1, 2, 3, 4, 5,
                                           6, 7, 8, 9, 10, 11, 12, 13};
  CHECK(w == expected);
}

TEST_CASE("clip window clamps at segment end") {
  const std::int64_t end = 5000;
  auto w = clip_window(end, 0, end);
  for (int i = 4; i < 16; ++i) CHECK(w[static_cast<std::size_t>(i)] == end);
  CHECK(w[0] == end - 3);
}

TEST_CASE("clip window is monotone and in bounds for fuzzed inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::int64_t lo = static_cast<std::int64_t>(rng.next_below(1000));
    const std::int64_t hi = lo + 1 + static_cast<std::int64_t>(rng.next_below(200));
    const std::int64_t hit = lo + static_cast<std::int64_t>(rng.next_below(
                                      static_cast<std::uint64_t>(hi - lo + 1)));
    auto w = clip_window(hit, lo, hi);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i] >= lo);
      CHECK(w[i] <= hi);
      if (i) CHECK(w[i] >= w[i - 1]);
    }
  }
}

TEST_CASE("position from bbox") {
  CHECK(position_from_bbox({10, 20, 30, 60}) == Point{20, 60});
  CHECK(position_from_bbox({5, 5, 5, 5}) == Point{5, 5});
  CHECK(position_from_bbox({0, 0, 224, 224}) == Point{112, 224});
  CHECK_THROWS_AS(position_from_bbox({30, 20, 10, 60}), DegenerateBox);
  CHECK_THROWS_AS(position_from_bbox({10, 60, 30, 20}), DegenerateBox);
}

TEST_CASE("vocabulary encode matches the documented example") {
  std::vector<std::string> captions = {"[PLAYER] hits a smash."};
  Vocabulary v = Vocabulary::build(captions);
  auto ids = v.encode("[PLAYER] hits a smash.");
  REQUIRE(ids.size() == 7);
  CHECK(ids.front() == Vocabulary::kBos);
  CHECK(ids.back() == Vocabulary::kEos);
  CHECK(v.token(ids[1]) == "[PLAYER]");
  CHECK(v.token(ids[4]) == "smash");
  CHECK(v.token(ids[5]) == ".");
  CHECK(v.decode(ids) == "[PLAYER] hits a smash.");
}

TEST_CASE("empty caption encodes to BOS EOS") {
  Vocabulary v;
  auto ids = v.encode("");
  CHECK(ids == std::vector<int>{Vocabulary::kBos, Vocabulary::kEos});
}

TEST_CASE("out-of-vocabulary words round trip as the UNK surface") {
  std::vector<std::string> captions = {"known words only"};
  Vocabulary v = Vocabulary::build(captions);
  auto ids = v.encode("known mystery");
  CHECK(ids[2] == Vocabulary::kUnk);
  CHECK(v.decode(ids) == "known <unk>");
}

TEST_CASE("tokenize/detokenize round trip preserves normalized text") {
  Rng rng(23);
  const char* pieces[] = {"Smash", "net-shot", "[PLAYER]", "a", "the",
                          "clear!", "drop,", "fast.", "mid-court", "B4ck"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const int len = 1 + static_cast<int>(rng.next_below(10));
    for (int i = 0; i < len; ++i) {
      if (i) s += rng.next_below(5) ? " " : "  ";
      s += pieces[rng.next_below(std::size(pieces))];
    }
    Vocabulary v = Vocabulary::build(std::vector<std::string>{s});
    const std::string normalized = detokenize_text(tokenize_text(s));
    CHECK(v.decode(v.encode(s)) == normalized);
    // idempotent once normalized
    CHECK(detokenize_text(tokenize_text(normalized)) == normalized);
  }
}

TEST_CASE("vocabulary ids are insertion-stable and json round trips") {
  std::vector<std::string> captions = {"alpha beta beta gamma", "beta gamma delta"};
  Vocabulary v = Vocabulary::build(captions);
  Vocabulary w = Vocabulary::from_json(v.to_json());
  CHECK(w.size() == v.size());
  CHECK(w.id("beta") == v.id("beta"));
  CHECK(w.id("delta") == v.id("delta"));
}

namespace {

ModalityTrack track_for(const MatchRecord& m, bool drop_shuttle_frames = false,
                        int drop_player_after = -1) {
  ModalityTrack t;
  t.rally_id = m.rallies[0].rally_id;
  const Segment& seg = m.segments[0];
  for (std::int64_t f = seg.start_frame; f <= seg.end_frame; ++f) {
    FrameModalities fm;
    fm.frame = f;
    PlayerFrame near;
    near.bbox = {100, 150, 130, 200};
    for (int k = 0; k < kDefaultPosePoints; ++k)
      near.pose.push_back({110.0 + k, 160.0 + k});
    PlayerFrame far = near;
    far.bbox = {90, 30, 112, 70};
    fm.near = near;
    fm.far = far;
    if (drop_player_after >= 0 && f >= seg.start_frame + drop_player_after)
      fm.near.reset();
    if (!(drop_shuttle_frames && (f % 4 == 0))) fm.shuttle = Point{50.0, 60.0 + f % 50};
    t.frames.push_back(fm);
  }
  return t;
}

}  // namespace

TEST_CASE("build_sample produces a full window and 22-dim target") {
  MatchRecord m = test::small_match();
  auto track = track_for(m);
  Vocabulary v = Vocabulary::build(std::vector<std::string>{
      m.rallies[0].hits[0].shot.caption, m.rallies[0].hits[1].shot.caption});
  ShotSample s = build_sample(m, 0, 1, track, "clip.bin", v, default_lexicon());
  CHECK(s.frame_window[3] == 150);
  CHECK(s.caption_tokens.front() == Vocabulary::kBos);
  CHECK(s.caption_tokens.back() == Vocabulary::kEos);
  CHECK(s.caption_tokens.size() <= kMaxCaptionTokens);
  CHECK(s.semantic_target.bits[static_cast<int>(ShotType::smash)] == 1);
  for (int i = 0; i < kClipFrames; ++i) {
    CHECK(s.modalities.players_present[static_cast<std::size_t>(i)]);
    // bottom-center rule
    CHECK(s.modalities.position[static_cast<std::size_t>(i)][0] ==
          doctest::Approx(115.0));
    CHECK(s.modalities.position[static_cast<std::size_t>(i)][1] ==
          doctest::Approx(200.0));
  }
}

TEST_CASE("missing shuttle frames set the mask but build fine") {
  MatchRecord m = test::small_match();
  auto track = track_for(m, /*drop_shuttle_frames=*/true);
  Vocabulary v;
  ShotSample s = build_sample(m, 0, 0, track, "", v, default_lexicon());
  int missing = 0;
  for (bool present : s.modalities.shuttle_present) missing += present ? 0 : 1;
  CHECK(missing > 0);
  CHECK(missing < kClipFrames);
}

TEST_CASE("player gap beyond 8 of 16 frames is a ModalityGap") {
  MatchRecord m = test::small_match();
  // near player disappears from frame start+23 on; hit at 150 has window
  // [147..162], segment starts at 100, so >8 frames lack the near bbox.
  auto track = track_for(m, false, /*drop_player_after=*/23);
  Vocabulary v;
  CHECK_THROWS_AS(build_sample(m, 0, 1, track, "", v, default_lexicon()),
                  ModalityGap);
}

TEST_CASE("modality sidecar json round trips") {
  MatchRecord m = test::small_match();
  auto track = track_for(m, true);
  ModalityTrack again = modality_from_json(modality_to_json(track));
  CHECK(again.rally_id == track.rally_id);
  REQUIRE(again.frames.size() == track.frames.size());
  CHECK(again.frames == track.frames);
}

TEST_CASE("split_dataset dividing ten rallies as 7/2/1") {
  std::vector<ShotSample> samples;
  for (int r = 0; r < 10; ++r) {
    for (int h = 0; h < 3; ++h) {
      ShotSample s;
      s.match_id = "m";
      s.rally_id = "r" + std::to_string(r);
      s.hit_index = h;
      samples.push_back(s);
    }
  }
  auto split = split_dataset(samples, {0.7, 0.2, 0.1}, 7);

  auto rallies_of = [&](const std::vector<std::size_t>& idx) {
    std::set<std::string> rallies;
    for (auto i : idx) rallies.insert(samples[i].rally_id);
    return rallies;
  };
  CHECK(rallies_of(split.train).size() == 7);
  CHECK(rallies_of(split.val).size() == 2);
  CHECK(rallies_of(split.test).size() == 1);

  // no rally straddles splits and the partition covers everything
  std::set<std::size_t> all;
  for (auto i : split.train) all.insert(i);
  for (auto i : split.val) all.insert(i);
  for (auto i : split.test) all.insert(i);
  CHECK(all.size() == samples.size());
  for (const auto& r : rallies_of(split.train)) {
    CHECK(rallies_of(split.val).count(r) == 0);
    CHECK(rallies_of(split.test).count(r) == 0);
  }
}

TEST_CASE("split is deterministic per seed") {
  std::vector<ShotSample> samples(40);
  for (int i = 0; i < 40; ++i) {
    samples[static_cast<std::size_t>(i)].match_id = "m";
    samples[static_cast<std::size_t>(i)].rally_id = "r" + std::to_string(i / 4);
  }
  auto a = split_dataset(samples, {0.7, 0.2, 0.1}, 123);
  auto b = split_dataset(samples, {0.7, 0.2, 0.1}, 123);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  auto c = split_dataset(samples, {0.7, 0.2, 0.1}, 124);
  CHECK(a.train != c.train);
}

TEST_CASE("degenerate ratios") {
  std::vector<ShotSample> samples(5);
  for (int i = 0; i < 5; ++i) samples[static_cast<std::size_t>(i)].rally_id = std::to_string(i);
  auto split = split_dataset(samples, {1.0, 0.0, 0.0}, 1);
  CHECK(split.train.size() == 5);
  CHECK(split.val.empty());
  CHECK(split.test.empty());
  CHECK_THROWS_AS(split_dataset(samples, {0.5, 0.2, 0.2}, 1), InvalidRatios);
}

TEST_CASE("clip container round trips") {
  test::TempDir tmp("clip");
  ClipTensor clip;
  clip.frames = 2;
  clip.height = 4;
  clip.width = 5;
  clip.channels = 3;
  clip.pixels.resize(2 * 4 * 5 * 3);
  for (std::size_t i = 0; i < clip.pixels.size(); ++i)
    clip.pixels[i] = static_cast<std::uint8_t>(i * 7);
  const std::string path = tmp.sub("one.clip");
  write_clip(path, clip);
  ClipTensor again = read_clip(path);
  CHECK(again.frames == clip.frames);
  CHECK(again.height == clip.height);
  CHECK(again.width == clip.width);
  CHECK(again.channels == clip.channels);
  CHECK(again.pixels == clip.pixels);
}

TEST_CASE("clip io failure modes") {
  test::TempDir tmp("clipbad");
  CHECK_THROWS_AS(read_clip(tmp.sub("missing.clip")), IoError);
  ClipTensor clip;
  clip.frames = 1;
  clip.height = 1;
  clip.width = 1;
  clip.channels = 3;
  clip.pixels.resize(2);  // wrong size
  CHECK_THROWS_AS(write_clip(tmp.sub("bad.clip"), clip), InvalidParameter);
}
