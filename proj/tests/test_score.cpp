#include <doctest.h>

#include <fstream>

#include "scoretrack/score.hpp"
#include "test_util.hpp"

using namespace scoretrack;

namespace {

Score tiny_score() {
  Score s;
  s.id = "tiny";
  s.title = "Tiny";
  s.nominal_bpm = 120.0;
  s.notes = {{60, 0.0, 1.0}, {64, 0.0, 1.0}, {67, 1.0, 0.5}, {72, 2.0, 2.0}};
  normalize_score(s);
  return s;
}

}  // namespace

TEST_CASE("normalize_score sorts notes by onset then pitch") {
  Score s;
  s.id = "x";
  s.notes = {{72, 2.0, 1.0}, {64, 0.0, 1.0}, {60, 0.0, 1.0}};
  normalize_score(s);
  CHECK(s.notes[0].pitch == 60);
  CHECK(s.notes[1].pitch == 64);
  CHECK(s.notes[2].pitch == 72);
  CHECK(s.notes[0].onset == 0.0);
}

TEST_CASE("normalize_score rejects invalid scores") {
  Score s = tiny_score();
  SUBCASE("empty id") {
    s.id = "";
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("no notes") {
    s.notes.clear();
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("pitch out of range") {
    s.notes[0].pitch = 128;
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("negative pitch") {
    s.notes[0].pitch = -1;
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("non-positive duration") {
    s.notes[0].duration = 0.0;
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("negative onset") {
    s.notes[0].onset = -0.5;
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("duplicate onset and pitch") {
    s.notes.push_back(s.notes.front());
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
  SUBCASE("non-positive tempo") {
    s.nominal_bpm = 0.0;
    CHECK_THROWS_AS(normalize_score(s), std::invalid_argument);
  }
}

TEST_CASE("end_beat is the last note end") {
  const Score s = tiny_score();
  CHECK(s.end_beat() == doctest::Approx(4.0));  // note at 2.0 lasting 2.0
}

TEST_CASE("events expands chords sorted by beat then pitch") {
  const Score s = tiny_score();
  const auto ev = s.events();
  REQUIRE(ev.size() == 4);
  CHECK(ev[0].beat == 0.0);
  CHECK(ev[0].pitch == 60);
  CHECK(ev[1].beat == 0.0);
  CHECK(ev[1].pitch == 64);
  CHECK(ev[2].pitch == 67);
  CHECK(ev[3].pitch == 72);
}

TEST_CASE("beat and second conversions invert each other") {
  const Score s = tiny_score();  // 120 bpm: 1 beat = 0.5 s
  CHECK(beat_to_seconds(s, 4.0) == doctest::Approx(2.0));
  CHECK(seconds_to_beat(s, 2.0) == doctest::Approx(4.0));
  for (double b : {0.0, 0.25, 1.0, 17.3}) {
    CHECK(seconds_to_beat(s, beat_to_seconds(s, b)) == doctest::Approx(b));
  }
}

TEST_CASE("score JSON round trip preserves everything") {
  const Score s = tiny_score();
  const std::string text = score_to_json_text(s);
  const Score back = score_from_json_text(text);
  CHECK(back == s);
}

TEST_CASE("score JSON parse failures carry context") {
  CHECK_THROWS_AS(score_from_json_text("not json"), std::runtime_error);
  CHECK_THROWS_AS(score_from_json_text("[]"), std::runtime_error);
  CHECK_THROWS_AS(score_from_json_text("{\"id\":\"x\"}"), std::runtime_error);
}

TEST_CASE("save and load a score file") {
  testutil::TempDir dir;
  const Score s = tiny_score();
  const auto file = dir / "tiny.json";
  save_score(s, file);
  CHECK(load_score(file) == s);
}

TEST_CASE("build_database loads every score and is order independent") {
  testutil::TempDir dir;
  Score a = tiny_score();
  a.id = "zz-last";
  Score b = tiny_score();
  b.id = "aa-first";
  save_score(a, dir / "1.json");
  save_score(b, dir / "2.json");
  const ScoreDatabase db = build_database(dir.path());
  REQUIRE(db.scores.size() == 2);
  CHECK(db.scores.begin()->first == "aa-first");  // sorted by id, not filename
  CHECK(db.total_notes() == 8);
  CHECK(db.find("zz-last") != nullptr);
  CHECK(db.find("missing") == nullptr);
}

TEST_CASE("build_database rejects duplicates and empty directories") {
  testutil::TempDir dir;
  SUBCASE("empty directory") {
    CHECK_THROWS_AS(build_database(dir.path()), std::runtime_error);
  }
  SUBCASE("duplicate score ids in different files") {
    const Score s = tiny_score();
    save_score(s, dir / "a.json");
    save_score(s, dir / "b.json");
    CHECK_THROWS_AS(build_database(dir.path()), std::runtime_error);
  }
}

TEST_CASE("non-json files in the score directory are ignored") {
  testutil::TempDir dir;
  save_score(tiny_score(), dir / "a.json");
  std::ofstream(dir / "notes.txt") << "not a score\n";
  CHECK(build_database(dir.path()).scores.size() == 1);
}
