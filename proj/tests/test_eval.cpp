#include <doctest.h>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "scoretrack/eval.hpp"
#include "scoretrack/score.hpp"

using namespace scoretrack;

namespace {

/// Score whose notated tempo makes one beat exactly one second.
Score second_per_beat_score() {
  Score s;
  s.id = "target";
  s.nominal_bpm = 60.0;
  s.notes = {{60, 0.0, 1.0}, {62, 10.0, 1.0}};
  normalize_score(s);
  return s;
}

GroundTruth linear_truth() {
  GroundTruth t;
  t.points = {{0.0, 0.0}, {10.0, 10.0}};  // beat_at(t) == t
  return t;
}

TrackerOutput out(double t, const std::string& id, double beat) {
  TrackerOutput o;
  o.t_perf = t;
  o.score_id = id;
  o.beat = beat;
  return o;
}

}  // namespace

TEST_CASE("summary statistics: frozen values") {
  SUBCASE("odd count with an outlier") {
    const auto s = compute_stats({1.0, 2.0, 3.0, 4.0, 100.0});
    CHECK(s.mean == doctest::Approx(22.0));
    CHECK(s.median == 3.0);
    CHECK(s.p95 == 100.0);
    CHECK(s.count == 5);
  }
  SUBCASE("empty input") {
    const auto s = compute_stats({});
    CHECK(s.mean == 0.0);
    CHECK(s.median == 0.0);
    CHECK(s.p95 == 0.0);
    CHECK(s.count == 0);
  }
  SUBCASE("single value") {
    const auto s = compute_stats({5.0});
    CHECK(s.mean == 5.0);
    CHECK(s.median == 5.0);
    CHECK(s.p95 == 5.0);
    CHECK(s.count == 1);
  }
  SUBCASE("even count interpolates the median") {
    const auto s = compute_stats({2.0, 1.0});
    CHECK(s.median == 1.5);
    CHECK(s.p95 == 2.0);  // nearest rank: ceil(0.95 * 2) = 2
  }
  SUBCASE("twenty values pin the nearest-rank p95") {
    std::vector<double> v;
    for (int i = 1; i <= 20; ++i) v.push_back(10.0 * i);
    std::reverse(v.begin(), v.end());  // order must not matter
    const auto s = compute_stats(v);
    CHECK(s.median == 105.0);
    CHECK(s.p95 == 190.0);  // rank ceil(19) = 19 of 20
    CHECK(s.mean == doctest::Approx(105.0));
  }
}

TEST_CASE("identification latency requires a sustained correct run") {
  const auto score = second_per_beat_score();
  const auto truth = linear_truth();

  SUBCASE("a sub-second flicker does not count") {
    std::vector<TrackerOutput> outs;
    outs.push_back(out(2.0, "other", 2.0));
    for (double t = 2.1; t < 2.95; t += 0.1) outs.push_back(out(t, "target", t));
    outs.push_back(out(3.0, "other", 3.0));
    for (double t = 3.5; t <= 5.01; t += 0.1) outs.push_back(out(t, "target", t));
    const auto rep = evaluate(outs, truth, score);
    REQUIRE(rep.ident_latency_s.has_value());
    CHECK(*rep.ident_latency_s == doctest::Approx(3.5));
  }
  SUBCASE("a short run at the stream end counts") {
    const std::vector<TrackerOutput> outs = {
        out(9.0, "other", 9.0), out(9.8, "target", 9.8), out(9.9, "target", 9.9)};
    const auto rep = evaluate(outs, truth, score);
    REQUIRE(rep.ident_latency_s.has_value());
    CHECK(*rep.ident_latency_s == doctest::Approx(9.8));
  }
  SUBCASE("never correct means no latency") {
    const std::vector<TrackerOutput> outs = {out(1.0, "other", 1.0), out(2.0, "other", 2.0)};
    CHECK(!evaluate(outs, truth, score).ident_latency_s.has_value());
  }
  SUBCASE("no outputs at all") {
    const auto rep = evaluate({}, truth, score);
    CHECK(!rep.ident_latency_s.has_value());
    CHECK(rep.align_err_ms.empty());
    CHECK(!rep.rtf.has_value());
  }
}

TEST_CASE("alignment errors cover correct-id outputs only, in milliseconds") {
  const auto score = second_per_beat_score();
  const auto truth = linear_truth();
  const std::vector<TrackerOutput> outs = {
      out(1.0, "target", 1.1),   // +100 ms
      out(2.0, "target", 1.75),  // -250 ms
      out(3.0, "other", 99.0),   // ignored
      out(4.0, "target", 4.0),   // exact
  };
  const auto rep = evaluate(outs, truth, score);
  REQUIRE(rep.align_err_ms.size() == 3);
  CHECK(rep.align_err_ms[0] == doctest::Approx(100.0));
  CHECK(rep.align_err_ms[1] == doctest::Approx(250.0));
  CHECK(rep.align_err_ms[2] == doctest::Approx(0.0));
  CHECK(rep.align_stats.count == 3);
  CHECK(rep.align_stats.median == doctest::Approx(100.0));
}

TEST_CASE("the notated tempo scales beat errors into time errors") {
  Score fast;  // 120 bpm: one beat is half a second
  fast.id = "target";
  fast.nominal_bpm = 120.0;
  fast.notes = {{60, 0.0, 1.0}, {62, 10.0, 1.0}};
  normalize_score(fast);
  const auto truth = linear_truth();
  const std::vector<TrackerOutput> outs = {out(1.0, "target", 2.0)};  // 1 beat off
  const auto rep = evaluate(outs, truth, fast);
  REQUIRE(rep.align_err_ms.size() == 1);
  CHECK(rep.align_err_ms[0] == doctest::Approx(500.0));
}

TEST_CASE("recovery times are measured from the jump per jump") {
  const auto score = second_per_beat_score();
  const auto truth = linear_truth();
  const std::vector<double> jumps = {4.0, 8.0};
  const std::vector<TrackerOutput> outs = {
      out(3.0, "target", 3.0),   // before the jump: never counts
      out(4.5, "target", 6.5),   // 2 beats off: not recovered
      out(5.0, "other", 5.0),    // wrong id: not recovered
      out(5.5, "target", 5.8),   // 0.3 beats off: recovered at 1.5 s
      out(8.5, "target", 12.0),  // far off after the second jump
  };
  const auto rep = evaluate(outs, truth, score, jumps);
  REQUIRE(rep.recovery_times_s.size() == 2);
  REQUIRE(rep.recovery_times_s[0].has_value());
  CHECK(*rep.recovery_times_s[0] == doctest::Approx(1.5));
  CHECK(!rep.recovery_times_s[1].has_value());
}

TEST_CASE("real-time factor relates processing time to performance length") {
  const auto score = second_per_beat_score();
  const auto truth = linear_truth();  // ends at t_perf = 10
  const std::vector<TrackerOutput> outs = {out(1.0, "target", 1.0)};

  auto rep = evaluate(outs, truth, score, {}, 2.5);
  REQUIRE(rep.rtf.has_value());
  CHECK(*rep.rtf == doctest::Approx(0.25));

  rep = evaluate(outs, truth, score, {}, std::nullopt);
  CHECK(!rep.rtf.has_value());

  const GroundTruth empty_truth;
  rep = evaluate(outs, empty_truth, score, {}, 2.5);
  CHECK(!rep.rtf.has_value());
}

TEST_CASE("evaluation is a pure function of its inputs") {
  const auto score = second_per_beat_score();
  const auto truth = linear_truth();
  const std::vector<TrackerOutput> outs = {out(1.0, "target", 1.2), out(2.5, "target", 2.5)};
  const std::vector<double> jumps = {1.0};
  const auto a = evaluate(outs, truth, score, jumps, 0.5);
  const auto b = evaluate(outs, truth, score, jumps, 0.5);
  CHECK(report_to_json_text(a) == report_to_json_text(b));
}

TEST_CASE("report serialization: golden text") {
  SUBCASE("fully populated") {
    EvalReport rep;
    rep.ident_latency_s = 2.0;
    rep.align_err_ms = {100.0, 200.0};
    rep.align_stats = compute_stats(rep.align_err_ms);
    rep.recovery_times_s = {1.5, std::nullopt};
    rep.rtf = 0.25;
    const std::string expected =
        "{\n"
        "  \"ident_latency_s\": 2.0,\n"
        "  \"align_err_ms\": {\n"
        "    \"mean\": 150.0,\n"
        "    \"median\": 150.0,\n"
        "    \"p95\": 200.0,\n"
        "    \"count\": 2\n"
        "  },\n"
        "  \"recovery_times_s\": [\n"
        "    1.5,\n"
        "    null\n"
        "  ],\n"
        "  \"rtf\": 0.25\n"
        "}\n";
    CHECK(report_to_json_text(rep) == expected);
  }
  SUBCASE("empty report uses nulls") {
    const EvalReport rep;
    const std::string expected =
        "{\n"
        "  \"ident_latency_s\": null,\n"
        "  \"align_err_ms\": {\n"
        "    \"mean\": 0.0,\n"
        "    \"median\": 0.0,\n"
        "    \"p95\": 0.0,\n"
        "    \"count\": 0\n"
        "  },\n"
        "  \"recovery_times_s\": [],\n"
        "  \"rtf\": null\n"
        "}\n";
    CHECK(report_to_json_text(rep) == expected);
  }
}
