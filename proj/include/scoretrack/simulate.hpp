#pragma once

#include <cstdint>
#include <vector>

#include "scoretrack/events.hpp"
#include "scoretrack/score.hpp"

namespace scoretrack {

/// Deterministic, platform-independent random source (splitmix64).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int lo, int hi);       // inclusive bounds
  double gaussian(double sigma);         // Box-Muller, mean 0

 private:
  std::uint64_t state_;
};

/// Tempo multiplier active from `from_beat` (score beats) onward.
struct TempoSegment {
  double from_beat = 0.0;
  double bpm_multiplier = 1.0;  // > 0; effective bpm = base * multiplier

  friend bool operator==(const TempoSegment&, const TempoSegment&) = default;
};

/// When the performance reaches score beat `at_beat` it continues from
/// `to_beat` with no pause. A jump with at_beat 0 starts mid-piece.
struct JumpSpec {
  double at_beat = 0.0;
  double to_beat = 0.0;

  friend bool operator==(const JumpSpec&, const JumpSpec&) = default;
};

struct PerformanceScript {
  std::string score_id;
  double base_tempo_bpm = 120.0;            // > 0
  std::vector<TempoSegment> tempo_segments;  // sorted by from_beat
  double jitter_std = 0.015;                 // seconds, >= 0
  double p_drop = 0.02;                      // [0, 1]
  double p_insert = 0.02;                    // [0, 1]
  std::vector<JumpSpec> jumps;               // applied in order
  std::uint64_t seed = 0;
};

struct GroundTruthPoint {
  double t_perf = 0.0;     // seconds
  double score_beat = 0.0;

  friend bool operator==(const GroundTruthPoint&, const GroundTruthPoint&) = default;
};

/// (t_perf, score_beat) pairs, non-decreasing in t_perf, one per performed
/// non-inserted note.
struct GroundTruth {
  std::vector<GroundTruthPoint> points;

  /// Piecewise-linear interpolation of score_beat at performance time t.
  double beat_at(double t_perf) const;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct SimulationResult {
  std::vector<NoteEvent> events;  // merged chords, non-decreasing t
  GroundTruth truth;
  std::vector<double> jump_times;  // performance time of each executed jump
};

/// Renders a performance of script.score_id from the database. Deterministic
/// per seed. Throws std::runtime_error for unknown score ids and
/// std::invalid_argument for invalid scripts (e.g. jump beyond score end).
SimulationResult simulate(const PerformanceScript& script, const ScoreDatabase& db);

/// Deterministic random score: chords of 1-4 distinct pitches (MIDI 36..96)
/// on an eighth-note grid, exactly n_notes notes in total.
Score generate_random_score(int n_notes, std::uint64_t seed);

}  // namespace scoretrack
