#include "scoretrack/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace scoretrack {

std::uint64_t Rng::next_u64() {
  // splitmix64: portable and deterministic across platforms.
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

int Rng::uniform_int(int lo, int hi) {
  const int span = hi - lo + 1;
  int v = lo + static_cast<int>(uniform() * span);
  return std::min(v, hi);
}

double Rng::gaussian(double sigma) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return sigma * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double GroundTruth::beat_at(double t_perf) const {
  if (points.empty()) return 0.0;
  if (t_perf <= points.front().t_perf) return points.front().score_beat;
  if (t_perf >= points.back().t_perf) return points.back().score_beat;
  auto it = std::upper_bound(points.begin(), points.end(), t_perf,
                             [](double t, const GroundTruthPoint& p) { return t < p.t_perf; });
  const GroundTruthPoint& hi = *it;
  const GroundTruthPoint& lo = *(it - 1);
  if (hi.t_perf == lo.t_perf) return hi.score_beat;
  const double w = (t_perf - lo.t_perf) / (hi.t_perf - lo.t_perf);
  return lo.score_beat + w * (hi.score_beat - lo.score_beat);
}

namespace {

/// Piecewise-constant tempo multiplier over score beats.
class TempoMap {
 public:
  TempoMap(double base_bpm, std::vector<TempoSegment> segments)
      : base_bpm_(base_bpm), segments_(std::move(segments)) {
    std::stable_sort(segments_.begin(), segments_.end(),
                     [](const TempoSegment& a, const TempoSegment& b) {
                       return a.from_beat < b.from_beat;
                     });
    for (const TempoSegment& s : segments_)
      if (!(s.bpm_multiplier > 0.0))
        throw std::invalid_argument("simulate: bpm_multiplier must be > 0");
  }

  double multiplier_at(double beat) const {
    double m = 1.0;
    for (const TempoSegment& s : segments_) {
      if (s.from_beat <= beat) m = s.bpm_multiplier;
      else break;
    }
    return m;
  }

  /// Seconds elapsed while the score advances from beat `from` to `to`.
  double span_seconds(double from, double to) const {
    double t = 0.0;
    double cur = from;
    while (cur < to) {
      const double m = multiplier_at(cur);
      double next = to;
      for (const TempoSegment& s : segments_) {
        if (s.from_beat > cur) {
          next = std::min(next, s.from_beat);
          break;
        }
      }
      t += (next - cur) * 60.0 / (base_bpm_ * m);
      cur = next;
    }
    return t;
  }

 private:
  double base_bpm_;
  std::vector<TempoSegment> segments_;
};

struct RawNote {
  double t = 0.0;
  int pitch = 0;
  double beat = 0.0;  // score beat; < 0 for inserted notes
  bool inserted = false;
};

}  // namespace

SimulationResult simulate(const PerformanceScript& script, const ScoreDatabase& db) {
  const Score* score = db.find(script.score_id);
  if (!score) throw std::runtime_error("simulate: unknown score id '" + script.score_id + "'");
  if (!(script.base_tempo_bpm > 0.0))
    throw std::invalid_argument("simulate: base_tempo_bpm must be > 0");
  if (!(script.jitter_std >= 0.0))
    throw std::invalid_argument("simulate: jitter_std must be >= 0");
  for (double p : {script.p_drop, script.p_insert})
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("simulate: probabilities must lie in [0, 1]");

  const double end = score->end_beat();
  TempoMap tempo(script.base_tempo_bpm, script.tempo_segments);

  // Performed segments of the score-beat axis, split at the jumps.
  struct Segment {
    double from = 0.0;
    double until = 0.0;  // exclusive; infinity for the final segment
  };
  std::vector<Segment> segments;
  double cursor = 0.0;
  for (const JumpSpec& jump : script.jumps) {
    if (jump.at_beat < cursor)
      throw std::invalid_argument("simulate: jump at_beat precedes current position");
    if (jump.at_beat > end || jump.to_beat > end || jump.to_beat < 0.0)
      throw std::invalid_argument("simulate: jump beyond score end");
    segments.push_back({cursor, jump.at_beat});
    cursor = jump.to_beat;
  }
  segments.push_back({cursor, std::numeric_limits<double>::infinity()});

  Rng rng(script.seed);
  const auto entries = score->events();
  std::vector<RawNote> raw;
  std::vector<double> jump_times;
  double t0 = 0.0;
  for (std::size_t si = 0; si < segments.size(); ++si) {
    const Segment& seg = segments[si];
    for (const ScoreEvent& ev : entries) {
      if (ev.beat < seg.from || ev.beat >= seg.until) continue;
      const double t_nominal = t0 + tempo.span_seconds(seg.from, ev.beat);
      if (rng.uniform() < script.p_drop) continue;
      double t = t_nominal;
      if (script.jitter_std > 0.0) {
        const double g = rng.gaussian(script.jitter_std);
        const double clip = 3.0 * script.jitter_std;
        t += std::clamp(g, -clip, clip);
      }
      t = std::max(0.0, t);
      raw.push_back({t, ev.pitch, ev.beat, false});
      if (rng.uniform() < script.p_insert) {
        static constexpr int kDeltas[] = {-2, -1, 1, 2};
        const int pitch = std::clamp(ev.pitch + kDeltas[rng.uniform_int(0, 3)], 0, 127);
        const double t_ins = std::max(0.0, t + rng.uniform(-0.02, 0.02));
        raw.push_back({t_ins, pitch, -1.0, true});
      }
    }
    if (si + 1 < segments.size()) {
      t0 += tempo.span_seconds(seg.from, seg.until);
      jump_times.push_back(t0);
    }
  }

  std::stable_sort(raw.begin(), raw.end(), [](const RawNote& a, const RawNote& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.pitch < b.pitch;
  });

  SimulationResult result;
  result.jump_times = std::move(jump_times);
  std::vector<NoteEvent> singles;
  singles.reserve(raw.size());
  for (const RawNote& n : raw) {
    singles.push_back({n.t, {n.pitch}});
    if (!n.inserted) result.truth.points.push_back({n.t, n.beat});
  }
  result.events = merge_chords(singles, 0.001);
  return result;
}

Score generate_random_score(int n_notes, std::uint64_t seed) {
  if (n_notes <= 0) throw std::invalid_argument("generate_random_score: n_notes must be > 0");
  Rng rng(seed ^ 0x5eed5c0ef00dULL);
  Score score;
  score.id = "gen-" + std::to_string(seed);
  score.title = "Generated score " + std::to_string(seed);
  score.nominal_bpm = rng.uniform_int(115, 140);
  double beat = 0.0;
  int remaining = n_notes;
  while (remaining > 0) {
    const int chord = std::min(rng.uniform_int(1, 4), remaining);
    int pitches[4] = {};
    for (int k = 0; k < chord; ++k) {
      int p;
      bool dup;
      do {
        p = rng.uniform_int(36, 96);
        dup = false;
        for (int j = 0; j < k; ++j) dup = dup || pitches[j] == p;
      } while (dup);
      pitches[k] = p;
      const double duration = 0.5 * rng.uniform_int(1, 2);
      score.notes.push_back({p, beat, duration});
    }
    remaining -= chord;
    beat += 0.5;  // eighth-note grid, every slot occupied
  }
  normalize_score(score);
  return score;
}

}  // namespace scoretrack
