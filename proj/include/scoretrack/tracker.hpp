#pragma once

#include <cstdint>
#include <deque>
#include <list>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "scoretrack/fingerprint.hpp"
#include "scoretrack/oltw.hpp"

namespace scoretrack {

struct TrackerConfig {
  int max_agents = 8;
  double warmup_s = 1.25;          // agent age before it may report
  double kill_ratio = 1.5;         // vs. best live normalized cost
  double kill_sustain_s = 2.0;     // how long the ratio must hold
  double spawn_exclusion_beats = 4.0;
  int query_every_n_events = 1;
  double frame_rate = kFrameRate;
  OltwParams oltw;

  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

struct TrackerOutput {
  double t_perf = 0.0;
  std::string score_id;
  double beat = 0.0;
  double confidence = 0.0;  // (c2 - c1) / max(c2, eps); 1 with a single agent
  std::uint64_t agent_id = 0;
  int n_agents = 0;

  friend bool operator==(const TrackerOutput&, const TrackerOutput&) = default;
};

/// Decouples fingerprint queries from the frame lane. submit() is called at
/// the end of a frame step, collect() at the start of the next one, so an
/// implementation may run the query concurrently; results always take
/// effect on the next frame boundary, which keeps any schedule's output
/// identical to the synchronous one.
class QueryLane {
 public:
  virtual ~QueryLane() = default;
  virtual void submit(std::vector<NoteEvent> window, double t_now) = 0;
  virtual std::vector<Hypothesis> collect() = 0;
};

/// Pool of online-DTW agents over fingerprint hypotheses. Per frame step:
/// collect pending query results, spawn agents (subject to the exclusion
/// zone and the replace-worst-above-median policy), step every agent with
/// the frame, apply the kill rules, and report the best warmed agent.
class Tracker {
 public:
  explicit Tracker(std::shared_ptr<const FingerprintIndex> index,
                   TrackerConfig config = {},
                   std::shared_ptr<QueryLane> lane = nullptr);

  /// `events` are the note events since the previous frame, each with
  /// t <= frame.t. Frame times must be non-decreasing across steps;
  /// a clock regression throws std::runtime_error.
  std::optional<TrackerOutput> step(const FeatureFrame& frame,
                                    std::span<const NoteEvent> events);

  const TrackerConfig& config() const { return config_; }
  int live_agents() const { return static_cast<int>(agents_.size()); }

 private:
  struct Agent {
    std::uint64_t id = 0;
    std::uint32_t score_index = 0;
    std::shared_ptr<const std::vector<FeatureFrame>> ref;
    std::unique_ptr<Oltw> oltw;
    double born_at = 0.0;
    double worse_since = -1.0;  // < 0: not currently above the kill ratio
    bool dead = false;

    double beat(double frame_rate, double bpm) const;
  };

  void spawn_agents(const std::vector<Hypothesis>& hyps, double now);
  void spawn_one(const Hypothesis& hyp, double now);
  std::shared_ptr<const std::vector<FeatureFrame>> rendered(std::uint32_t score_index);
  std::uint32_t score_index_of(const std::string& id) const;

  std::shared_ptr<const FingerprintIndex> index_;
  TrackerConfig config_;
  std::shared_ptr<QueryLane> lane_;
  bool query_pending_ = false;
  std::list<Agent> agents_;
  std::uint64_t next_agent_id_ = 1;
  std::deque<NoteEvent> recent_events_;
  std::deque<FeatureFrame> frame_buffer_;  // last warmup_s seconds of frames
  int events_since_query_ = 0;
  double last_t_ = 0.0;
  bool started_ = false;
  std::unordered_map<std::uint32_t, std::shared_ptr<const std::vector<FeatureFrame>>> render_cache_;
  std::deque<std::uint32_t> render_lru_;
};

/// Folds Tracker::step over the two streams in time order; an event at
/// exactly a frame's timestamp is processed after that frame. Events and
/// frames must each be sorted by time (throws std::runtime_error otherwise).
std::vector<TrackerOutput> tracker_run(std::span<const FeatureFrame> frames,
                                       std::span<const NoteEvent> events,
                                       std::shared_ptr<const FingerprintIndex> index,
                                       TrackerConfig config = {},
                                       std::shared_ptr<QueryLane> lane = nullptr);

}  // namespace scoretrack
