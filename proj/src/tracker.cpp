#include "scoretrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <stdexcept>
#include <utility>

namespace scoretrack {

namespace {

constexpr std::size_t kRenderCacheSize = 8;

/// Runs the fingerprint query inline; collect() returns what the last
/// submit() produced, preserving the one-frame result delay.
class SyncQueryLane final : public QueryLane {
 public:
  explicit SyncQueryLane(std::shared_ptr<const FingerprintIndex> index)
      : index_(std::move(index)) {}

  void submit(std::vector<NoteEvent> window, double t_now) override {
    result_ = index_->query(window, t_now);
  }

  std::vector<Hypothesis> collect() override { return std::exchange(result_, {}); }

 private:
  std::shared_ptr<const FingerprintIndex> index_;
  std::vector<Hypothesis> result_;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double Tracker::Agent::beat(double frame_rate, double bpm) const {
  const double seconds = oltw->last_report().score_frame / frame_rate;
  return seconds * bpm / 60.0;
}

Tracker::Tracker(std::shared_ptr<const FingerprintIndex> index, TrackerConfig config,
                 std::shared_ptr<QueryLane> lane)
    : index_(std::move(index)), config_(config), lane_(std::move(lane)) {
  if (!index_) throw std::invalid_argument("tracker requires an index");
  if (config_.max_agents < 1) throw std::invalid_argument("max_agents must be >= 1");
  if (config_.warmup_s < 0 || config_.kill_sustain_s < 0)
    throw std::invalid_argument("warmup_s and kill_sustain_s must be >= 0");
  if (config_.kill_ratio < 1.0) throw std::invalid_argument("kill_ratio must be >= 1");
  if (config_.query_every_n_events < 1)
    throw std::invalid_argument("query_every_n_events must be >= 1");
  if (config_.frame_rate <= 0) throw std::invalid_argument("frame_rate must be > 0");
  if (!lane_) lane_ = std::make_shared<SyncQueryLane>(index_);
}

std::uint32_t Tracker::score_index_of(const std::string& id) const {
  const auto& scores = index_->database().scores;
  const auto it = scores.find(id);
  if (it == scores.end()) throw std::runtime_error("hypothesis for unknown score: " + id);
  return static_cast<std::uint32_t>(std::distance(scores.begin(), it));
}

std::shared_ptr<const std::vector<FeatureFrame>> Tracker::rendered(
    std::uint32_t score_index) {
  if (const auto it = render_cache_.find(score_index); it != render_cache_.end()) {
    const auto pos = std::find(render_lru_.begin(), render_lru_.end(), score_index);
    render_lru_.erase(pos);
    render_lru_.push_back(score_index);
    return it->second;
  }
  const Score* score = index_->database().find(index_->score_id(score_index));
  auto frames = std::make_shared<const std::vector<FeatureFrame>>(
      render_score(*score, config_.frame_rate));
  if (render_cache_.size() >= kRenderCacheSize) {
    render_cache_.erase(render_lru_.front());
    render_lru_.pop_front();
  }
  render_cache_.emplace(score_index, frames);
  render_lru_.push_back(score_index);
  return frames;
}

void Tracker::spawn_one(const Hypothesis& hyp, double now) {
  const std::uint32_t score_index = score_index_of(hyp.score_id);
  const Score* score = index_->database().find(hyp.score_id);

  for (const Agent& a : agents_) {
    if (a.score_index == score_index &&
        std::abs(a.beat(config_.frame_rate, score->nominal_bpm) - hyp.beat) <
            config_.spawn_exclusion_beats)
      return;
  }

  if (static_cast<int>(agents_.size()) >= config_.max_agents) {
    std::vector<double> costs;
    costs.reserve(agents_.size());
    for (const Agent& a : agents_) costs.push_back(a.oltw->last_report().normalized_cost);
    const double med = median_of(costs);
    auto worst = agents_.begin();
    for (auto it = agents_.begin(); it != agents_.end(); ++it) {
      if (it->oltw->last_report().normalized_cost >
          worst->oltw->last_report().normalized_cost)
        worst = it;
    }
    if (!(worst->oltw->last_report().normalized_cost > med)) return;
    agents_.erase(worst);
  }

  auto ref = rendered(score_index);
  const double sec_per_beat = 60.0 / score->nominal_bpm;
  const long target = std::lround(hyp.beat * sec_per_beat * config_.frame_rate);
  const double backfill_frames =
      static_cast<double>(frame_buffer_.size()) / std::max(hyp.tempo_factor, 1e-6);
  const long start = std::clamp<long>(target - std::lround(backfill_frames), 0,
                                      static_cast<long>(ref->size()) - 1);

  Agent agent;
  agent.id = next_agent_id_++;
  agent.score_index = score_index;
  agent.ref = ref;
  agent.oltw = std::make_unique<Oltw>(ref, static_cast<int>(start), config_.oltw);
  agent.born_at = frame_buffer_.empty() ? now : frame_buffer_.front().t;
  for (const FeatureFrame& f : frame_buffer_) agent.oltw->step(f);
  agents_.push_back(std::move(agent));
}

void Tracker::spawn_agents(const std::vector<Hypothesis>& hyps, double now) {
  for (const Hypothesis& hyp : hyps) spawn_one(hyp, now);
}

std::optional<TrackerOutput> Tracker::step(const FeatureFrame& frame,
                                           std::span<const NoteEvent> events) {
  if (started_ && frame.t < last_t_)
    throw std::runtime_error("frame time went backwards");
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].t > frame.t)
      throw std::runtime_error("event timestamp after its frame time");
    if (i > 0 && events[i].t < events[i - 1].t)
      throw std::runtime_error("events within a step are not sorted");
  }
  started_ = true;
  last_t_ = frame.t;

  if (query_pending_) {
    query_pending_ = false;
    spawn_agents(lane_->collect(), frame.t);
  }

  frame_buffer_.push_back(frame);
  while (!frame_buffer_.empty() &&
         frame_buffer_.front().t < frame.t - config_.warmup_s)
    frame_buffer_.pop_front();

  for (Agent& a : agents_) {
    const Oltw::Report r = a.oltw->step(frame);
    if (r.exhausted) a.dead = true;
  }

  if (!agents_.empty()) {
    double best = agents_.front().oltw->last_report().normalized_cost;
    for (const Agent& a : agents_)
      best = std::min(best, a.oltw->last_report().normalized_cost);
    for (Agent& a : agents_) {
      if (frame.t - a.born_at < config_.warmup_s) continue;
      if (a.oltw->last_report().normalized_cost > config_.kill_ratio * best) {
        if (a.worse_since < 0) a.worse_since = frame.t;
        else if (frame.t - a.worse_since >= config_.kill_sustain_s) a.dead = true;
      } else {
        a.worse_since = -1.0;
      }
    }
  }
  agents_.remove_if([](const Agent& a) { return a.dead; });

  std::optional<TrackerOutput> out;
  const Agent* first = nullptr;
  const Agent* second = nullptr;
  for (const Agent& a : agents_) {
    if (frame.t - a.born_at < config_.warmup_s) continue;
    const double cost = a.oltw->last_report().normalized_cost;
    const auto better = [&](const Agent* b) {
      if (b == nullptr) return true;
      const double bc = b->oltw->last_report().normalized_cost;
      return cost < bc || (cost == bc && a.id < b->id);
    };
    if (better(first)) {
      second = first;
      first = &a;
    } else if (better(second)) {
      second = &a;
    }
  }
  if (first != nullptr) {
    const Score* score = index_->database().find(index_->score_id(first->score_index));
    TrackerOutput o;
    o.t_perf = frame.t;
    o.score_id = score->id;
    o.beat = std::clamp(first->beat(config_.frame_rate, score->nominal_bpm), 0.0,
                        score->end_beat());
    if (second == nullptr) {
      o.confidence = 1.0;
    } else {
      const double c1 = first->oltw->last_report().normalized_cost;
      const double c2 = second->oltw->last_report().normalized_cost;
      o.confidence = std::clamp((c2 - c1) / std::max(c2, 1e-9), 0.0, 1.0);
    }
    o.agent_id = first->id;
    o.n_agents = static_cast<int>(agents_.size());
    out = std::move(o);
  }

  const int window = index_->params().window_events;
  for (const NoteEvent& e : events) {
    recent_events_.push_back(e);
    while (static_cast<int>(recent_events_.size()) > window) recent_events_.pop_front();
  }
  events_since_query_ += static_cast<int>(events.size());
  if (!events.empty() && events_since_query_ >= config_.query_every_n_events &&
      !query_pending_) {
    lane_->submit(std::vector<NoteEvent>(recent_events_.begin(), recent_events_.end()),
                  frame.t);
    query_pending_ = true;
    events_since_query_ = 0;
  }
  return out;
}

std::vector<TrackerOutput> tracker_run(std::span<const FeatureFrame> frames,
                                       std::span<const NoteEvent> events,
                                       std::shared_ptr<const FingerprintIndex> index,
                                       TrackerConfig config,
                                       std::shared_ptr<QueryLane> lane) {
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].t < frames[i - 1].t)
      throw std::runtime_error("frames are not sorted by time");
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].t < events[i - 1].t)
      throw std::runtime_error("events are not sorted by time");

  Tracker tracker(std::move(index), config, std::move(lane));
  std::vector<TrackerOutput> outputs;
  std::size_t e = 0;
  for (const FeatureFrame& frame : frames) {
    const std::size_t e0 = e;
    while (e < events.size() && events[e].t < frame.t) ++e;
    if (auto out = tracker.step(frame, events.subspan(e0, e - e0))) {
      outputs.push_back(std::move(*out));
    }
  }
  return outputs;
}

}  // namespace scoretrack
