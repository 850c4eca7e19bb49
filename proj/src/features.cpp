#include "scoretrack/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fft.hpp"

namespace scoretrack {

namespace {

constexpr double kDecayTau = 0.5;  // seconds

std::array<float, kNumBands> normalized(const std::array<double, kNumBands>& v) {
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  std::array<float, kNumBands> out{};
  if (norm2 <= 0.0) return out;
  const double inv = 1.0 / std::sqrt(norm2);
  for (int i = 0; i < kNumBands; ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

struct BandFrames {
  std::vector<double> times;
  std::vector<std::array<double, kNumBands>> bands;  // log-compressed, unnormalized
};

/// Shared STFT front half of the audio paths: Hann-windowed magnitude
/// spectra mapped triangularly (in fractional-semitone space) onto the 88
/// band centers, then log(1 + gamma x).
BandFrames band_frames(std::span<const float> samples, const AudioParams& p) {
  validate(p);
  BandFrames out;
  const std::size_t n = samples.size();
  const int fft = p.fft_size;
  std::vector<double> window(fft);
  double window_sum = 0.0;
  for (int i = 0; i < fft; ++i) {
    window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / fft));
    window_sum += window[i];
  }
  const double mag_scale = 2.0 / window_sum;  // unit-amplitude sine -> ~1

  // Each FFT bin contributes to the two bands bracketing its fractional
  // MIDI position with triangular weights.
  struct BinMap {
    int band;
    double weight;
  };
  std::vector<std::vector<BinMap>> binmap(fft / 2 + 1);
  for (int k = 1; k <= fft / 2; ++k) {
    const double f = k * p.sample_rate / fft;
    const double m = 69.0 + 12.0 * std::log2(f / 440.0);
    const int lo = static_cast<int>(std::floor(m));
    const double frac = m - lo;
    if (lo >= kMidiLow && lo <= kMidiLow + kNumBands - 1)
      binmap[k].push_back({lo - kMidiLow, 1.0 - frac});
    if (lo + 1 >= kMidiLow && lo + 1 <= kMidiLow + kNumBands - 1)
      binmap[k].push_back({lo + 1 - kMidiLow, frac});
  }

  std::vector<std::complex<double>> buf(fft);
  for (long k = 0;; ++k) {
    const long off = k * p.hop;
    const double center = off + fft / 2;
    if (center >= static_cast<double>(n)) break;
    for (int i = 0; i < fft; ++i) {
      const long s = off + i;
      const double x = (s < static_cast<long>(n)) ? samples[s] : 0.0;
      buf[i] = {x * window[i], 0.0};
    }
    detail::fft_radix2(buf);
    std::array<double, kNumBands> bands{};
    for (int bin = 1; bin <= fft / 2; ++bin) {
      const double mag = std::abs(buf[bin]) * mag_scale;
      for (const BinMap& bm : binmap[bin]) bands[bm.band] += mag * bm.weight;
    }
    for (double& b : bands) b = std::log1p(p.log_compression * b);
    out.times.push_back(center / p.sample_rate);
    out.bands.push_back(bands);
  }
  return out;
}

}  // namespace

bool FeatureFrame::is_zero() const {
  for (float x : v)
    if (x != 0.0f) return false;
  return true;
}

void validate(const AudioParams& p) {
  if (!(p.sample_rate > 0.0)) throw std::invalid_argument("audio: sample_rate must be > 0");
  if (p.fft_size <= 0 || (p.fft_size & (p.fft_size - 1)) != 0)
    throw std::invalid_argument("audio: fft_size must be a positive power of two");
  if (p.hop <= 0 || p.hop > p.fft_size)
    throw std::invalid_argument("audio: hop must lie in [1, fft_size]");
  if (!(p.log_compression > 0.0))
    throw std::invalid_argument("audio: log_compression must be > 0");
}

std::vector<FeatureFrame> audio_to_frames(std::span<const float> samples,
                                          const AudioParams& params) {
  BandFrames bf = band_frames(samples, params);
  std::vector<FeatureFrame> frames(bf.times.size());
  for (std::size_t i = 0; i < bf.times.size(); ++i) {
    frames[i].t = bf.times[i];
    frames[i].v = normalized(bf.bands[i]);
  }
  return frames;
}

std::vector<NoteEvent> events_from_audio(std::span<const float> samples,
                                         const AudioParams& params) {
  BandFrames bf = band_frames(samples, params);
  const int n = static_cast<int>(bf.times.size());
  std::vector<double> flux(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double f = 0.0;
    for (int i = 0; i < kNumBands; ++i) {
      const double prev = (k > 0) ? bf.bands[k - 1][i] : 0.0;
      f += std::max(0.0, bf.bands[k][i] - prev);
    }
    flux[k] = f;
  }

  std::vector<NoteEvent> events;
  for (int k = 0; k < n; ++k) {
    bool peak = true;
    for (int j = std::max(0, k - 3); j <= std::min(n - 1, k + 3) && peak; ++j) {
      if (flux[j] > flux[k]) peak = false;
      if (flux[j] == flux[k] && j < k) peak = false;  // plateaus emit once
    }
    if (!peak) continue;
    double mean = 0.0;
    int count = 0;
    for (int j = std::max(0, k - 10); j <= std::min(n - 1, k + 10); ++j, ++count)
      mean += flux[j];
    mean /= std::max(1, count);
    if (flux[k] < mean + params.onset_threshold) continue;

    const auto& bands = bf.bands[k];
    const double vmax = *std::max_element(bands.begin(), bands.end());
    if (vmax <= 0.0) continue;
    struct Cand {
      double value;
      int band;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < kNumBands; ++i) {
      const bool up = i == 0 || bands[i] > bands[i - 1];
      const bool down = i == kNumBands - 1 || bands[i] > bands[i + 1];
      if (up && down && bands[i] >= 0.2 * vmax) cands.push_back({bands[i], i});
    }
    if (cands.empty()) continue;
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.value != b.value) return a.value > b.value;
      return a.band < b.band;
    });
    NoteEvent ev;
    ev.t = bf.times[k];
    for (std::size_t i = 0; i < cands.size() && i < 4; ++i)
      ev.pitches.push_back(cands[i].band + kMidiLow);
    std::sort(ev.pitches.begin(), ev.pitches.end());
    events.push_back(std::move(ev));
  }
  return events;
}

EventFrameRenderer::EventFrameRenderer(double frame_rate) : frame_rate_(frame_rate) {
  if (!(frame_rate > 0.0))
    throw std::invalid_argument("renderer: frame rate must be > 0");
}

double EventFrameRenderer::next_frame_time() const { return next_frame_ / frame_rate_; }

void EventFrameRenderer::push_event(const NoteEvent& event) {
  if (event.t < acc_t_)
    throw std::logic_error("renderer: event precedes already-rendered output");
  const double dt = event.t - acc_t_;
  if (dt > 0.0) {
    const double decay = std::exp(-dt / tau_);
    for (double& b : acc_) b *= decay;
  }
  acc_t_ = event.t;
  for (int pitch : event.pitches) {
    struct Partial {
      int offset;
      double weight;
    };
    static constexpr Partial kPartials[] = {{0, 1.0}, {12, 0.5}, {19, 0.33}};
    for (const auto& partial : kPartials) {
      const int band = pitch + partial.offset - kMidiLow;
      if (band >= 0 && band < kNumBands) acc_[band] += partial.weight;
    }
  }
}

FeatureFrame EventFrameRenderer::emit_frame() {
  const double t = next_frame_ / frame_rate_;
  const double dt = t - acc_t_;
  if (dt > 0.0) {
    const double decay = std::exp(-dt / tau_);
    for (double& b : acc_) b *= decay;
    acc_t_ = t;
  }
  ++next_frame_;
  return {t, normalized(acc_)};
}

std::vector<FeatureFrame> EventFrameRenderer::drain_before(double t_limit) {
  std::vector<FeatureFrame> frames;
  while (next_frame_time() < t_limit) frames.push_back(emit_frame());
  return frames;
}

std::vector<FeatureFrame> EventFrameRenderer::finish(double t_limit) {
  std::vector<FeatureFrame> frames;
  while (next_frame_time() <= t_limit) frames.push_back(emit_frame());
  return frames;
}

std::vector<FeatureFrame> events_to_frames(std::span<const NoteEvent> events,
                                           double frame_rate, double until_t) {
  EventFrameRenderer renderer(frame_rate);
  std::vector<FeatureFrame> frames;
  for (const NoteEvent& e : events) {
    auto chunk = renderer.drain_before(e.t);
    frames.insert(frames.end(), chunk.begin(), chunk.end());
    renderer.push_event(e);
  }
  auto tail = renderer.finish(until_t);
  frames.insert(frames.end(), tail.begin(), tail.end());
  return frames;
}

std::vector<NoteEvent> score_events_seconds(const Score& score) {
  std::vector<NoteEvent> singles;
  singles.reserve(score.notes.size());
  for (const ScoreEvent& ev : score.events())
    singles.push_back({beat_to_seconds(score, ev.beat), {ev.pitch}});
  return merge_chords(singles, 0.0);  // merge exact ties only
}

std::vector<FeatureFrame> render_score(const Score& score, double frame_rate) {
  const double until = beat_to_seconds(score, score.end_beat()) + 2.0;
  return events_to_frames(score_events_seconds(score), frame_rate, until);
}

}  // namespace scoretrack
