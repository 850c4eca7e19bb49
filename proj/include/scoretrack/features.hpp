#pragma once

#include <array>
#include <span>
#include <vector>

#include "scoretrack/events.hpp"
#include "scoretrack/score.hpp"

namespace scoretrack {

inline constexpr int kNumBands = 88;   // semitone bands, MIDI 21..108
inline constexpr int kMidiLow = 21;
inline constexpr double kFrameRate = 50.0;  // feature frames per second

/// One feature frame: 88 non-negative semitone-band energies with unit L2
/// norm, or the all-zero vector for silence.
struct FeatureFrame {
  double t = 0.0;  // seconds (frame center for audio input)
  std::array<float, kNumBands> v{};

  bool is_zero() const;

  friend bool operator==(const FeatureFrame&, const FeatureFrame&) = default;
};

struct AudioParams {
  double sample_rate = 44100.0;
  int fft_size = 2048;          // power of two; Hann window
  int hop = 882;                // 20 ms at 44.1 kHz -> 50 fps
  double onset_threshold = 1.0; // spectral-flux rise over local mean
  double log_compression = 10.0;  // y = log(1 + gamma * x)
};

/// Validates AudioParams; throws std::invalid_argument on violation.
void validate(const AudioParams& params);

/// Short-time magnitude spectra mapped triangularly onto the 88 semitone
/// centers (MIDI p -> 440 * 2^((p-69)/12) Hz), log-compressed and
/// L2-normalized. Frame k covers samples [k*hop, k*hop + fft_size);
/// t = frame center in samples / sample_rate.
std::vector<FeatureFrame> audio_to_frames(std::span<const float> samples,
                                          const AudioParams& params);

/// Onset events from half-wave-rectified spectral flux. A frame is a peak if
/// it is the flux maximum over +-3 frames and exceeds the +-10-frame local
/// mean by onset_threshold. Event pitches are up to 4 semitone bands that are
/// local maxima across bands with value >= 0.2 * frame max; onsets with no
/// qualifying band are discarded.
std::vector<NoteEvent> events_from_audio(std::span<const float> samples,
                                         const AudioParams& params);

/// Streaming renderer from note events to feature frames. Every event adds
/// energy exp(-(t_frame - t_event)/tau), tau = 0.5 s, to its fundamental
/// band, half that at +12 semitones and a third at +19 (bands outside the
/// range are dropped); frames are L2-normalized. Strictly causal.
class EventFrameRenderer {
 public:
  explicit EventFrameRenderer(double frame_rate = kFrameRate);

  /// Events must arrive in non-decreasing time order, and no earlier than
  /// the last emitted frame.
  void push_event(const NoteEvent& event);

  /// Emits all frames with frame time strictly below t_limit.
  std::vector<FeatureFrame> drain_before(double t_limit);

  /// Emits all frames with frame time <= t_limit (end of stream).
  std::vector<FeatureFrame> finish(double t_limit);

  double next_frame_time() const;
  double frame_rate() const { return frame_rate_; }

 private:
  FeatureFrame emit_frame();

  double frame_rate_;
  double tau_ = 0.5;
  std::array<double, kNumBands> acc_{};
  double acc_t_ = 0.0;
  long next_frame_ = 0;
};

/// Batch convenience over EventFrameRenderer: frames at `frame_rate` from
/// t = 0 through `until_t` inclusive.
std::vector<FeatureFrame> events_to_frames(std::span<const NoteEvent> events,
                                           double frame_rate, double until_t);

/// Reference frames of a score: note events at the notated tempo rendered
/// through EventFrameRenderer; length = last note end + 2 s.
std::vector<FeatureFrame> render_score(const Score& score,
                                       double frame_rate = kFrameRate);

/// Note events of a score at its notated tempo (chords merged exactly).
std::vector<NoteEvent> score_events_seconds(const Score& score);

}  // namespace scoretrack
