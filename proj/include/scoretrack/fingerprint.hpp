#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scoretrack/events.hpp"
#include "scoretrack/score.hpp"

namespace scoretrack {

/// A chord-expanded (time, pitch) entry; time unit is beats on the score
/// side and seconds on the performance side.
struct TimedPitch {
  double t = 0.0;
  int pitch = 0;
};

/// Tempo-invariant triple hash: three pitches plus the quantized ratio of
/// the two inter-onset intervals, tdr = (t_c - t_b) / (t_b - t_a).
struct FingerprintToken {
  std::uint8_t pa = 0;
  std::uint8_t pb = 0;
  std::uint8_t pc = 0;
  std::uint8_t r_bucket = 0;  // 0..63

  /// 27-bit packing: pa:7 | pb:7 | pc:7 | r_bucket:6.
  std::uint32_t packed() const;
  static FingerprintToken unpack(std::uint32_t bits);

  /// clamp(floor((log2(tdr) + 4) * 8), 0, 63); caller filters tdr range.
  static int ratio_bucket(double tdr);

  friend bool operator==(const FingerprintToken&, const FingerprintToken&) = default;
};

/// One emitted token plus the entry indices it was built from.
struct TokenOccurrence {
  std::uint32_t token = 0;  // packed FingerprintToken
  std::uint32_t a = 0;      // anchor entry index
  std::uint32_t b = 0;
  std::uint32_t c = 0;
};

/// Expands note events to one (t, pitch) entry per pitch, ties by pitch.
std::vector<TimedPitch> expand_events(std::span<const NoteEvent> events);

/// Token stream over chord-expanded entries: for each anchor a, b ranges
/// over every entry in the next `fanout` distinct onset times after t_a and
/// c over entries in the next `fanout` distinct onset times after t_b.
/// Triples with tdr outside [2^-4, 2^4] are discarded.
/// Invariant under any time scaling t -> alpha * t (alpha > 0): the pairing
/// is event-count-based and tdr is scale-free.
std::vector<TokenOccurrence> tokens_from_events(std::span<const TimedPitch> entries,
                                                int fanout = 5);

/// Where a token occurs in a score.
struct Posting {
  std::uint32_t score_index = 0;  // into the index's score table
  std::uint32_t anchor_index = 0; // entry index of a in the score event list
  float anchor_beat = 0.0f;       // onset of the anchor event, beats
  float ref_span = 0.0f;          // t_b - t_a in beats, > 0
};

struct Hypothesis {
  std::string score_id;
  double beat = 0.0;          // estimated current score position
  double tempo_factor = 1.0;  // performed seconds-per-beat / nominal, [0.25, 4]
  int strength = 0;           // distinct matched query tokens, >= threshold
  double coverage = 0.0;      // strength / query-token-count, (0, 1]
};

struct FpParams {
  int fanout = 5;             // n1 = n2 pairing window (distinct-time events)
  int window_events = 20;     // W most recent events per query
  int min_strength = 8;       // theta_h
  double min_coverage = 0.25;
  int max_hypotheses = 5;
  double bin_beats = 1.0;     // vote histogram bin width
  int bucket_probe = 2;       // query probes r_bucket +- this many bins
  double chord_group_s = 0.05;  // query-side chord grouping window
  double tempo_min = 0.25;    // pair votes outside this tempo-factor
  double tempo_max = 4.0;     //   range are discarded

  friend bool operator==(const FpParams&, const FpParams&) = default;
};

/// Inverted index from packed tokens to postings, with the score database
/// embedded so a serialized index is self-contained.
class FingerprintIndex {
 public:
  /// Key: (score_index, floor(projected_beat / bin_beats)).
  using BinKey = std::pair<std::uint32_t, std::int64_t>;

  static FingerprintIndex build(const ScoreDatabase& db, FpParams params = {});

  /// Hypotheses for the last W events (times in seconds), strongest first,
  /// at most max_hypotheses. t_now is the current performance time.
  std::vector<Hypothesis> query(std::span<const NoteEvent> recent_events,
                                double t_now) const;

  /// Raw vote histogram for the same inputs (vote multiplicities per bin).
  /// Exposed so an exhaustive matcher can be checked against the index.
  std::map<BinKey, long> vote_counts(std::span<const NoteEvent> recent_events,
                                     double t_now) const;

  void save(const std::filesystem::path& file) const;
  static FingerprintIndex load(const std::filesystem::path& file);
  std::vector<std::uint8_t> serialize() const;
  static FingerprintIndex deserialize(std::span<const std::uint8_t> bytes);

  const ScoreDatabase& database() const { return db_; }
  const FpParams& params() const { return params_; }
  /// Query-time knobs may be adjusted after build (build-side fields of
  /// `p` other than fanout take effect immediately; fanout is baked in).
  void set_params(const FpParams& p) { params_ = p; params_.fanout = fanout_; }

  std::size_t posting_count() const { return postings_.size(); }
  std::size_t token_count() const { return token_keys_.size(); }
  const std::string& score_id(std::uint32_t index) const { return score_ids_[index]; }

 private:
  struct PairSample {
    double tempo;        // pair tempo-factor estimate
    double anchor_beat;
    double t_anchor;     // performed anchor time, seconds
    std::uint32_t occurrence;  // query occurrence ordinal
  };
  struct Bin {
    long votes = 0;
    int strength = 0;
    std::uint32_t last_occurrence = UINT32_MAX;
    std::vector<PairSample> samples;
  };

  std::map<BinKey, Bin> gather(std::span<const NoteEvent> recent_events,
                               double t_now, std::size_t* token_count) const;
  std::span<const Posting> lookup(std::uint32_t token) const;

  ScoreDatabase db_;
  FpParams params_;
  int fanout_ = 5;
  std::vector<std::string> score_ids_;       // index -> id (sorted)
  std::vector<double> sec_per_beat_;         // nominal seconds per beat
  std::vector<double> end_beats_;
  std::vector<std::uint32_t> token_keys_;    // sorted unique packed tokens
  std::vector<std::uint64_t> offsets_;       // token_keys_.size() + 1
  std::vector<Posting> postings_;            // grouped by token, then
                                             // (score_index, anchor_beat)
};

}  // namespace scoretrack
