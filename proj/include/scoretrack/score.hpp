#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace scoretrack {

/// One note of a symbolic score. Times are in beats.
struct Note {
  int pitch = 0;          // MIDI number, 0..127
  double onset = 0.0;     // beats, >= 0
  double duration = 0.0;  // beats, > 0

  friend bool operator==(const Note&, const Note&) = default;
};

/// A chord-expanded score event: one (beat, pitch) entry per note,
/// sorted by (beat, pitch). Fingerprint postings index into this list.
struct ScoreEvent {
  double beat = 0.0;
  int pitch = 0;

  friend bool operator==(const ScoreEvent&, const ScoreEvent&) = default;
};

struct Score {
  std::string id;
  std::string title;
  double nominal_bpm = 120.0;
  std::vector<Note> notes;  // sorted by (onset, pitch) after normalization

  /// Beat of the last note end (onset + duration); 0 for an empty score.
  double end_beat() const;

  /// Chord-expanded event list, sorted by (beat, pitch).
  std::vector<ScoreEvent> events() const;

  friend bool operator==(const Score&, const Score&) = default;
};

/// Sorts the note list by (onset, pitch) and enforces the invariants:
/// pitch range, positive durations, non-negative onsets, at least one
/// note, no duplicate (onset, pitch), positive tempo, non-empty id.
/// Throws std::invalid_argument on violation.
void normalize_score(Score& score);

/// Maps a beat position to seconds at the score's notated tempo.
double beat_to_seconds(const Score& score, double beat);

/// Inverse of beat_to_seconds.
double seconds_to_beat(const Score& score, double seconds);

/// Parses a score from its JSON serialization. Throws std::runtime_error
/// on malformed input and std::invalid_argument on invariant violations.
Score score_from_json_text(const std::string& text);

/// Serializes a score to JSON text (round-trips through score_from_json_text).
std::string score_to_json_text(const Score& score);

Score load_score(const std::filesystem::path& file);
void save_score(const Score& score, const std::filesystem::path& file);

struct ScoreDatabase {
  std::map<std::string, Score> scores;  // keyed by Score::id

  std::size_t total_notes() const;
  const Score* find(const std::string& id) const;

  friend bool operator==(const ScoreDatabase&, const ScoreDatabase&) = default;
};

/// Loads every *.json score in a directory. Throws std::runtime_error if the
/// directory yields no scores or contains two scores with the same id.
/// The result is independent of directory enumeration order.
ScoreDatabase build_database(const std::filesystem::path& dir);

}  // namespace scoretrack
