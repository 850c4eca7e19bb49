#pragma once

#include <span>
#include <vector>

namespace scoretrack {

/// A performed onset: one or more pitches sounding at time t (seconds).
struct NoteEvent {
  double t = 0.0;           // seconds, >= 0
  std::vector<int> pitches;  // sorted, unique, MIDI 0..127, non-empty

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

/// Greedily merges events whose onset lies within `window_s` seconds of the
/// first event of the current group. The merged event keeps the earliest t
/// and the sorted union of pitches. Input must be sorted by t.
std::vector<NoteEvent> merge_chords(std::span<const NoteEvent> events, double window_s);

}  // namespace scoretrack
