#include "scoretrack/events.hpp"

#include <algorithm>

namespace scoretrack {

std::vector<NoteEvent> merge_chords(std::span<const NoteEvent> events, double window_s) {
  std::vector<NoteEvent> out;
  for (const NoteEvent& e : events) {
    if (!out.empty() && e.t - out.back().t <= window_s) {
      auto& pitches = out.back().pitches;
      pitches.insert(pitches.end(), e.pitches.begin(), e.pitches.end());
    } else {
      out.push_back(e);
    }
  }
  for (NoteEvent& e : out) {
    std::sort(e.pitches.begin(), e.pitches.end());
    e.pitches.erase(std::unique(e.pitches.begin(), e.pitches.end()), e.pitches.end());
  }
  return out;
}

}  // namespace scoretrack
