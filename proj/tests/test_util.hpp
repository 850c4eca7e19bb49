#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "scoretrack/score.hpp"
#include "scoretrack/simulate.hpp"

namespace testutil {

/// Unique temporary directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = base / ("scoretrack-test-" + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = std::move(candidate);
        return;
      }
    }
    throw std::runtime_error("could not create a temporary directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline scoretrack::ScoreDatabase make_db(int n_scores, int notes_per_score,
                                         std::uint64_t seed0 = 100) {
  scoretrack::ScoreDatabase db;
  for (int i = 0; i < n_scores; ++i) {
    scoretrack::Score s =
        scoretrack::generate_random_score(notes_per_score, seed0 + static_cast<std::uint64_t>(i));
    db.scores.emplace(s.id, std::move(s));
  }
  return db;
}

/// Events of `sim` with t <= t_cut.
inline std::vector<scoretrack::NoteEvent> cut_events(
    const std::vector<scoretrack::NoteEvent>& events, double t_cut) {
  std::vector<scoretrack::NoteEvent> out;
  for (const auto& e : events)
    if (e.t <= t_cut) out.push_back(e);
  return out;
}

}  // namespace testutil
