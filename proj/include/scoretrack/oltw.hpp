#pragma once

#include <memory>
#include <vector>

#include "scoretrack/features.hpp"

namespace scoretrack {

struct OltwParams {
  int window = 250;       // band width c, frames
  int max_run_count = 3;  // max consecutive single-direction expansions

  friend bool operator==(const OltwParams&, const OltwParams&) = default;
};

/// Incremental banded online time warping of a live frame stream against a
/// fixed reference, after Dixon's on-line time warping scheme. Each step
/// consumes one live frame (appends one column), then expands the score
/// direction while the minimal cumulative cost on the computed region's
/// frontier lies on the score edge, subject to max_run_count alternation.
/// Moves are (1,0), (0,1), (1,1), all weight 1; the cell metric is
/// 1 - cosine(u, v) with distance 1 against the zero vector.
class Oltw {
 public:
  struct Report {
    int score_frame = 0;        // argmin of cumulative cost in the current
                                // column's band (exact ties: smallest frame
                                // wins), clamped to be non-decreasing across
                                // steps
    double normalized_cost = 0; // total_cost / path_len, in [0, 2]
    double total_cost = 0;      // cumulative cell costs of the reported path
    long path_len = 0;          // cells on the reported path
    bool exhausted = false;     // frontier reached and passed the ref end
  };

  /// Throws std::out_of_range unless 0 <= start_frame < ref->size().
  Oltw(std::shared_ptr<const std::vector<FeatureFrame>> ref, int start_frame,
       OltwParams params = {});

  /// Consumes one live frame; O(window) work per step.
  Report step(const FeatureFrame& live);

  const Report& last_report() const { return last_report_; }
  int start_frame() const { return start_; }
  int frontier() const { return imax_; }  // highest computed score frame
  long steps() const { return j_ + 1; }   // live frames consumed

  static double frame_distance(const FeatureFrame& a, const FeatureFrame& b);

 private:
  struct Cell {
    double cost = 0.0;
    std::int32_t len = 0;
  };
  struct Column {
    long j = -1;
    int lo = 0;
    std::vector<Cell> cells;
    int hi() const { return lo + static_cast<int>(cells.size()) - 1; }
  };
  enum class Dir { kLive, kScore, kBoth };

  Column& column(long j) { return cols_[j % cols_.size()]; }
  const Column& column(long j) const { return cols_[j % cols_.size()]; }
  const Cell* cell(int i, long j) const;
  double cell_cost(int i, long j) const;
  Cell best_pred(int i, long j) const;
  void append_column(const FeatureFrame& live);
  void expand_row();
  Dir decide() const;
  void note_move(Dir dir);

  std::shared_ptr<const std::vector<FeatureFrame>> ref_;
  OltwParams params_;
  int start_ = 0;
  int imax_ = 0;       // highest score row computed
  long j_ = -1;        // current live column
  int last_pos_ = 0;   // monotone reported position
  Dir last_dir_ = Dir::kBoth;
  int run_count_ = 0;
  std::vector<Column> cols_;          // ring of the last `window` columns
  std::vector<FeatureFrame> live_;    // ring of the last `window` live frames
  Report last_report_;
};

}  // namespace scoretrack
