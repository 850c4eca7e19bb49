#include "scoretrack/oltw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scoretrack {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double Oltw::frame_distance(const FeatureFrame& a, const FeatureFrame& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int k = 0; k < kNumBands; ++k) {
    const double x = a.v[k];
    const double y = b.v[k];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na <= 0.0 || nb <= 0.0) return 1.0;
  const double c = dot / std::sqrt(na * nb);
  return 1.0 - std::clamp(c, -1.0, 1.0);
}

Oltw::Oltw(std::shared_ptr<const std::vector<FeatureFrame>> ref, int start_frame,
           OltwParams params)
    : ref_(std::move(ref)),
      params_(params),
      start_(start_frame),
      imax_(start_frame),
      last_pos_(start_frame) {
  if (!ref_ || ref_->empty()) throw std::out_of_range("reference frame sequence is empty");
  if (start_frame < 0 || start_frame >= static_cast<int>(ref_->size()))
    throw std::out_of_range("start frame outside reference");
  if (params_.window < 2) throw std::invalid_argument("window must be >= 2");
  if (params_.max_run_count < 1) throw std::invalid_argument("max_run_count must be >= 1");
  cols_.resize(static_cast<std::size_t>(params_.window));
  live_.resize(static_cast<std::size_t>(params_.window));
}

const Oltw::Cell* Oltw::cell(int i, long j) const {
  if (j < 0 || j > j_ || j_ - j >= static_cast<long>(cols_.size())) return nullptr;
  const Column& col = column(j);
  if (col.j != j) return nullptr;
  if (i < col.lo || i > col.hi()) return nullptr;
  return &col.cells[static_cast<std::size_t>(i - col.lo)];
}

Oltw::Cell Oltw::best_pred(int i, long j) const {
  Cell best{kInf, 0};
  const auto consider = [&](const Cell* c) {
    if (c != nullptr && c->len > 0 && c->cost < best.cost) best = *c;
  };
  consider(cell(i - 1, j - 1));  // diagonal
  consider(cell(i - 1, j));      // score advance within this column
  consider(cell(i, j - 1));      // live advance from the previous column
  return best;
}

double Oltw::cell_cost(int i, long j) const {
  const Cell* c = cell(i, j);
  return (c != nullptr && c->len > 0) ? c->cost : kInf;
}

void Oltw::append_column(const FeatureFrame& live) {
  ++j_;
  live_[static_cast<std::size_t>(j_) % live_.size()] = live;
  Column& col = column(j_);
  col.j = j_;
  col.lo = std::max(start_, imax_ - params_.window + 1);
  col.cells.assign(static_cast<std::size_t>(imax_ - col.lo + 1), Cell{});
  for (int i = col.lo; i <= imax_; ++i) {
    const double d = frame_distance((*ref_)[static_cast<std::size_t>(i)], live);
    Cell out{kInf, 0};
    if (i == start_ && j_ == 0) {
      out = Cell{d, 1};
    } else {
      const Cell pred = best_pred(i, j_);
      if (pred.len > 0) out = Cell{pred.cost + d, pred.len + 1};
    }
    col.cells[static_cast<std::size_t>(i - col.lo)] = out;
  }
}

void Oltw::expand_row() {
  ++imax_;
  const long j0 = std::max<long>(0, j_ - params_.window + 1);
  for (long jj = j0; jj <= j_; ++jj) {
    Column& col = column(jj);
    const FeatureFrame& live = live_[static_cast<std::size_t>(jj) % live_.size()];
    const double d = frame_distance((*ref_)[static_cast<std::size_t>(imax_)], live);
    const Cell pred = best_pred(imax_, jj);
    Cell out{kInf, 0};
    if (pred.len > 0) out = Cell{pred.cost + d, pred.len + 1};
    col.cells.push_back(out);
  }
}

Oltw::Dir Oltw::decide() const {
  const int ref_end = static_cast<int>(ref_->size()) - 1;
  if (imax_ >= ref_end) return Dir::kLive;
  if (run_count_ >= params_.max_run_count) {
    if (last_dir_ == Dir::kScore) return Dir::kLive;
    if (last_dir_ == Dir::kLive) return Dir::kScore;
  }
  const Column& cur = column(j_);
  double best = cur.cells.back().len > 0 ? cur.cells.back().cost : kInf;
  Dir dir = Dir::kBoth;  // minimum at the corner (imax_, j_)
  const long j0 = std::max<long>(0, j_ - params_.window + 1);
  for (long jj = j_ - 1; jj >= j0; --jj) {
    const double c = cell_cost(imax_, jj);
    if (c < best) {
      best = c;
      dir = Dir::kScore;
    }
  }
  for (int i = imax_ - 1; i >= cur.lo; --i) {
    const double c = cell_cost(i, j_);
    if (c < best) {
      best = c;
      dir = Dir::kLive;
    }
  }
  return dir;
}

void Oltw::note_move(Dir dir) {
  if (dir == Dir::kBoth) {
    run_count_ = 0;
  } else if (dir == last_dir_) {
    ++run_count_;
  } else {
    run_count_ = 1;
  }
  last_dir_ = dir;
}

Oltw::Report Oltw::step(const FeatureFrame& live) {
  append_column(live);
  while (true) {
    const Dir dir = decide();
    if (dir == Dir::kLive) {
      note_move(dir);
      break;
    }
    expand_row();
    note_move(dir);
    if (dir == Dir::kBoth) break;
  }

  const Column& cur = column(j_);
  int arg = -1;
  double best = kInf;
  for (int i = cur.lo; i <= cur.hi(); ++i) {
    const Cell& c = cur.cells[static_cast<std::size_t>(i - cur.lo)];
    if (c.len == 0) continue;
    if (c.cost < best) {
      best = c.cost;
      arg = i;
    }
  }
  if (arg < 0) arg = std::min(last_pos_, cur.hi());  // unreachable band; hold position
  last_pos_ = std::max(last_pos_, arg);

  Report r;
  r.score_frame = last_pos_;
  const Cell* rc = cell(last_pos_, j_);
  if (rc == nullptr || rc->len == 0) rc = cell(arg, j_);
  if (rc != nullptr && rc->len > 0) {
    r.total_cost = rc->cost;
    r.path_len = rc->len;
    r.normalized_cost = rc->cost / static_cast<double>(rc->len);
  } else {
    r.total_cost = last_report_.total_cost;
    r.path_len = last_report_.path_len;
    r.normalized_cost = last_report_.normalized_cost;
  }
  r.exhausted =
      (imax_ == static_cast<int>(ref_->size()) - 1 && last_pos_ == imax_);
  last_report_ = r;
  return r;
}

}  // namespace scoretrack
