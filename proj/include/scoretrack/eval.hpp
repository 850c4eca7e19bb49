#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scoretrack/simulate.hpp"
#include "scoretrack/tracker.hpp"

namespace scoretrack {

struct EvalStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;  // nearest-rank
  std::size_t count = 0;
};

struct EvalReport {
  /// First time the output score id is correct and stays correct for at
  /// least one second (or until the stream ends); nullopt if never.
  std::optional<double> ident_latency_s;
  /// |reported - true| position error, via beat_to_seconds at the expected
  /// score's notated tempo, over outputs naming the correct score.
  std::vector<double> align_err_ms;
  EvalStats align_stats;
  /// Per injected jump: seconds of music until the error drops below one
  /// beat again (and the score id is correct); nullopt if never.
  std::vector<std::optional<double>> recovery_times_s;
  /// Processing time / performance duration, when processing time is known.
  std::optional<double> rtf;
};

/// Pure function of its inputs. True beat positions come from
/// piecewise-linear interpolation of the ground truth.
EvalReport evaluate(std::span<const TrackerOutput> outputs,
                    const GroundTruth& truth,
                    const Score& expected_score,
                    std::span<const double> jump_times = {},
                    std::optional<double> processing_s = std::nullopt);

EvalStats compute_stats(std::vector<double> values);

/// Stable key-value serialization of a report (JSON object).
std::string report_to_json_text(const EvalReport& report);

}  // namespace scoretrack
