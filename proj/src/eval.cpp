#include "scoretrack/eval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace scoretrack {

EvalStats compute_stats(std::vector<double> values) {
  EvalStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  const std::size_t n = values.size();
  s.median = (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(n)));  // nearest-rank, 1-based
  s.p95 = values[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

EvalReport evaluate(std::span<const TrackerOutput> outputs, const GroundTruth& truth,
                    const Score& expected_score, std::span<const double> jump_times,
                    std::optional<double> processing_s) {
  EvalReport report;

  // Identification latency: start of the first correct run that lasts at
  // least one second or reaches the end of the output stream.
  for (std::size_t i = 0; i < outputs.size();) {
    if (outputs[i].score_id != expected_score.id) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < outputs.size() && outputs[j + 1].score_id == expected_score.id) ++j;
    if (outputs[j].t_perf - outputs[i].t_perf >= 1.0 || j + 1 == outputs.size()) {
      report.ident_latency_s = outputs[i].t_perf;
      break;
    }
    i = j + 1;
  }

  for (const TrackerOutput& o : outputs) {
    if (o.score_id != expected_score.id) continue;
    const double true_beat = truth.beat_at(o.t_perf);
    const double err_s = std::abs(beat_to_seconds(expected_score, o.beat) -
                                  beat_to_seconds(expected_score, true_beat));
    report.align_err_ms.push_back(err_s * 1000.0);
  }
  report.align_stats = compute_stats(report.align_err_ms);

  for (double t_jump : jump_times) {
    std::optional<double> recovered;
    for (const TrackerOutput& o : outputs) {
      if (o.t_perf < t_jump) continue;
      if (o.score_id != expected_score.id) continue;
      if (std::abs(o.beat - truth.beat_at(o.t_perf)) < 1.0) {
        recovered = o.t_perf - t_jump;
        break;
      }
    }
    report.recovery_times_s.push_back(recovered);
  }

  if (processing_s.has_value() && !truth.points.empty() &&
      truth.points.back().t_perf > 0.0) {
    report.rtf = *processing_s / truth.points.back().t_perf;
  }
  return report;
}

std::string report_to_json_text(const EvalReport& report) {
  nlohmann::ordered_json j;
  if (report.ident_latency_s.has_value()) j["ident_latency_s"] = *report.ident_latency_s;
  else j["ident_latency_s"] = nullptr;

  nlohmann::ordered_json stats;
  stats["mean"] = report.align_stats.mean;
  stats["median"] = report.align_stats.median;
  stats["p95"] = report.align_stats.p95;
  stats["count"] = report.align_stats.count;
  j["align_err_ms"] = std::move(stats);

  nlohmann::ordered_json rec = nlohmann::ordered_json::array();
  for (const auto& r : report.recovery_times_s) {
    if (r.has_value()) rec.push_back(*r);
    else rec.push_back(nullptr);
  }
  j["recovery_times_s"] = std::move(rec);

  if (report.rtf.has_value()) j["rtf"] = *report.rtf;
  else j["rtf"] = nullptr;
  return j.dump(2) + "\n";
}

}  // namespace scoretrack
