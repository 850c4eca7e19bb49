#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "scoretrack/events.hpp"
#include "scoretrack/simulate.hpp"
#include "scoretrack/tracker.hpp"

namespace scoretrack {

// Line-delimited UTF-8 records, one JSON object per line. Parse errors
// throw std::runtime_error naming the 1-based line number.

std::string event_to_line(const NoteEvent& event);
NoteEvent event_from_line(const std::string& line, std::size_t line_no = 0);
std::vector<NoteEvent> read_events(std::istream& in);
void write_events(std::ostream& out, std::span<const NoteEvent> events);

std::string truth_point_to_line(const GroundTruthPoint& point);
GroundTruthPoint truth_point_from_line(const std::string& line, std::size_t line_no = 0);
GroundTruth read_truth(std::istream& in);
void write_truth(std::ostream& out, const GroundTruth& truth);

std::string output_to_line(const TrackerOutput& output);
TrackerOutput output_from_line(const std::string& line, std::size_t line_no = 0);
std::vector<TrackerOutput> read_outputs(std::istream& in);
void write_outputs(std::ostream& out, std::span<const TrackerOutput> outputs);

std::vector<double> read_jump_times(std::istream& in);
void write_jump_times(std::ostream& out, std::span<const double> times);

PerformanceScript script_from_json_text(const std::string& text);
std::string script_to_json_text(const PerformanceScript& script);
PerformanceScript load_script(const std::filesystem::path& file);

/// 16-bit little-endian mono PCM WAV. Throws std::runtime_error on any
/// other layout or on a sample-rate mismatch with `expected_rate` (pass 0
/// to accept any rate).
std::vector<float> read_wav(const std::filesystem::path& file, double expected_rate,
                            double* rate_out = nullptr);
void write_wav(const std::filesystem::path& file, std::span<const float> samples,
               double sample_rate);

/// Raw little-endian float32 sample stream.
std::vector<float> read_raw_f32(std::istream& in);

}  // namespace scoretrack
