#include "scoretrack/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace scoretrack {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string where(std::size_t line_no) {
  return line_no > 0 ? "line " + std::to_string(line_no) + ": " : std::string();
}

json parse_object(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const std::exception& e) {
    throw std::runtime_error(where(line_no) + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(where(line_no) + "expected a JSON object");
  return j;
}

double number_field(const json& j, const char* key, std::size_t line_no) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number())
    throw std::runtime_error(where(line_no) + "missing numeric field \"" + key + "\"");
  return it->get<double>();
}

template <typename Fn>
void for_each_line(std::istream& in, Fn fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, line_no);
  }
}

}  // namespace

std::string event_to_line(const NoteEvent& event) {
  ordered_json j;
  j["t"] = event.t;
  j["pitches"] = event.pitches;
  return j.dump();
}

NoteEvent event_from_line(const std::string& line, std::size_t line_no) {
  const json j = parse_object(line, line_no);
  NoteEvent e;
  e.t = number_field(j, "t", line_no);
  const auto it = j.find("pitches");
  if (it == j.end() || !it->is_array() || it->empty())
    throw std::runtime_error(where(line_no) + "missing non-empty array field \"pitches\"");
  for (const auto& p : *it) {
    if (!p.is_number_integer())
      throw std::runtime_error(where(line_no) + "pitches must be integers");
    const auto pitch = p.get<long>();
    if (pitch < 0 || pitch > 127)
      throw std::runtime_error(where(line_no) + "pitch out of MIDI range 0..127");
    e.pitches.push_back(static_cast<int>(pitch));
  }
  return e;
}

std::vector<NoteEvent> read_events(std::istream& in) {
  std::vector<NoteEvent> events;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    events.push_back(event_from_line(line, line_no));
  });
  return events;
}

void write_events(std::ostream& out, std::span<const NoteEvent> events) {
  for (const NoteEvent& e : events) out << event_to_line(e) << '\n';
}

std::string truth_point_to_line(const GroundTruthPoint& point) {
  ordered_json j;
  j["t_perf"] = point.t_perf;
  j["score_beat"] = point.score_beat;
  return j.dump();
}

GroundTruthPoint truth_point_from_line(const std::string& line, std::size_t line_no) {
  const json j = parse_object(line, line_no);
  GroundTruthPoint p;
  p.t_perf = number_field(j, "t_perf", line_no);
  p.score_beat = number_field(j, "score_beat", line_no);
  return p;
}

GroundTruth read_truth(std::istream& in) {
  GroundTruth truth;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    truth.points.push_back(truth_point_from_line(line, line_no));
  });
  return truth;
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
  for (const GroundTruthPoint& p : truth.points) out << truth_point_to_line(p) << '\n';
}

std::string output_to_line(const TrackerOutput& output) {
  ordered_json j;
  j["t_perf"] = output.t_perf;
  j["score_id"] = output.score_id;
  j["beat"] = output.beat;
  j["confidence"] = output.confidence;
  j["agent_id"] = output.agent_id;
  j["n_agents"] = output.n_agents;
  return j.dump();
}

TrackerOutput output_from_line(const std::string& line, std::size_t line_no) {
  const json j = parse_object(line, line_no);
  TrackerOutput o;
  o.t_perf = number_field(j, "t_perf", line_no);
  const auto id = j.find("score_id");
  if (id == j.end() || !id->is_string())
    throw std::runtime_error(where(line_no) + "missing string field \"score_id\"");
  o.score_id = id->get<std::string>();
  o.beat = number_field(j, "beat", line_no);
  o.confidence = number_field(j, "confidence", line_no);
  o.agent_id = static_cast<std::uint64_t>(number_field(j, "agent_id", line_no));
  o.n_agents = static_cast<int>(number_field(j, "n_agents", line_no));
  return o;
}

std::vector<TrackerOutput> read_outputs(std::istream& in) {
  std::vector<TrackerOutput> outputs;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    outputs.push_back(output_from_line(line, line_no));
  });
  return outputs;
}

void write_outputs(std::ostream& out, std::span<const TrackerOutput> outputs) {
  for (const TrackerOutput& o : outputs) out << output_to_line(o) << '\n';
}

std::vector<double> read_jump_times(std::istream& in) {
  std::vector<double> times;
  for_each_line(in, [&](const std::string& line, std::size_t line_no) {
    times.push_back(number_field(parse_object(line, line_no), "t", line_no));
  });
  return times;
}

void write_jump_times(std::ostream& out, std::span<const double> times) {
  for (double t : times) {
    ordered_json j;
    j["t"] = t;
    out << j.dump() << '\n';
  }
}

PerformanceScript script_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("script: ") + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("script: expected a JSON object");

  static const char* known[] = {"score_id",   "base_tempo_bpm", "tempo_segments",
                                "jitter_std", "p_drop",         "p_insert",
                                "jumps",      "seed"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::runtime_error("script: unknown field \"" + key + "\"");
  }

  PerformanceScript s;
  const auto id = j.find("score_id");
  if (id == j.end() || !id->is_string())
    throw std::runtime_error("script: missing string field \"score_id\"");
  s.score_id = id->get<std::string>();
  if (j.contains("base_tempo_bpm")) s.base_tempo_bpm = number_field(j, "base_tempo_bpm", 0);
  if (j.contains("jitter_std")) s.jitter_std = number_field(j, "jitter_std", 0);
  if (j.contains("p_drop")) s.p_drop = number_field(j, "p_drop", 0);
  if (j.contains("p_insert")) s.p_insert = number_field(j, "p_insert", 0);
  if (j.contains("seed")) {
    const auto& v = j.at("seed");
    if (!v.is_number_unsigned() && !v.is_number_integer())
      throw std::runtime_error("script: \"seed\" must be an integer");
    s.seed = v.get<std::uint64_t>();
  }
  if (j.contains("tempo_segments")) {
    const auto& arr = j.at("tempo_segments");
    if (!arr.is_array()) throw std::runtime_error("script: \"tempo_segments\" must be an array");
    for (const auto& seg : arr) {
      if (!seg.is_object())
        throw std::runtime_error("script: tempo segment must be an object");
      TempoSegment t;
      t.from_beat = number_field(seg, "from_beat", 0);
      t.bpm_multiplier = number_field(seg, "bpm_multiplier", 0);
      s.tempo_segments.push_back(t);
    }
  }
  if (j.contains("jumps")) {
    const auto& arr = j.at("jumps");
    if (!arr.is_array()) throw std::runtime_error("script: \"jumps\" must be an array");
    for (const auto& jump : arr) {
      if (!jump.is_object()) throw std::runtime_error("script: jump must be an object");
      JumpSpec spec;
      spec.at_beat = number_field(jump, "at_beat", 0);
      spec.to_beat = number_field(jump, "to_beat", 0);
      s.jumps.push_back(spec);
    }
  }
  return s;
}

std::string script_to_json_text(const PerformanceScript& script) {
  ordered_json j;
  j["score_id"] = script.score_id;
  j["base_tempo_bpm"] = script.base_tempo_bpm;
  j["tempo_segments"] = ordered_json::array();
  for (const TempoSegment& t : script.tempo_segments) {
    ordered_json seg;
    seg["from_beat"] = t.from_beat;
    seg["bpm_multiplier"] = t.bpm_multiplier;
    j["tempo_segments"].push_back(std::move(seg));
  }
  j["jitter_std"] = script.jitter_std;
  j["p_drop"] = script.p_drop;
  j["p_insert"] = script.p_insert;
  j["jumps"] = ordered_json::array();
  for (const JumpSpec& spec : script.jumps) {
    ordered_json jj;
    jj["at_beat"] = spec.at_beat;
    jj["to_beat"] = spec.to_beat;
    j["jumps"].push_back(std::move(jj));
  }
  j["seed"] = script.seed;
  return j.dump(2) + "\n";
}

PerformanceScript load_script(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open script file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return script_from_json_text(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
}

namespace {

template <typename T>
T read_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw std::runtime_error(std::string("wav: truncated ") + what);
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    acc |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(acc);
}

template <typename T>
void write_le(std::ostream& out, T value) {
  const auto acc = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.put(static_cast<char>((acc >> (8 * i)) & 0xff));
}

void expect_tag(std::istream& in, const char* tag) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, tag, 4) != 0)
    throw std::runtime_error(std::string("wav: missing \"") + tag + "\" chunk");
}

}  // namespace

std::vector<float> read_wav(const std::filesystem::path& file, double expected_rate,
                            double* rate_out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open wav file: " + file.string());

  expect_tag(in, "RIFF");
  read_le<std::uint32_t>(in, "riff size");
  expect_tag(in, "WAVE");

  bool have_fmt = false;
  std::uint32_t sample_rate = 0;
  std::vector<float> samples;
  bool have_data = false;

  while (true) {
    char tag[4];
    if (!in.read(tag, 4)) break;
    const auto chunk_size = read_le<std::uint32_t>(in, "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const auto format = read_le<std::uint16_t>(in, "fmt");
      const auto channels = read_le<std::uint16_t>(in, "fmt");
      sample_rate = read_le<std::uint32_t>(in, "fmt");
      read_le<std::uint32_t>(in, "fmt");  // byte rate
      read_le<std::uint16_t>(in, "fmt");  // block align
      const auto bits = read_le<std::uint16_t>(in, "fmt");
      if (format != 1) throw std::runtime_error("wav: only PCM is supported");
      if (channels != 1) throw std::runtime_error("wav: only mono is supported");
      if (bits != 16) throw std::runtime_error("wav: only 16-bit samples are supported");
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data chunk before fmt chunk");
      const std::size_t n = chunk_size / 2;
      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        samples[i] = static_cast<float>(read_le<std::int16_t>(in, "sample")) / 32768.0f;
      if (chunk_size % 2 == 1) in.seekg(1, std::ios::cur);
      have_data = true;
    } else {
      in.seekg(chunk_size + (chunk_size % 2), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("wav: missing fmt or data chunk in " + file.string());
  if (expected_rate > 0 && static_cast<double>(sample_rate) != expected_rate)
    throw std::runtime_error("wav: sample rate " + std::to_string(sample_rate) +
                             " does not match expected " + std::to_string(expected_rate));
  if (rate_out != nullptr) *rate_out = static_cast<double>(sample_rate);
  return samples;
}

void write_wav(const std::filesystem::path& file, std::span<const float> samples,
               double sample_rate) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write wav file: " + file.string());
  const auto rate = static_cast<std::uint32_t>(sample_rate);
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);  // PCM
  write_le<std::uint16_t>(out, 1);  // mono
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (float s : samples) {
    const double clamped = std::max(-1.0, std::min(1.0, static_cast<double>(s)));
    write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clamped * 32767.0)));
  }
  if (!out) throw std::runtime_error("short write to wav file: " + file.string());
}

std::vector<float> read_raw_f32(std::istream& in) {
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    throw std::runtime_error("raw f32 stream length is not a multiple of 4 bytes");
  std::vector<float> samples(bytes.size() / 4);
  if (!samples.empty()) std::memcpy(samples.data(), bytes.data(), bytes.size());
  return samples;
}

}  // namespace scoretrack
