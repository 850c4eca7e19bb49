#include "scoretrack/score.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace scoretrack {

namespace {

bool note_order(const Note& a, const Note& b) {
  if (a.onset != b.onset) return a.onset < b.onset;
  return a.pitch < b.pitch;
}

}  // namespace

double Score::end_beat() const {
  double end = 0.0;
  for (const Note& n : notes) end = std::max(end, n.onset + n.duration);
  return end;
}

std::vector<ScoreEvent> Score::events() const {
  std::vector<ScoreEvent> out;
  out.reserve(notes.size());
  for (const Note& n : notes) out.push_back({n.onset, n.pitch});
  std::sort(out.begin(), out.end(), [](const ScoreEvent& a, const ScoreEvent& b) {
    if (a.beat != b.beat) return a.beat < b.beat;
    return a.pitch < b.pitch;
  });
  return out;
}

void normalize_score(Score& score) {
  if (score.id.empty()) throw std::invalid_argument("score: empty id");
  if (!(score.nominal_bpm > 0.0))
    throw std::invalid_argument("score '" + score.id + "': nominal_bpm must be > 0");
  if (score.notes.empty())
    throw std::invalid_argument("score '" + score.id + "': no notes");
  std::stable_sort(score.notes.begin(), score.notes.end(), note_order);
  const Note* prev = nullptr;
  for (const Note& n : score.notes) {
    if (n.pitch < 0 || n.pitch > 127)
      throw std::invalid_argument("score '" + score.id + "': pitch " +
                                  std::to_string(n.pitch) + " out of range");
    if (!(n.onset >= 0.0))
      throw std::invalid_argument("score '" + score.id + "': negative onset");
    if (!(n.duration > 0.0))
      throw std::invalid_argument("score '" + score.id + "': non-positive duration");
    if (prev && prev->onset == n.onset && prev->pitch == n.pitch)
      throw std::invalid_argument("score '" + score.id + "': duplicate (onset, pitch)");
    prev = &n;
  }
}

double beat_to_seconds(const Score& score, double beat) {
  return beat * 60.0 / score.nominal_bpm;
}

double seconds_to_beat(const Score& score, double seconds) {
  return seconds * score.nominal_bpm / 60.0;
}

Score score_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("score: JSON parse error: ") + e.what());
  }
  Score score;
  try {
    score.id = j.at("id").get<std::string>();
    score.title = j.value("title", std::string{});
    score.nominal_bpm = j.value("nominal_bpm", 120.0);
    for (const auto& jn : j.at("notes")) {
      Note n;
      n.pitch = jn.at("pitch").get<int>();
      n.onset = jn.at("onset_beats").get<double>();
      n.duration = jn.at("duration_beats").get<double>();
      score.notes.push_back(n);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("score: missing or mistyped field: ") + e.what());
  }
  normalize_score(score);
  return score;
}

std::string score_to_json_text(const Score& score) {
  nlohmann::ordered_json j;
  j["id"] = score.id;
  j["title"] = score.title;
  j["nominal_bpm"] = score.nominal_bpm;
  auto& notes = j["notes"] = nlohmann::ordered_json::array();
  for (const Note& n : score.notes) {
    nlohmann::ordered_json jn;
    jn["pitch"] = n.pitch;
    jn["onset_beats"] = n.onset;
    jn["duration_beats"] = n.duration;
    notes.push_back(std::move(jn));
  }
  return j.dump(2) + "\n";
}

Score load_score(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open score file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return score_from_json_text(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
}

void save_score(const Score& score, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write score file: " + file.string());
  out << score_to_json_text(score);
}

std::size_t ScoreDatabase::total_notes() const {
  std::size_t n = 0;
  for (const auto& [id, score] : scores) n += score.notes.size();
  return n;
}

const Score* ScoreDatabase::find(const std::string& id) const {
  auto it = scores.find(id);
  return it == scores.end() ? nullptr : &it->second;
}

ScoreDatabase build_database(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("score directory not found: " + dir.string());
  ScoreDatabase db;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    Score score = load_score(entry.path());
    auto [it, inserted] = db.scores.emplace(score.id, std::move(score));
    if (!inserted)
      throw std::runtime_error("duplicate score id '" + it->first + "' in " + dir.string());
  }
  if (db.scores.empty())
    throw std::runtime_error("no scores found in " + dir.string());
  return db;
}

}  // namespace scoretrack
