// Command-line front end: index building, performance simulation, live
// tracking, and alignment evaluation over line-delimited JSON streams.

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scoretrack/eval.hpp"
#include "scoretrack/features.hpp"
#include "scoretrack/fingerprint.hpp"
#include "scoretrack/io.hpp"
#include "scoretrack/score.hpp"
#include "scoretrack/simulate.hpp"
#include "scoretrack/tracker.hpp"

namespace {

using namespace scoretrack;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

/// Applies only the fingerprint-parameter flags the user actually passed,
/// preserving whatever was baked into the loaded index otherwise.
void apply_fp_flags(const CLI::App& sub, FpParams& fp) {
  if (sub.count("--window-events")) fp.window_events = sub.get_option("--window-events")->as<int>();
  if (sub.count("--min-strength")) fp.min_strength = sub.get_option("--min-strength")->as<int>();
  if (sub.count("--min-coverage")) fp.min_coverage = sub.get_option("--min-coverage")->as<double>();
  if (sub.count("--max-hypotheses")) fp.max_hypotheses = sub.get_option("--max-hypotheses")->as<int>();
  if (sub.count("--bin-beats")) fp.bin_beats = sub.get_option("--bin-beats")->as<double>();
  if (sub.count("--bucket-probe")) fp.bucket_probe = sub.get_option("--bucket-probe")->as<int>();
  if (sub.count("--chord-group")) fp.chord_group_s = sub.get_option("--chord-group")->as<double>();
}

void add_fp_query_flags(CLI::App& sub) {
  FpParams d;
  sub.add_option("--window-events", "query window size, events")
      ->default_str(std::to_string(d.window_events));
  sub.add_option("--min-strength", "hypothesis strength threshold")
      ->default_str(std::to_string(d.min_strength));
  sub.add_option("--min-coverage", "hypothesis coverage threshold")
      ->default_str("0.25");
  sub.add_option("--max-hypotheses", "hypotheses reported per query")
      ->default_str(std::to_string(d.max_hypotheses));
  sub.add_option("--bin-beats", "vote histogram bin width, beats")
      ->default_str("1");
  sub.add_option("--bucket-probe", "ratio-bucket probe radius at query time")
      ->default_str(std::to_string(d.bucket_probe));
  sub.add_option("--chord-group", "query-side chord grouping window, seconds")
      ->default_str("0.05");
}

int run_build_index(const std::string& scores_dir, const std::string& out_path,
                    int fanout, const CLI::App& sub) {
  ScoreDatabase db = build_database(scores_dir);
  FpParams fp;
  fp.fanout = fanout;
  apply_fp_flags(sub, fp);
  const FingerprintIndex index = FingerprintIndex::build(db, fp);
  index.save(out_path);
  std::cout << db.scores.size() << " scores, " << db.total_notes() << " notes, "
            << index.token_count() << " tokens, " << index.posting_count()
            << " postings -> " << out_path << "\n";
  return 0;
}

int run_simulate(const std::string& index_path, const std::string& script_path,
                 const std::string& score_id, std::optional<std::uint64_t> seed,
                 const std::string& events_path, const std::string& truth_path,
                 const std::string& jumps_path) {
  const FingerprintIndex index = FingerprintIndex::load(index_path);

  PerformanceScript script;
  if (!script_path.empty()) script = load_script(script_path);
  if (!score_id.empty()) script.score_id = score_id;
  if (seed.has_value()) script.seed = *seed;
  if (script.score_id.empty())
    throw std::runtime_error("no score id: pass --score or a script with one");

  const SimulationResult sim = simulate(script, index.database());

  auto events_out = open_output(events_path);
  write_events(events_out, sim.events);
  auto truth_out = open_output(truth_path);
  write_truth(truth_out, sim.truth);
  if (!jumps_path.empty()) {
    auto jumps_out = open_output(jumps_path);
    write_jump_times(jumps_out, sim.jump_times);
  }
  std::cerr << "simulate: " << sim.events.size() << " events, "
            << sim.truth.points.size() << " truth points, " << sim.jump_times.size()
            << " jumps\n";
  return 0;
}

int run_track(const CLI::App& sub, const std::string& index_path,
              const std::string& events_path, const std::string& audio_path,
              bool raw_f32, double raw_rate, const std::string& out_path,
              TrackerConfig config, int fft_size, double onset_threshold) {
  auto index = std::make_shared<FingerprintIndex>(FingerprintIndex::load(index_path));
  FpParams fp = index->params();
  apply_fp_flags(sub, fp);
  index->set_params(fp);

  std::vector<NoteEvent> events;
  std::vector<FeatureFrame> frames;
  if (!events_path.empty()) {
    if (events_path == "-") {
      events = read_events(std::cin);
    } else {
      auto in = open_input(events_path);
      events = read_events(in);
    }
    const double until = events.empty() ? 0.0 : events.back().t + 2.0;
    frames = events_to_frames(events, config.frame_rate, until);
  } else {
    std::vector<float> samples;
    double rate = raw_rate;
    if (raw_f32) {
      if (audio_path == "-") {
        samples = read_raw_f32(std::cin);
      } else {
        auto in = open_input(audio_path);
        samples = read_raw_f32(in);
      }
    } else {
      samples = read_wav(audio_path, 0.0, &rate);
    }
    AudioParams ap;
    ap.sample_rate = rate;
    ap.fft_size = fft_size;
    ap.onset_threshold = onset_threshold;
    const double hop = rate / config.frame_rate;
    ap.hop = static_cast<int>(hop);
    if (static_cast<double>(ap.hop) != hop)
      throw std::runtime_error("sample rate must be an integer multiple of the frame rate");
    frames = audio_to_frames(samples, ap);
    events = events_from_audio(samples, ap);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<TrackerOutput> outputs = tracker_run(frames, events, index, config);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;

  if (out_path == "-") {
    write_outputs(std::cout, outputs);
  } else {
    auto out = open_output(out_path);
    write_outputs(out, outputs);
  }

  const double span = frames.empty() ? 0.0 : frames.back().t;
  std::cerr << "track: " << frames.size() << " frames, " << events.size()
            << " events, " << outputs.size() << " outputs in " << elapsed.count()
            << " s";
  if (span > 0.0) std::cerr << " (rtf " << elapsed.count() / span << ")";
  std::cerr << "\n";
  return 0;
}

int run_eval(const std::string& index_path, const std::string& track_path,
             const std::string& truth_path, const std::string& score_id,
             const std::string& jumps_path, std::optional<double> processing_s,
             const std::string& out_path) {
  const FingerprintIndex index = FingerprintIndex::load(index_path);
  const Score* score = index.database().find(score_id);
  if (score == nullptr) throw std::runtime_error("unknown score id: " + score_id);

  std::vector<TrackerOutput> outputs;
  if (track_path == "-") {
    outputs = read_outputs(std::cin);
  } else {
    auto in = open_input(track_path);
    outputs = read_outputs(in);
  }
  auto truth_in = open_input(truth_path);
  const GroundTruth truth = read_truth(truth_in);
  std::vector<double> jumps;
  if (!jumps_path.empty()) {
    auto jumps_in = open_input(jumps_path);
    jumps = read_jump_times(jumps_in);
  }

  const EvalReport report = evaluate(outputs, truth, *score, jumps, processing_s);
  const std::string text = report_to_json_text(report);
  if (out_path == "-") {
    std::cout << text;
  } else {
    auto out = open_output(out_path);
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Real-time identification and score alignment of live performances"};
  app.require_subcommand(1);

  // build-index
  auto* build = app.add_subcommand("build-index", "Build a fingerprint index from a score directory");
  std::string scores_dir, index_out;
  int fanout = FpParams{}.fanout;
  build->add_option("--scores", scores_dir, "directory of score JSON files")
      ->required()->check(CLI::ExistingDirectory);
  build->add_option("--out", index_out, "output index file")->required();
  build->add_option("--fanout", fanout, "pairing fan-out per anchor")->capture_default_str();
  add_fp_query_flags(*build);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Render a synthetic performance of an indexed score");
  std::string sim_index, sim_script, sim_score, sim_events, sim_truth, sim_jumps;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--index", sim_index, "index file (source of score definitions)")
      ->required()->check(CLI::ExistingFile);
  sim->add_option("--script", sim_script, "performance script JSON")->check(CLI::ExistingFile);
  sim->add_option("--score", sim_score, "score id (overrides the script)");
  sim->add_option("--seed", sim_seed, "random seed (overrides the script)");
  sim->add_option("--events", sim_events, "output note-event stream")->required();
  sim->add_option("--truth", sim_truth, "output ground-truth stream")->required();
  sim->add_option("--jumps", sim_jumps, "output jump-time stream");

  // track
  auto* track = app.add_subcommand("track", "Follow a live event or audio stream against the index");
  std::string trk_index, trk_events, trk_audio, trk_out = "-";
  bool trk_raw = false;
  double trk_rate = 44100.0;
  TrackerConfig config;
  int fft_size = AudioParams{}.fft_size;
  double onset_threshold = AudioParams{}.onset_threshold;
  track->add_option("--index", trk_index, "index file")->required()->check(CLI::ExistingFile);
  auto* input = track->add_option_group("input", "exactly one input stream");
  input->add_option("--events", trk_events, "note-event stream (JSON lines), - for stdin");
  input->add_option("--audio", trk_audio, "mono audio input (16-bit PCM WAV), - for stdin with --raw-f32");
  input->require_option(1);
  track->add_flag("--raw-f32", trk_raw, "treat --audio as raw little-endian float32 samples");
  track->add_option("--rate", trk_rate, "sample rate for --raw-f32 input")->capture_default_str();
  track->add_option("--out", trk_out, "output stream, - for stdout")->capture_default_str();
  track->add_option("--max-agents", config.max_agents, "concurrent alignment agents")->capture_default_str();
  track->add_option("--warmup", config.warmup_s, "agent warm-up before it may report, seconds")->capture_default_str();
  track->add_option("--kill-ratio", config.kill_ratio, "kill agents above this cost ratio vs. the best")->capture_default_str();
  track->add_option("--kill-sustain", config.kill_sustain_s, "how long the kill ratio must hold, seconds")->capture_default_str();
  track->add_option("--exclusion-beats", config.spawn_exclusion_beats, "no-spawn zone around a live agent, beats")->capture_default_str();
  track->add_option("--query-every", config.query_every_n_events, "events between fingerprint queries")->capture_default_str();
  track->add_option("--window", config.oltw.window, "alignment band width, frames")->capture_default_str();
  track->add_option("--max-run-count", config.oltw.max_run_count, "max consecutive single-direction expansions")->capture_default_str();
  track->add_option("--fft-size", fft_size, "FFT size for audio input")->capture_default_str();
  track->add_option("--onset-threshold", onset_threshold, "spectral-flux onset threshold")->capture_default_str();
  add_fp_query_flags(*track);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a tracker output stream against ground truth");
  std::string ev_index, ev_track, ev_truth, ev_score, ev_jumps, ev_out = "-";
  std::optional<double> ev_processing;
  ev->add_option("--index", ev_index, "index file (source of score definitions)")
      ->required()->check(CLI::ExistingFile);
  ev->add_option("--track", ev_track, "tracker output stream, - for stdin")->required();
  ev->add_option("--truth", ev_truth, "ground-truth stream")->required()->check(CLI::ExistingFile);
  ev->add_option("--score-id", ev_score, "expected score id")->required();
  ev->add_option("--jumps", ev_jumps, "jump-time stream")->check(CLI::ExistingFile);
  ev->add_option("--processing-seconds", ev_processing, "wall-clock processing time, for the real-time factor");
  ev->add_option("--out", ev_out, "report file, - for stdout")->capture_default_str();

  try {
    app.parse(argc, argv);
    if (build->parsed()) return run_build_index(scores_dir, index_out, fanout, *build);
    if (sim->parsed())
      return run_simulate(sim_index, sim_script, sim_score, sim_seed, sim_events,
                          sim_truth, sim_jumps);
    if (track->parsed())
      return run_track(*track, trk_index, trk_events, trk_audio, trk_raw, trk_rate,
                       trk_out, config, fft_size, onset_threshold);
    if (ev->parsed())
      return run_eval(ev_index, ev_track, ev_truth, ev_score, ev_jumps, ev_processing,
                      ev_out);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
