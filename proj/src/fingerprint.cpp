#include "scoretrack/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace scoretrack {

namespace {

constexpr double kTdrMin = 1.0 / 16.0;  // 2^-4
constexpr double kTdrMax = 16.0;        // 2^4
constexpr char kMagic[5] = {'S', 'P', 'F', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const std::size_t at = buf_.size();
    buf_.resize(at + sizeof(T));
    std::memcpy(buf_.data() + at, &v, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos_ + sizeof(T) > bytes_.size()) throw std::runtime_error("index: truncated file");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint32_t>();
    if (pos_ + len > bytes_.size()) throw std::runtime_error("index: truncated file");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t FingerprintToken::packed() const {
  return (static_cast<std::uint32_t>(pa) << 20) | (static_cast<std::uint32_t>(pb) << 13) |
         (static_cast<std::uint32_t>(pc) << 6) | (r_bucket & 0x3f);
}

FingerprintToken FingerprintToken::unpack(std::uint32_t bits) {
  FingerprintToken t;
  t.pa = static_cast<std::uint8_t>((bits >> 20) & 0x7f);
  t.pb = static_cast<std::uint8_t>((bits >> 13) & 0x7f);
  t.pc = static_cast<std::uint8_t>((bits >> 6) & 0x7f);
  t.r_bucket = static_cast<std::uint8_t>(bits & 0x3f);
  return t;
}

int FingerprintToken::ratio_bucket(double tdr) {
  const int raw = static_cast<int>(std::floor((std::log2(tdr) + 4.0) * 8.0));
  return std::clamp(raw, 0, 63);
}

std::vector<TimedPitch> expand_events(std::span<const NoteEvent> events) {
  std::vector<TimedPitch> entries;
  for (const NoteEvent& e : events) {
    auto pitches = e.pitches;
    std::sort(pitches.begin(), pitches.end());
    for (int p : pitches) entries.push_back({e.t, p});
  }
  return entries;
}

std::vector<TokenOccurrence> tokens_from_events(std::span<const TimedPitch> entries,
                                                int fanout) {
  std::vector<TokenOccurrence> occs;
  const std::size_t n = entries.size();
  for (std::size_t a = 0; a < n; ++a) {
    // The fan-out budget counts distinct onset times, not entries, so chord
    // tones sharing an onset do not crowd out later events.
    int b_times = 0;
    double b_time = entries[a].t;
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!(entries[b].t > entries[a].t)) continue;
      if (entries[b].t > b_time) {
        if (++b_times > fanout) break;
        b_time = entries[b].t;
      }
      const double span_ab = entries[b].t - entries[a].t;
      int c_times = 0;
      double c_time = entries[b].t;
      for (std::size_t c = b + 1; c < n; ++c) {
        if (!(entries[c].t > entries[b].t)) continue;
        if (entries[c].t > c_time) {
          if (++c_times > fanout) break;
          c_time = entries[c].t;
        }
        const double tdr = (entries[c].t - entries[b].t) / span_ab;
        if (tdr < kTdrMin || tdr > kTdrMax) continue;
        FingerprintToken tok;
        tok.pa = static_cast<std::uint8_t>(entries[a].pitch);
        tok.pb = static_cast<std::uint8_t>(entries[b].pitch);
        tok.pc = static_cast<std::uint8_t>(entries[c].pitch);
        tok.r_bucket = static_cast<std::uint8_t>(FingerprintToken::ratio_bucket(tdr));
        occs.push_back({tok.packed(), static_cast<std::uint32_t>(a),
                        static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)});
      }
    }
  }
  return occs;
}

FingerprintIndex FingerprintIndex::build(const ScoreDatabase& db, FpParams params) {
  FingerprintIndex index;
  index.db_ = db;
  index.params_ = params;
  index.fanout_ = params.fanout;

  struct Entry {
    std::uint32_t token;
    Posting posting;
  };
  std::vector<Entry> entries;
  std::uint32_t score_index = 0;
  for (const auto& [id, score] : index.db_.scores) {
    index.score_ids_.push_back(id);
    index.sec_per_beat_.push_back(60.0 / score.nominal_bpm);
    index.end_beats_.push_back(score.end_beat());
    const auto events = score.events();
    std::vector<TimedPitch> timed(events.size());
    for (std::size_t i = 0; i < events.size(); ++i)
      timed[i] = {events[i].beat, events[i].pitch};
    for (const TokenOccurrence& occ : tokens_from_events(timed, params.fanout)) {
      Posting p;
      p.score_index = score_index;
      p.anchor_index = occ.a;
      p.anchor_beat = static_cast<float>(events[occ.a].beat);
      p.ref_span = static_cast<float>(events[occ.b].beat - events[occ.a].beat);
      entries.push_back({occ.token, p});
    }
    ++score_index;
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    if (x.token != y.token) return x.token < y.token;
    if (x.posting.score_index != y.posting.score_index)
      return x.posting.score_index < y.posting.score_index;
    if (x.posting.anchor_beat != y.posting.anchor_beat)
      return x.posting.anchor_beat < y.posting.anchor_beat;
    return x.posting.anchor_index < y.posting.anchor_index;
  });

  index.postings_.reserve(entries.size());
  for (const Entry& e : entries) {
    if (index.token_keys_.empty() || index.token_keys_.back() != e.token) {
      index.token_keys_.push_back(e.token);
      index.offsets_.push_back(index.postings_.size());
    }
    index.postings_.push_back(e.posting);
  }
  index.offsets_.push_back(index.postings_.size());
  return index;
}

std::span<const Posting> FingerprintIndex::lookup(std::uint32_t token) const {
  const auto it = std::lower_bound(token_keys_.begin(), token_keys_.end(), token);
  if (it == token_keys_.end() || *it != token) return {};
  const std::size_t i = static_cast<std::size_t>(it - token_keys_.begin());
  return {postings_.data() + offsets_[i], postings_.data() + offsets_[i + 1]};
}

std::map<FingerprintIndex::BinKey, FingerprintIndex::Bin> FingerprintIndex::gather(
    std::span<const NoteEvent> recent_events, double t_now,
    std::size_t* token_count) const {
  const auto grouped = merge_chords(recent_events, params_.chord_group_s);
  const auto entries = expand_events(grouped);
  const auto occs = tokens_from_events(entries, fanout_);
  if (token_count) *token_count = occs.size();

  std::map<BinKey, Bin> bins;
  for (std::size_t qi = 0; qi < occs.size(); ++qi) {
    const TokenOccurrence& occ = occs[qi];
    const FingerprintToken tok = FingerprintToken::unpack(occ.token);
    const double t_anchor = entries[occ.a].t;
    const double perf_span = entries[occ.b].t - t_anchor;
    for (int probe = -params_.bucket_probe; probe <= params_.bucket_probe; ++probe) {
      const int rb = static_cast<int>(tok.r_bucket) + probe;
      if (rb < 0 || rb > 63) continue;
      FingerprintToken probed = tok;
      probed.r_bucket = static_cast<std::uint8_t>(rb);
      for (const Posting& post : lookup(probed.packed())) {
        const double spb = sec_per_beat_[post.score_index];
        const double tempo = perf_span / (post.ref_span * spb);
        if (tempo < params_.tempo_min || tempo > params_.tempo_max) continue;
        const double projected = post.anchor_beat + (t_now - t_anchor) / (tempo * spb);
        const auto bin = static_cast<std::int64_t>(std::floor(projected / params_.bin_beats));
        Bin& b = bins[{post.score_index, bin}];
        b.votes += 1;
        if (b.last_occurrence != qi) {
          b.last_occurrence = static_cast<std::uint32_t>(qi);
          b.strength += 1;
        }
        b.samples.push_back({tempo, post.anchor_beat, t_anchor,
                             static_cast<std::uint32_t>(qi)});
      }
    }
  }
  return bins;
}

std::vector<Hypothesis> FingerprintIndex::query(std::span<const NoteEvent> recent_events,
                                                double t_now) const {
  std::size_t token_count = 0;
  const auto bins = gather(recent_events, t_now, &token_count);
  if (token_count == 0) return {};

  struct Candidate {
    BinKey key;
    const Bin* bin;
  };
  std::vector<Candidate> cands;
  for (const auto& [key, bin] : bins) {
    const double coverage = static_cast<double>(bin.strength) / token_count;
    if (bin.strength >= params_.min_strength && coverage >= params_.min_coverage)
      cands.push_back({key, &bin});
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    if (x.bin->strength != y.bin->strength) return x.bin->strength > y.bin->strength;
    if (x.bin->votes != y.bin->votes) return x.bin->votes > y.bin->votes;
    return x.key < y.key;
  });

  std::vector<Hypothesis> hyps;
  for (const Candidate& cand : cands) {
    if (static_cast<int>(hyps.size()) >= params_.max_hypotheses) break;
    std::vector<double> tempos;
    tempos.reserve(cand.bin->samples.size());
    for (const PairSample& s : cand.bin->samples) tempos.push_back(s.tempo);
    const double tempo_est = median(std::move(tempos));
    const double spb = sec_per_beat_[cand.key.first];
    std::vector<double> beats;
    beats.reserve(cand.bin->samples.size());
    for (const PairSample& s : cand.bin->samples)
      beats.push_back(s.anchor_beat + (t_now - s.t_anchor) / (tempo_est * spb));
    Hypothesis h;
    h.score_id = score_ids_[cand.key.first];
    h.beat = std::clamp(median(std::move(beats)), 0.0, end_beats_[cand.key.first]);
    h.tempo_factor = tempo_est;
    h.strength = cand.bin->strength;
    h.coverage = static_cast<double>(cand.bin->strength) / token_count;
    hyps.push_back(std::move(h));
  }
  return hyps;
}

std::map<FingerprintIndex::BinKey, long> FingerprintIndex::vote_counts(
    std::span<const NoteEvent> recent_events, double t_now) const {
  std::map<BinKey, long> out;
  for (const auto& [key, bin] : gather(recent_events, t_now, nullptr))
    out[key] = bin.votes;
  return out;
}

std::vector<std::uint8_t> FingerprintIndex::serialize() const {
  Writer w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kVersion);
  w.put<std::int32_t>(params_.fanout);
  w.put<std::int32_t>(params_.window_events);
  w.put<std::int32_t>(params_.min_strength);
  w.put<double>(params_.min_coverage);
  w.put<std::int32_t>(params_.max_hypotheses);
  w.put<double>(params_.bin_beats);
  w.put<std::int32_t>(params_.bucket_probe);
  w.put<double>(params_.chord_group_s);
  w.put<double>(params_.tempo_min);
  w.put<double>(params_.tempo_max);

  w.put<std::uint32_t>(static_cast<std::uint32_t>(db_.scores.size()));
  for (const auto& [id, score] : db_.scores) {
    w.put_string(id);
    w.put_string(score.title);
    w.put<double>(score.nominal_bpm);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(score.notes.size()));
    for (const Note& n : score.notes) {
      w.put<std::uint8_t>(static_cast<std::uint8_t>(n.pitch));
      w.put<double>(n.onset);
      w.put<double>(n.duration);
    }
  }

  w.put<std::uint64_t>(token_keys_.size());
  for (std::uint32_t t : token_keys_) w.put<std::uint32_t>(t);
  for (std::uint64_t o : offsets_) w.put<std::uint64_t>(o);
  w.put<std::uint64_t>(postings_.size());
  for (const Posting& p : postings_) {
    w.put<std::uint32_t>(p.score_index);
    w.put<std::uint32_t>(p.anchor_index);
    w.put<float>(p.anchor_beat);
    w.put<float>(p.ref_span);
  }

  std::vector<std::uint8_t> bytes = w.take();
  Writer tail;
  tail.put<std::uint64_t>(fnv1a(bytes));
  const auto trailer = tail.take();
  bytes.insert(bytes.end(), trailer.begin(), trailer.end());
  return bytes;
}

FingerprintIndex FingerprintIndex::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw std::runtime_error("index: truncated file");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (fnv1a(bytes.subspan(0, body)) != stored)
    throw std::runtime_error("index: checksum mismatch");

  Reader r(bytes.subspan(0, body));
  for (char c : kMagic)
    if (r.get<char>() != c) throw std::runtime_error("index: bad magic");
  if (r.get<std::uint32_t>() != kVersion)
    throw std::runtime_error("index: unsupported version");

  FingerprintIndex index;
  index.params_.fanout = r.get<std::int32_t>();
  index.params_.window_events = r.get<std::int32_t>();
  index.params_.min_strength = r.get<std::int32_t>();
  index.params_.min_coverage = r.get<double>();
  index.params_.max_hypotheses = r.get<std::int32_t>();
  index.params_.bin_beats = r.get<double>();
  index.params_.bucket_probe = r.get<std::int32_t>();
  index.params_.chord_group_s = r.get<double>();
  index.params_.tempo_min = r.get<double>();
  index.params_.tempo_max = r.get<double>();
  index.fanout_ = index.params_.fanout;

  const auto n_scores = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_scores; ++i) {
    Score score;
    score.id = r.get_string();
    score.title = r.get_string();
    score.nominal_bpm = r.get<double>();
    const auto n_notes = r.get<std::uint32_t>();
    score.notes.reserve(n_notes);
    for (std::uint32_t k = 0; k < n_notes; ++k) {
      Note n;
      n.pitch = r.get<std::uint8_t>();
      n.onset = r.get<double>();
      n.duration = r.get<double>();
      score.notes.push_back(n);
    }
    normalize_score(score);
    index.score_ids_.push_back(score.id);
    index.sec_per_beat_.push_back(60.0 / score.nominal_bpm);
    index.end_beats_.push_back(score.end_beat());
    index.db_.scores.emplace(score.id, std::move(score));
  }

  const auto n_tokens = r.get<std::uint64_t>();
  index.token_keys_.resize(n_tokens);
  for (auto& t : index.token_keys_) t = r.get<std::uint32_t>();
  index.offsets_.resize(n_tokens + 1);
  for (auto& o : index.offsets_) o = r.get<std::uint64_t>();
  const auto n_postings = r.get<std::uint64_t>();
  index.postings_.resize(n_postings);
  for (auto& p : index.postings_) {
    p.score_index = r.get<std::uint32_t>();
    p.anchor_index = r.get<std::uint32_t>();
    p.anchor_beat = r.get<float>();
    p.ref_span = r.get<float>();
  }
  return index;
}

void FingerprintIndex::save(const std::filesystem::path& file) const {
  const auto bytes = serialize();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write index file: " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to index file: " + file.string());
}

FingerprintIndex FingerprintIndex::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open index file: " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
}

}  // namespace scoretrack
