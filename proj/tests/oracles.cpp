#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace oracle {

using scoretrack::FeatureFrame;
using scoretrack::FpParams;
using scoretrack::NoteEvent;
using scoretrack::ScoreDatabase;

double cosine_distance(const FeatureFrame& a, const FeatureFrame& b) {
  long double dot = 0, na = 0, nb = 0;
  for (int k = 0; k < scoretrack::kNumBands; ++k) {
    dot += static_cast<long double>(a.v[k]) * b.v[k];
    na += static_cast<long double>(a.v[k]) * a.v[k];
    nb += static_cast<long double>(b.v[k]) * b.v[k];
  }
  if (na == 0 || nb == 0) return 1.0;
  long double c = dot / std::sqrt(na * nb);
  if (c > 1) c = 1;
  if (c < -1) c = -1;
  return static_cast<double>(1.0L - c);
}

DtwResult full_dtw(std::span<const FeatureFrame> ref, std::span<const FeatureFrame> live) {
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(live.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(n) * m, inf);
  std::vector<std::uint8_t> pred(static_cast<std::size_t>(n) * m, 0);  // 1=diag 2=ref 3=live
  const auto at = [&](int i, int j) -> std::size_t {
    return static_cast<std::size_t>(i) * m + j;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double d = cosine_distance(ref[i], live[j]);
      if (i == 0 && j == 0) {
        cost[at(0, 0)] = d;
        continue;
      }
      double best = inf;
      std::uint8_t dir = 0;
      if (i > 0 && j > 0 && cost[at(i - 1, j - 1)] < best) {
        best = cost[at(i - 1, j - 1)];
        dir = 1;
      }
      if (i > 0 && cost[at(i - 1, j)] < best) {
        best = cost[at(i - 1, j)];
        dir = 2;
      }
      if (j > 0 && cost[at(i, j - 1)] < best) {
        best = cost[at(i, j - 1)];
        dir = 3;
      }
      cost[at(i, j)] = best + d;
      pred[at(i, j)] = dir;
    }
  }
  DtwResult r;
  r.total_cost = cost[at(n - 1, m - 1)];
  int i = n - 1, j = m - 1;
  while (true) {
    r.path.push_back({i, j});
    const std::uint8_t dir = pred[at(i, j)];
    if (dir == 0) break;
    if (dir == 1) {
      --i;
      --j;
    } else if (dir == 2) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

std::vector<int> path_positions(const DtwResult& r, int n_live) {
  std::vector<int> pos(static_cast<std::size_t>(n_live), 0);
  for (const auto& [i, j] : r.path)
    pos[static_cast<std::size_t>(j)] = std::max(pos[static_cast<std::size_t>(j)], i);
  return pos;
}

namespace {

struct Entry {
  double t;
  int pitch;
};

struct Triple {
  std::uint32_t token;
  std::size_t a, b, c;
};

std::uint32_t pack(int pa, int pb, int pc, int bucket) {
  return (static_cast<std::uint32_t>(pa) << 20) | (static_cast<std::uint32_t>(pb) << 13) |
         (static_cast<std::uint32_t>(pc) << 6) | static_cast<std::uint32_t>(bucket);
}

int bucket_of(double tdr) {
  int b = static_cast<int>(std::floor((std::log2(tdr) + 4.0) * 8.0));
  if (b < 0) b = 0;
  if (b > 63) b = 63;
  return b;
}

/// All triples under the pairing rule: b runs over every entry in the next
/// `fanout` distinct onset times after t_a, c over entries in the next
/// `fanout` distinct onset times after t_b; tdr in [1/16, 16].
std::vector<Triple> all_triples(const std::vector<Entry>& entries, int fanout) {
  std::vector<Triple> out;
  for (std::size_t a = 0; a < entries.size(); ++a) {
    int b_times = 0;
    double b_seen = entries[a].t;
    for (std::size_t b = a + 1; b < entries.size(); ++b) {
      if (entries[b].t <= entries[a].t) continue;
      if (entries[b].t > b_seen) {
        if (++b_times > fanout) break;
        b_seen = entries[b].t;
      }
      int c_times = 0;
      double c_seen = entries[b].t;
      for (std::size_t c = b + 1; c < entries.size(); ++c) {
        if (entries[c].t <= entries[b].t) continue;
        if (entries[c].t > c_seen) {
          if (++c_times > fanout) break;
          c_seen = entries[c].t;
        }
        const double tdr = (entries[c].t - entries[b].t) / (entries[b].t - entries[a].t);
        if (tdr < 1.0 / 16.0 || tdr > 16.0) continue;
        out.push_back({pack(entries[a].pitch, entries[b].pitch, entries[c].pitch,
                            bucket_of(tdr)),
                       a, b, c});
      }
    }
  }
  return out;
}

std::vector<Entry> group_and_expand(std::span<const NoteEvent> events, double window_s) {
  // Greedy grouping anchored at each group's first onset, then one entry
  // per distinct pitch at the group time.
  std::vector<Entry> entries;
  std::size_t i = 0;
  while (i < events.size()) {
    const double t0 = events[i].t;
    std::vector<int> pitches;
    while (i < events.size() && events[i].t - t0 <= window_s) {
      for (int p : events[i].pitches) pitches.push_back(p);
      ++i;
    }
    std::sort(pitches.begin(), pitches.end());
    pitches.erase(std::unique(pitches.begin(), pitches.end()), pitches.end());
    for (int p : pitches) entries.push_back({t0, p});
  }
  return entries;
}

}  // namespace

std::map<std::pair<std::uint32_t, std::int64_t>, long> brute_votes(
    const ScoreDatabase& db, std::span<const NoteEvent> recent, double t_now,
    const FpParams& params) {
  const std::vector<Entry> query_entries = group_and_expand(recent, params.chord_group_s);
  const std::vector<Triple> query_triples = all_triples(query_entries, params.fanout);

  std::map<std::pair<std::uint32_t, std::int64_t>, long> votes;
  std::uint32_t score_index = 0;
  for (const auto& [id, score] : db.scores) {
    (void)id;
    std::vector<Entry> score_entries;
    for (const auto& ev : score.events()) score_entries.push_back({ev.beat, ev.pitch});
    const std::vector<Triple> score_triples = all_triples(score_entries, params.fanout);
    const double spb = 60.0 / score.nominal_bpm;

    for (const Triple& q : query_triples) {
      const double t_anchor = query_entries[q.a].t;
      const double perf_span = query_entries[q.b].t - t_anchor;
      for (int probe = -params.bucket_probe; probe <= params.bucket_probe; ++probe) {
        const int bucket = static_cast<int>(q.token & 0x3f) + probe;
        if (bucket < 0 || bucket > 63) continue;
        const std::uint32_t want = (q.token & ~0x3fu) | static_cast<std::uint32_t>(bucket);
        for (const Triple& s : score_triples) {
          if (s.token != want) continue;
          // Spans and anchors are quantized to f32 exactly as the index
          // stores its postings.
          const double ref_span = static_cast<double>(
              static_cast<float>(score_entries[s.b].t - score_entries[s.a].t));
          const double anchor_beat =
              static_cast<double>(static_cast<float>(score_entries[s.a].t));
          const double tempo = perf_span / (ref_span * spb);
          if (tempo < params.tempo_min || tempo > params.tempo_max) continue;
          const double projected = anchor_beat + (t_now - t_anchor) / (tempo * spb);
          const auto bin =
              static_cast<std::int64_t>(std::floor(projected / params.bin_beats));
          votes[{score_index, bin}] += 1;
        }
      }
    }
    ++score_index;
  }
  return votes;
}

std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& in) {
  const std::size_t n = in.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) *
                           static_cast<double>(j) / static_cast<double>(n);
      acc += in[j] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace oracle
