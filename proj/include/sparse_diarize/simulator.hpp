#pragma once

// Synthetic embedding signals with known ground truth. Each speaker owns a
// fixed unit embedding; a chunk where two speakers talk at once is the
// weighted average of their embeddings (renormalized), which is exactly the
// linear-mixing behaviour the factorization relies on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sparse_diarize/decoder.hpp"
#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/signal.hpp"
#include "sparse_diarize/text.hpp"

namespace sparse_diarize {

struct SimScenario {
  std::size_t num_speakers = 3;
  std::size_t embedding_dim = 32;
  std::size_t num_steps = 300;
  double step_seconds = 1.0;
  double window_seconds = kDefaultWindowSeconds;
  std::size_t mean_turn_steps = 20;
  double overlap_fraction = 0.0;  // of speech steps
  double silence_fraction = 0.0;  // of all steps
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  // Weight of the ongoing speaker in an overlap column; 0.5 is an even mix.
  double mix_weight = 0.5;
  // Number of contiguous overlap regions the overlap budget is split into.
  std::size_t overlap_regions = 1;
  // Replace the Gaussian embeddings with an orthonormal set.
  bool orthogonalize = false;

  void validate() const {
    if (num_speakers == 0) throw InvalidArgument("num_speakers must be positive");
    if (embedding_dim == 0 || num_steps == 0) throw InvalidArgument("M and T must be positive");
    if (num_speakers > embedding_dim) throw InvalidArgument("num_speakers must not exceed M");
    if (!(step_seconds > 0.0) || !(window_seconds >= step_seconds)) {
      throw InvalidArgument("need step_seconds > 0 and window_seconds >= step_seconds");
    }
    if (mean_turn_steps == 0) throw InvalidArgument("mean_turn_steps must be positive");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0) ||
        !(silence_fraction >= 0.0 && silence_fraction < 1.0)) {
      throw InvalidArgument("overlap and silence fractions must lie in [0, 1)");
    }
    if (!(overlap_fraction + silence_fraction < 1.0)) {
      throw InvalidArgument("infeasible scenario: overlap_fraction + silence_fraction >= 1");
    }
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be non-negative");
    if (!(mix_weight > 0.0 && mix_weight < 1.0)) throw InvalidArgument("mix_weight must lie in (0, 1)");
    if (overlap_fraction > 0.0 && num_speakers < 2) {
      throw InvalidArgument("overlap needs at least two speakers");
    }
    if (overlap_regions == 0) throw InvalidArgument("overlap_regions must be positive");
  }
};

struct SimResult {
  EmbeddingSignal signal;
  Eigen::MatrixXd truth;              // num_speakers x T, entries 0 or 1
  Eigen::MatrixXd embeddings;         // M x num_speakers, unit columns
  Diarization reference;
  std::vector<std::size_t> overlap_steps;  // ascending
};

namespace detail {

inline Eigen::MatrixXd speaker_embeddings(const SimScenario& sc, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto m = static_cast<Eigen::Index>(sc.embedding_dim);
  const auto s = static_cast<Eigen::Index>(sc.num_speakers);
  Eigen::MatrixXd e(m, s);
  for (Eigen::Index c = 0; c < s; ++c) {
    for (Eigen::Index r = 0; r < m; ++r) e(r, c) = gauss(rng);
  }
  if (sc.orthogonalize) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(e);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, s);
    return q;
  }
  e.colwise().normalize();
  return e;
}

// Splits `total` into `parts` positive integers (parts <= total) at random.
inline std::vector<std::size_t> random_composition(std::size_t total, std::size_t parts,
                                                   std::mt19937_64& rng) {
  std::vector<std::size_t> cuts(total - 1);
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(parts - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (auto c : cuts) {
    sizes.push_back(c - prev);
    prev = c;
  }
  sizes.push_back(total - prev);
  return sizes;
}

}  // namespace detail

inline SimResult simulate(const SimScenario& sc) {
  sc.validate();
  std::mt19937_64 rng(sc.seed);
  const Eigen::MatrixXd embeddings = detail::speaker_embeddings(sc, rng);
  const std::size_t steps = sc.num_steps;
  const auto silent_total = static_cast<std::size_t>(std::llround(sc.silence_fraction * static_cast<double>(steps)));
  const std::size_t speech_total = steps - silent_total;

  // Turn sequence over the speech steps.
  std::vector<int> speech_owner;
  speech_owner.reserve(speech_total);
  std::vector<std::size_t> turn_ends;  // speech-index positions where a turn ends
  {
    std::geometric_distribution<std::size_t> extra(1.0 / static_cast<double>(sc.mean_turn_steps));
    std::uniform_int_distribution<int> any(0, static_cast<int>(sc.num_speakers) - 1);
    int speaker = any(rng);
    while (speech_owner.size() < speech_total) {
      const std::size_t len = std::min(1 + extra(rng), speech_total - speech_owner.size());
      speech_owner.insert(speech_owner.end(), len, speaker);
      turn_ends.push_back(speech_owner.size());
      if (sc.num_speakers > 1) {
        std::uniform_int_distribution<int> other(0, static_cast<int>(sc.num_speakers) - 2);
        const int next = other(rng);
        speaker = next >= speaker ? next + 1 : next;
      }
    }
  }

  // Silence gaps, inserted at turn boundaries (including both ends).
  std::vector<int> owner(steps, -1);
  {
    std::map<std::size_t, std::size_t> gap_at;  // speech position -> gap length
    if (silent_total > 0) {
      std::vector<std::size_t> slots{0};
      slots.insert(slots.end(), turn_ends.begin(), turn_ends.end());
      slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
      std::shuffle(slots.begin(), slots.end(), rng);
      const std::size_t wanted = std::max<std::size_t>(
          1, (silent_total + sc.mean_turn_steps - 1) / sc.mean_turn_steps);
      const std::size_t gaps = std::min({wanted, slots.size(), silent_total});
      const auto sizes = detail::random_composition(silent_total, gaps, rng);
      for (std::size_t g = 0; g < gaps; ++g) gap_at[slots[g]] = sizes[g];
    }
    std::size_t t = 0;
    for (std::size_t pos = 0; pos <= speech_total; ++pos) {
      if (auto it = gap_at.find(pos); it != gap_at.end()) t += it->second;
      if (pos < speech_total) owner[t++] = speech_owner[pos];
    }
  }

  // Overlap regions: contiguous speech runs where a second speaker joins.
  std::vector<int> partner(steps, -1);
  std::vector<std::size_t> overlap_steps;
  const auto overlap_total = static_cast<std::size_t>(
      std::llround(sc.overlap_fraction * static_cast<double>(speech_total)));
  if (overlap_total > 0) {
    const std::size_t regions = std::min(sc.overlap_regions, overlap_total);
    const auto sizes = detail::random_composition(overlap_total, regions, rng);
    for (std::size_t len : sizes) {
      std::vector<std::size_t> starts;
      for (std::size_t s = 0; s + len <= steps; ++s) {
        bool ok = true;
        for (std::size_t t = s; t < s + len && ok; ++t) ok = owner[t] >= 0 && partner[t] < 0;
        if (ok) starts.push_back(s);
      }
      if (starts.empty()) {
        throw InvalidArgument("infeasible scenario: no room for an overlap region of " +
                              std::to_string(len) + " steps");
      }
      const std::size_t s = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
      std::map<int, int> joiner;
      for (std::size_t t = s; t < s + len; ++t) {
        auto [it, fresh] = joiner.try_emplace(owner[t], -1);
        if (fresh) {
          std::uniform_int_distribution<int> other(0, static_cast<int>(sc.num_speakers) - 2);
          const int pick = other(rng);
          it->second = pick >= owner[t] ? pick + 1 : pick;
        }
        partner[t] = it->second;
        overlap_steps.push_back(t);
      }
    }
    std::sort(overlap_steps.begin(), overlap_steps.end());
  }

  const auto m = static_cast<Eigen::Index>(sc.embedding_dim);
  Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(steps));
  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sc.num_speakers),
                                                static_cast<Eigen::Index>(steps));
  std::normal_distribution<double> noise(0.0, sc.noise_sigma > 0.0 ? sc.noise_sigma : 1.0);
  for (std::size_t t = 0; t < steps; ++t) {
    if (owner[t] < 0) continue;
    const auto col = static_cast<Eigen::Index>(t);
    truth(owner[t], col) = 1.0;
    if (partner[t] >= 0) {
      truth(partner[t], col) = 1.0;
      columns.col(col) = sc.mix_weight * embeddings.col(owner[t]) +
                         (1.0 - sc.mix_weight) * embeddings.col(partner[t]);
    } else {
      columns.col(col) = embeddings.col(owner[t]);
    }
    if (sc.noise_sigma > 0.0) {
      for (Eigen::Index r = 0; r < m; ++r) columns(r, col) += noise(rng);
    }
  }

  EmbeddingSignal signal = normalize_columns(columns, sc.step_seconds, sc.window_seconds);
  const ChunkGrid grid = signal.grid();
  Diarization reference = decode(truth, grid, DecodeOptions{0.5, 1, 0.0});
  return SimResult{std::move(signal), std::move(truth), embeddings, std::move(reference),
                   std::move(overlap_steps)};
}

// Reads "key = value" lines ('#' starts a comment) into a scenario, starting
// from `base`. Keys are the SimScenario field names.
inline SimScenario parse_scenario(std::string_view text, SimScenario base = {}) {
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    auto line = raw.substr(0, raw.find('#'));
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    auto as_size = [&] { return detail::parse_number<std::size_t>(value, line_no); };
    auto as_real = [&] { return detail::parse_number<double>(value, line_no); };
    if (key == "num_speakers") base.num_speakers = as_size();
    else if (key == "embedding_dim") base.embedding_dim = as_size();
    else if (key == "num_steps") base.num_steps = as_size();
    else if (key == "step_seconds") base.step_seconds = as_real();
    else if (key == "window_seconds") base.window_seconds = as_real();
    else if (key == "mean_turn_steps") base.mean_turn_steps = as_size();
    else if (key == "overlap_fraction") base.overlap_fraction = as_real();
    else if (key == "silence_fraction") base.silence_fraction = as_real();
    else if (key == "noise_sigma") base.noise_sigma = as_real();
    else if (key == "seed") base.seed = detail::parse_number<std::uint64_t>(value, line_no);
    else if (key == "mix_weight") base.mix_weight = as_real();
    else if (key == "overlap_regions") base.overlap_regions = as_size();
    else if (key == "orthogonalize") {
      if (value == "true" || value == "1") base.orthogonalize = true;
      else if (value == "false" || value == "0") base.orthogonalize = false;
      else throw ParseError(line_no, "orthogonalize expects true/false");
    } else {
      throw ParseError(line_no, "unknown scenario key '" + key + "'");
    }
  }
  return base;
}

}  // namespace sparse_diarize
