#pragma once

// Turns an activation matrix into timed speaker segments. Each column t is
// attributed to the step interval [t·step, (t+1)·step) it begins, so
// overlapping analysis windows are not double counted.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/optimizer.hpp"
#include "sparse_diarize/rttm.hpp"
#include "sparse_diarize/signal.hpp"
#include "sparse_diarize/timeline.hpp"

namespace sparse_diarize {

struct Segment {
  std::string speaker;
  double start_seconds = 0.0;
  double end_seconds = 0.0;
};

struct Diarization {
  std::vector<Segment> segments;  // sorted by (start, speaker)
  double total_duration = 0.0;

  LabeledTimeline to_timeline() const {
    LabeledTimeline timeline(total_duration);
    for (const auto& s : segments) timeline.add(s.speaker, s.start_seconds, s.end_seconds);
    return timeline;
  }

  std::string to_rttm(const std::string& file_id) const { return emit_rttm(to_timeline(), file_id); }
};

struct DecodeOptions {
  double threshold = 0.4;
  std::size_t min_segment_steps = 2;
  // Rows lighter than this fraction of the heaviest row are dropped.
  double min_fraction = 0.05;
};

inline std::string speaker_label(std::size_t rank) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "spk%02zu", rank);
  return buf;
}

// Row indices whose total activation mass reaches min_fraction of the
// largest row mass, in descending order of mass (ties by index).
inline std::vector<std::size_t> prune_speakers(const Eigen::MatrixXd& activations,
                                               double min_fraction = 0.05) {
  if (!(min_fraction >= 0.0 && min_fraction <= 1.0)) {
    throw InvalidArgument("min_fraction must lie in [0, 1]");
  }
  const Eigen::VectorXd mass = activations.rowwise().sum();
  std::vector<std::size_t> kept;
  if (mass.size() == 0) return kept;
  const double largest = mass.maxCoeff();
  if (!(largest > 0.0)) return kept;
  for (Eigen::Index r = 0; r < mass.size(); ++r) {
    if (mass(r) > 0.0 && mass(r) >= min_fraction * largest) kept.push_back(static_cast<std::size_t>(r));
  }
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    return mass(static_cast<Eigen::Index>(a)) > mass(static_cast<Eigen::Index>(b));
  });
  return kept;
}

inline std::vector<std::size_t> prune_speakers(const ActivationMatrix& activations,
                                               double min_fraction = 0.05) {
  return prune_speakers(activations.data(), min_fraction);
}

inline Diarization decode(const Eigen::MatrixXd& activations, const ChunkGrid& grid,
                          const DecodeOptions& options = {}) {
  if (static_cast<std::size_t>(activations.cols()) != grid.num_chunks) {
    throw InvalidArgument("grid has " + std::to_string(grid.num_chunks) +
                          " chunks but the activation matrix has " +
                          std::to_string(activations.cols()) + " steps");
  }
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw InvalidArgument("threshold must lie in (0, 1)");
  }
  if (options.min_segment_steps == 0) throw InvalidArgument("min_segment_steps must be positive");
  if (!(grid.step_seconds > 0.0)) throw InvalidArgument("grid step must be positive");

  Diarization out;
  out.total_duration = grid.span_seconds();
  const auto kept = prune_speakers(activations, options.min_fraction);
  const Eigen::Index steps = activations.cols();
  for (std::size_t rank = 0; rank < kept.size(); ++rank) {
    const auto row = static_cast<Eigen::Index>(kept[rank]);
    const std::string label = speaker_label(rank);
    Eigen::Index t = 0;
    while (t < steps) {
      if (!(activations(row, t) >= options.threshold)) {
        ++t;
        continue;
      }
      const Eigen::Index first = t;
      while (t < steps && activations(row, t) >= options.threshold) ++t;
      if (static_cast<std::size_t>(t - first) >= options.min_segment_steps) {
        out.segments.push_back({label, grid.start(static_cast<std::size_t>(first)),
                                grid.start(static_cast<std::size_t>(t))});
      }
    }
  }
  std::sort(out.segments.begin(), out.segments.end(), [](const Segment& a, const Segment& b) {
    return a.start_seconds != b.start_seconds ? a.start_seconds < b.start_seconds
                                              : a.speaker < b.speaker;
  });
  return out;
}

inline Diarization decode(const ActivationMatrix& activations, const ChunkGrid& grid,
                          const DecodeOptions& options = {}) {
  return decode(activations.data(), grid, options);
}

// Frame-level activity (0/1 per speaker label and step) of a diarization on
// the grid it was decoded from.
inline Eigen::MatrixXd frame_activity(const Diarization& diarization, const ChunkGrid& grid,
                                      const std::vector<std::string>& labels) {
  Eigen::MatrixXd act = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                              static_cast<Eigen::Index>(grid.num_chunks));
  for (const auto& seg : diarization.segments) {
    const auto it = std::find(labels.begin(), labels.end(), seg.speaker);
    if (it == labels.end()) continue;
    const auto row = static_cast<Eigen::Index>(it - labels.begin());
    const auto first = static_cast<Eigen::Index>(std::llround(seg.start_seconds / grid.step_seconds));
    const auto last = static_cast<Eigen::Index>(std::llround(seg.end_seconds / grid.step_seconds));
    for (Eigen::Index t = first; t < last && t < act.cols(); ++t) act(row, t) = 1.0;
  }
  return act;
}

}  // namespace sparse_diarize
