#pragma once

// Embedding signal: an M x T matrix whose columns are per-chunk speaker
// embeddings, either unit length (speech) or exactly zero (non-speech).

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "sparse_diarize/errors.hpp"

namespace sparse_diarize {

// On-disk precision of embeddings; the optimizer promotes to double.
using SignalMatrix = Eigen::MatrixXf;

inline constexpr double kDefaultWindowSeconds = 6.0;
inline constexpr double kDefaultMaxStepSeconds = 1.0;
inline constexpr std::size_t kDefaultMinChunks = 3600;

// Tolerance on |‖column‖ - 1| for speech columns.
inline constexpr double kUnitNormTolerance = 1e-6;
// Columns at or below this norm are treated as silence by normalize_columns.
inline constexpr double kZeroNormEpsilon = 1e-12;

struct ChunkGrid {
  double step_seconds = kDefaultMaxStepSeconds;
  double window_seconds = kDefaultWindowSeconds;
  std::size_t num_chunks = 0;

  double start(std::size_t i) const { return static_cast<double>(i) * step_seconds; }

  // Extent covered when every chunk is attributed to its own step interval.
  double span_seconds() const { return static_cast<double>(num_chunks) * step_seconds; }
};

// Sliding-window grid: the step shrinks below max_step_seconds until the
// recording yields at least min_chunks full windows. A trailing partial
// window is never emitted.
inline ChunkGrid make_chunk_grid(double duration_seconds,
                                 double window_seconds = kDefaultWindowSeconds,
                                 double max_step_seconds = kDefaultMaxStepSeconds,
                                 std::size_t min_chunks = kDefaultMinChunks) {
  if (!(window_seconds > 0.0) || !(max_step_seconds > 0.0) || min_chunks == 0) {
    throw InvalidArgument("chunk grid: window, max step and min chunks must be positive");
  }
  if (!std::isfinite(duration_seconds) || !(duration_seconds > window_seconds)) {
    throw InvalidArgument("audio shorter than one window");
  }
  const double usable = duration_seconds - window_seconds;
  double step = max_step_seconds;
  if (min_chunks > 1) {
    step = std::min(max_step_seconds, usable / static_cast<double>(min_chunks - 1));
  }
  // The relative slack absorbs the rounding in usable / (usable / n).
  const double ratio = usable / step;
  const auto num = static_cast<std::size_t>(std::floor(ratio + 1e-9 * std::max(1.0, ratio))) + 1;
  return ChunkGrid{step, window_seconds, num};
}

class EmbeddingSignal {
 public:
  // Validates every invariant; throws InvalidArgument on violation.
  EmbeddingSignal(SignalMatrix data, double step_seconds,
                  double window_seconds = kDefaultWindowSeconds)
      : data_(std::move(data)), step_seconds_(step_seconds), window_seconds_(window_seconds) {
    validate();
  }

  const SignalMatrix& data() const noexcept { return data_; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  Eigen::Index steps() const noexcept { return data_.cols(); }
  double step_seconds() const noexcept { return step_seconds_; }
  double window_seconds() const noexcept { return window_seconds_; }

  bool is_speech(Eigen::Index t) const { return !(data_.col(t).array() == 0.0f).all(); }

  ChunkGrid grid() const {
    return ChunkGrid{step_seconds_, window_seconds_, static_cast<std::size_t>(steps())};
  }

  Eigen::MatrixXd as_double() const { return data_.cast<double>(); }

 private:
  void validate() const {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw InvalidArgument("embedding signal must have M >= 1 and T >= 1");
    }
    if (!(step_seconds_ > 0.0) || !std::isfinite(step_seconds_)) {
      throw InvalidArgument("embedding signal step_seconds must be positive");
    }
    if (!(window_seconds_ >= step_seconds_) || !std::isfinite(window_seconds_)) {
      throw InvalidArgument("embedding signal window_seconds must be >= step_seconds");
    }
    for (Eigen::Index t = 0; t < data_.cols(); ++t) {
      const auto col = data_.col(t).cast<double>();
      if (!col.allFinite()) {
        throw InvalidArgument("embedding signal column " + std::to_string(t) +
                              " has non-finite entries");
      }
      if ((col.array() == 0.0).all()) continue;
      const double norm = col.norm();
      if (std::abs(norm - 1.0) > kUnitNormTolerance) {
        throw InvalidArgument("embedding signal column " + std::to_string(t) +
                              " has norm " + std::to_string(norm) +
                              " (expected 1 or an all-zero column)");
      }
    }
  }

  SignalMatrix data_;
  double step_seconds_;
  double window_seconds_;
};

// Unit-normalizes every column; columns with norm <= 1e-12 become exact
// zeros. Norms are taken in double so float rounding stays below 1e-7.
template <typename Derived>
EmbeddingSignal normalize_columns(const Eigen::MatrixBase<Derived>& matrix,
                                  double step_seconds = kDefaultMaxStepSeconds,
                                  double window_seconds = kDefaultWindowSeconds) {
  Eigen::MatrixXd work = matrix.template cast<double>();
  if (!work.allFinite()) {
    throw InvalidArgument("normalize_columns: matrix has non-finite entries");
  }
  for (Eigen::Index t = 0; t < work.cols(); ++t) {
    const double norm = work.col(t).norm();
    if (norm <= kZeroNormEpsilon) {
      work.col(t).setZero();
    } else {
      work.col(t) /= norm;
    }
  }
  return EmbeddingSignal(work.cast<float>(), step_seconds, window_seconds);
}

}  // namespace sparse_diarize
