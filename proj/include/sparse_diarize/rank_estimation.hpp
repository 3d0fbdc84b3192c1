#pragma once

// Upper bound on the speaker count from the singular-value spectrum of the
// embedding signal: locate the knee of the sorted spectrum and inflate it
// by 2.5x so the sparse factorization has room to drop spurious columns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/SVD>

#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/signal.hpp"

namespace sparse_diarize {

struct SpectrumReport {
  std::vector<double> singular_values;  // descending, full min(M, T) spectrum
  std::size_t knee_index = 1;           // number of leading values before the knee
  std::size_t k_max = 2;
};

struct RankEstimationOptions {
  double sensitivity = 1.0;
  // Only the head of the spectrum is handed to the knee detector.
  std::size_t max_knee_values = 64;
};

inline constexpr double kSpeakerMargin = 2.5;
inline constexpr std::size_t kMinSpeakerBudget = 2;

template <typename Derived>
std::vector<double> singular_values(const Eigen::MatrixBase<Derived>& matrix) {
  const Eigen::MatrixXd work = matrix.template cast<double>();
  // Values only. Working on the matrix itself (not its Gram matrix) keeps
  // tiny singular values at ~1e-16 relative instead of ~1e-8.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(work);
  const auto& s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline std::vector<double> singular_values(const EmbeddingSignal& signal) {
  return singular_values(signal.data());
}

// Kneedle on a decreasing curve. The difference curve is
//   d(i) = (1 - y_norm(i)) - x_norm(i),  x_norm(i) = i / (n - 1),
// and the knee is the first local maximum of d after which d falls below
// d(knee) - sensitivity / (n - 1) before another local maximum appears;
// failing that, the global maximum of d.
//
// The returned index is the 0-based position of the knee point, i.e. the
// count of values that precede the drop (floored at 1). A spectrum with
// four large values followed by a flat tail therefore reports 4.
inline std::size_t kneedle_knee(std::span<const double> values, double sensitivity = 1.0) {
  const std::size_t n = values.size();
  if (n < 3) throw InvalidArgument("kneedle_knee needs at least 3 values");
  if (!(sensitivity > 0.0)) throw InvalidArgument("kneedle sensitivity must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) return 1;

  const double dx = 1.0 / static_cast<double>(n - 1);
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = (1.0 - (values[i] - lo) / range) - static_cast<double>(i) * dx;
  }
  auto is_local_max = [&](std::size_t i) {
    return i > 0 && i + 1 < n && diff[i] > diff[i - 1] && diff[i] >= diff[i + 1];
  };

  const double drop = sensitivity * dx;
  std::size_t knee = n;  // sentinel: no knee confirmed
  std::size_t candidate = n;
  for (std::size_t i = 1; i < n; ++i) {
    if (is_local_max(i)) {
      candidate = i;
      continue;
    }
    if (candidate < n && diff[i] < diff[candidate] - drop) {
      knee = candidate;
      break;
    }
  }
  if (knee == n) {
    knee = static_cast<std::size_t>(std::max_element(diff.begin(), diff.end()) - diff.begin());
  }
  return std::max<std::size_t>(1, knee);
}

inline std::size_t speaker_budget(std::size_t knee_index) {
  const auto inflated = static_cast<std::size_t>(std::ceil(kSpeakerMargin * static_cast<double>(knee_index)));
  return std::max(kMinSpeakerBudget, inflated);
}

inline SpectrumReport estimate_max_speakers(const EmbeddingSignal& signal,
                                            const RankEstimationOptions& options = {}) {
  SpectrumReport report;
  report.singular_values = singular_values(signal);
  const auto& sv = report.singular_values;
  const std::size_t head = std::min(sv.size(), std::max<std::size_t>(3, options.max_knee_values));
  if (head >= 3) {
    report.knee_index = kneedle_knee(std::span<const double>(sv.data(), head), options.sensitivity);
  } else {
    // Too short for Kneedle (M or T below 3): count the numerically nonzero values.
    const double cutoff = sv.empty() ? 0.0 : 1e-8 * sv.front();
    const auto nonzero = static_cast<std::size_t>(
        std::count_if(sv.begin(), sv.end(), [&](double s) { return s > cutoff; }));
    report.knee_index = std::max<std::size_t>(1, nonzero);
  }
  report.k_max = speaker_budget(report.knee_index);
  return report;
}

}  // namespace sparse_diarize
