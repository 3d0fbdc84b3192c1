#pragma once

// Diarization scoring over interval timelines: DER with an optimal
// one-to-one speaker mapping, cluster purity, speaker coverage and their
// harmonic mean.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparse_diarize/assignment.hpp"
#include "sparse_diarize/errors.hpp"
#include "sparse_diarize/timeline.hpp"

namespace sparse_diarize {

struct DerReport {
  double false_alarm_seconds = 0.0;
  double missed_seconds = 0.0;
  double confusion_seconds = 0.0;
  double total_reference_speech_seconds = 0.0;
  // Infinite when the reference is silent but the hypothesis is not.
  double der = 0.0;
};

namespace detail {

inline void require_same_duration(const LabeledTimeline& reference,
                                  const LabeledTimeline& hypothesis) {
  if (std::abs(reference.total_duration() - hypothesis.total_duration()) > 1e-9) {
    throw InvalidArgument("mismatched durations: reference " +
                          std::to_string(reference.total_duration()) + " s, hypothesis " +
                          std::to_string(hypothesis.total_duration()) + " s");
  }
}

// Tracks which speakers are active at monotonically increasing query times.
class ActivitySweep {
 public:
  explicit ActivitySweep(const LabeledTimeline& timeline) {
    for (const auto& [_, list] : timeline.speakers()) lists_.push_back(&list);
    cursor_.assign(lists_.size(), 0);
  }

  std::size_t size() const { return lists_.size(); }

  void active_at(double time, std::vector<int>& out) {
    out.clear();
    for (std::size_t s = 0; s < lists_.size(); ++s) {
      const auto& list = *lists_[s];
      auto& c = cursor_[s];
      while (c < list.size() && list[c].end <= time) ++c;
      if (c < list.size() && list[c].start <= time) out.push_back(static_cast<int>(s));
    }
  }

 private:
  std::vector<const std::vector<Interval>*> lists_;
  std::vector<std::size_t> cursor_;
};

// Numerator of purity(reference, hypothesis): for each hypothesis cluster,
// its largest overlap with any reference speaker.
inline double best_overlap_sum(const LabeledTimeline& clusters, const LabeledTimeline& labels) {
  double sum = 0.0;
  for (const auto& [_, cluster] : clusters.speakers()) {
    double best = 0.0;
    for (const auto& [__, label] : labels.speakers()) {
      best = std::max(best, intersection_length(cluster, label));
    }
    sum += best;
  }
  return sum;
}

}  // namespace detail

inline DerReport der(const LabeledTimeline& reference, const LabeledTimeline& hypothesis,
                     double collar_seconds = 0.0) {
  detail::require_same_duration(reference, hypothesis);
  if (!(collar_seconds >= 0.0)) throw InvalidArgument("collar must be non-negative");
  const double total = reference.total_duration();

  std::vector<Interval> excluded;
  std::vector<double> bounds{0.0, total};
  for (const auto* timeline : {&reference, &hypothesis}) {
    for (const auto& [_, list] : timeline->speakers()) {
      for (const auto& iv : list) {
        bounds.push_back(iv.start);
        bounds.push_back(iv.end);
      }
    }
  }
  if (collar_seconds > 0.0) {
    for (const auto& [_, list] : reference.speakers()) {
      for (const auto& iv : list) {
        for (double b : {iv.start, iv.end}) {
          excluded.push_back({std::max(0.0, b - collar_seconds), std::min(total, b + collar_seconds)});
        }
      }
    }
    excluded = merge_intervals(std::move(excluded));
    for (const auto& iv : excluded) {
      bounds.push_back(iv.start);
      bounds.push_back(iv.end);
    }
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

  struct Piece {
    double duration;
    std::vector<int> ref;
    std::vector<int> hyp;
  };
  std::vector<Piece> pieces;
  detail::ActivitySweep ref_sweep(reference);
  detail::ActivitySweep hyp_sweep(hypothesis);
  std::size_t excl = 0;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double lo = bounds[i];
    const double hi = bounds[i + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    while (excl < excluded.size() && excluded[excl].end <= mid) ++excl;
    if (excl < excluded.size() && excluded[excl].start <= mid) continue;
    Piece piece{hi - lo, {}, {}};
    ref_sweep.active_at(mid, piece.ref);
    hyp_sweep.active_at(mid, piece.hyp);
    if (!piece.ref.empty() || !piece.hyp.empty()) pieces.push_back(std::move(piece));
  }

  Eigen::MatrixXd cooccurrence = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(ref_sweep.size()), static_cast<Eigen::Index>(hyp_sweep.size()));
  for (const auto& p : pieces) {
    for (int r : p.ref) {
      for (int h : p.hyp) cooccurrence(r, h) += p.duration;
    }
  }
  const std::vector<int> mapping = max_weight_assignment(cooccurrence);

  DerReport report;
  for (const auto& p : pieces) {
    const auto n_ref = static_cast<double>(p.ref.size());
    const auto n_hyp = static_cast<double>(p.hyp.size());
    double correct = 0.0;
    for (int r : p.ref) {
      const int h = mapping[static_cast<std::size_t>(r)];
      if (h >= 0 && std::find(p.hyp.begin(), p.hyp.end(), h) != p.hyp.end()) correct += 1.0;
    }
    report.total_reference_speech_seconds += n_ref * p.duration;
    report.missed_seconds += std::max(0.0, n_ref - n_hyp) * p.duration;
    report.false_alarm_seconds += std::max(0.0, n_hyp - n_ref) * p.duration;
    report.confusion_seconds += (std::min(n_ref, n_hyp) - correct) * p.duration;
  }
  const double errors = report.false_alarm_seconds + report.missed_seconds + report.confusion_seconds;
  if (report.total_reference_speech_seconds > 0.0) {
    report.der = errors / report.total_reference_speech_seconds;
  } else {
    report.der = errors > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return report;
}

// Σ_cluster max_speaker |cluster ∩ speaker| / Σ_cluster |cluster|;
// 1.0 when the hypothesis holds no speech.
inline double purity(const LabeledTimeline& reference, const LabeledTimeline& hypothesis) {
  const double denom = hypothesis.speech_duration();
  if (!(denom > 0.0)) return 1.0;
  return detail::best_overlap_sum(hypothesis, reference) / denom;
}

// Σ_speaker max_cluster |speaker ∩ cluster| / Σ_speaker |speaker|;
// 1.0 when the reference holds no speech.
inline double coverage(const LabeledTimeline& reference, const LabeledTimeline& hypothesis) {
  return purity(hypothesis, reference);
}

inline double f_score(double purity_value, double coverage_value) {
  const double sum = purity_value + coverage_value;
  return sum > 0.0 ? 2.0 * purity_value * coverage_value / sum : 0.0;
}

struct MetricReport {
  DerReport der;
  double purity = 1.0;
  double coverage = 1.0;
  double f = 1.0;
  // Set when the corresponding ratio had an empty denominator.
  bool purity_defaulted = false;
  bool coverage_defaulted = false;
  // Denominators, kept for duration-weighted aggregation.
  double hypothesis_speech_seconds = 0.0;
  double reference_speech_seconds = 0.0;
};

inline MetricReport evaluate(const LabeledTimeline& reference, const LabeledTimeline& hypothesis,
                             double collar_seconds = 0.0) {
  MetricReport r;
  r.der = der(reference, hypothesis, collar_seconds);
  r.purity = purity(reference, hypothesis);
  r.coverage = coverage(reference, hypothesis);
  r.f = f_score(r.purity, r.coverage);
  r.hypothesis_speech_seconds = hypothesis.speech_duration();
  r.reference_speech_seconds = reference.speech_duration();
  r.purity_defaulted = !(r.hypothesis_speech_seconds > 0.0);
  r.coverage_defaulted = !(r.reference_speech_seconds > 0.0);
  return r;
}

struct CorpusReport {
  // Component durations summed across files; purity/coverage weighted by
  // their own denominators.
  MetricReport micro;
  // Unweighted per-file means, F computed per file before averaging.
  MetricReport macro;
  std::size_t files = 0;
};

inline CorpusReport aggregate(const std::vector<MetricReport>& per_file) {
  CorpusReport out;
  out.files = per_file.size();
  if (per_file.empty()) return out;

  auto& mi = out.micro;
  double purity_num = 0.0;
  double coverage_num = 0.0;
  for (const auto& r : per_file) {
    mi.der.false_alarm_seconds += r.der.false_alarm_seconds;
    mi.der.missed_seconds += r.der.missed_seconds;
    mi.der.confusion_seconds += r.der.confusion_seconds;
    mi.der.total_reference_speech_seconds += r.der.total_reference_speech_seconds;
    mi.hypothesis_speech_seconds += r.hypothesis_speech_seconds;
    mi.reference_speech_seconds += r.reference_speech_seconds;
    purity_num += r.purity * r.hypothesis_speech_seconds;
    coverage_num += r.coverage * r.reference_speech_seconds;
  }
  const double errors = mi.der.false_alarm_seconds + mi.der.missed_seconds + mi.der.confusion_seconds;
  mi.der.der = mi.der.total_reference_speech_seconds > 0.0
                   ? errors / mi.der.total_reference_speech_seconds
                   : (errors > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  mi.purity_defaulted = !(mi.hypothesis_speech_seconds > 0.0);
  mi.coverage_defaulted = !(mi.reference_speech_seconds > 0.0);
  mi.purity = mi.purity_defaulted ? 1.0 : purity_num / mi.hypothesis_speech_seconds;
  mi.coverage = mi.coverage_defaulted ? 1.0 : coverage_num / mi.reference_speech_seconds;
  mi.f = f_score(mi.purity, mi.coverage);

  auto& ma = out.macro;
  const auto n = static_cast<double>(per_file.size());
  ma.purity = ma.coverage = ma.f = 0.0;
  for (const auto& r : per_file) {
    ma.der.false_alarm_seconds += r.der.false_alarm_seconds / n;
    ma.der.missed_seconds += r.der.missed_seconds / n;
    ma.der.confusion_seconds += r.der.confusion_seconds / n;
    ma.der.total_reference_speech_seconds += r.der.total_reference_speech_seconds / n;
    ma.der.der += r.der.der / n;
    ma.purity += r.purity / n;
    ma.coverage += r.coverage / n;
    ma.f += r.f / n;
    ma.hypothesis_speech_seconds += r.hypothesis_speech_seconds / n;
    ma.reference_speech_seconds += r.reference_speech_seconds / n;
    ma.purity_defaulted = ma.purity_defaulted || r.purity_defaulted;
    ma.coverage_defaulted = ma.coverage_defaulted || r.coverage_defaulted;
  }
  return out;
}

}  // namespace sparse_diarize
