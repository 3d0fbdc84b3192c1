#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sparse_diarize/errors.hpp"

namespace sparse_diarize {

// Half-open [start, end) in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

// Sorts and merges overlapping or touching intervals; drops empty ones.
inline std::vector<Interval> merge_intervals(std::vector<Interval> intervals) {
  std::erase_if(intervals, [](const Interval& i) { return !(i.end > i.start); });
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  std::vector<Interval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, iv.end);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

inline double total_length(const std::vector<Interval>& intervals) {
  double sum = 0.0;
  for (const auto& iv : intervals) sum += iv.length();
  return sum;
}

// Overlap duration of two sorted, disjoint interval lists.
inline double intersection_length(const std::vector<Interval>& a, const std::vector<Interval>& b) {
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].start, b[j].start);
    const double hi = std::min(a[i].end, b[j].end);
    if (hi > lo) sum += hi - lo;
    if (a[i].end < b[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return sum;
}

// Per-speaker speech regions over [0, total_duration]. Intervals of one
// speaker are kept sorted and disjoint; different speakers may overlap.
class LabeledTimeline {
 public:
  LabeledTimeline() = default;
  explicit LabeledTimeline(double total_duration) : total_duration_(total_duration) {}

  void add(const std::string& speaker, double start, double end) {
    if (speaker.empty()) throw InvalidArgument("speaker label must be non-empty");
    if (!(std::isfinite(start) && std::isfinite(end)) || start < 0.0 || end < start) {
      throw InvalidArgument("invalid interval for speaker " + speaker);
    }
    if (!(end > start)) return;
    auto& list = speakers_[speaker];
    list.push_back({start, end});
    list = merge_intervals(std::move(list));
    extent_ = std::max(extent_, end);
  }

  const std::map<std::string, std::vector<Interval>>& speakers() const noexcept { return speakers_; }

  double total_duration() const noexcept { return std::max(total_duration_, extent_); }
  // Latest interval end across all speakers.
  double extent() const noexcept { return extent_; }

  void set_total_duration(double duration) {
    if (!(duration >= extent_ - 1e-9)) {
      throw InvalidArgument("timeline extends to " + std::to_string(extent_) +
                            " s, beyond the stated duration " + std::to_string(duration) + " s");
    }
    total_duration_ = duration;
  }

  double speech_duration() const {
    double sum = 0.0;
    for (const auto& [_, list] : speakers_) sum += total_length(list);
    return sum;
  }

  bool empty() const noexcept { return speakers_.empty(); }

 private:
  std::map<std::string, std::vector<Interval>> speakers_;
  double total_duration_ = 0.0;
  double extent_ = 0.0;
};

}  // namespace sparse_diarize
