#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sparse_diarize/assignment.hpp"
#include "sparse_diarize/metrics.hpp"
#include "sparse_diarize/rttm.hpp"

namespace sd = sparse_diarize;

namespace {

sd::LabeledTimeline timeline(double total,
                             std::initializer_list<std::tuple<const char*, double, double>> spans) {
  sd::LabeledTimeline tl(total);
  for (const auto& [who, start, end] : spans) tl.add(who, start, end);
  return tl;
}

// Exhaustive maximum over injective partial assignments.
double brute_force_assignment(const Eigen::MatrixXd& w) {
  std::vector<bool> used(static_cast<std::size_t>(w.cols()), false);
  double best = 0.0;
  auto recurse = [&](auto&& self, Eigen::Index r, double acc) -> void {
    if (r == w.rows()) {
      best = std::max(best, acc);
      return;
    }
    self(self, r + 1, acc);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      used[static_cast<std::size_t>(c)] = true;
      self(self, r + 1, acc + w(r, c));
      used[static_cast<std::size_t>(c)] = false;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

}  // namespace

TEST(Rttm, ParsesSpeakerLines) {
  const auto tl = sd::parse_rttm(
      "SPEAKER rec1 1 0.50 2.00 <NA> <NA> alice <NA> <NA>\n"
      ";; comment\n"
      "\n"
      "SPEAKER rec1 1 3.00 1.50 <NA> <NA> bob <NA> <NA>\n"
      "SPEAKER rec1 1 2.00 1.00 <NA> <NA> alice <NA> <NA>\n");
  ASSERT_EQ(tl.speakers().size(), 2u);
  const auto& alice = tl.speakers().at("alice");
  ASSERT_EQ(alice.size(), 1u);  // touching turns merge
  EXPECT_DOUBLE_EQ(alice[0].start, 0.5);
  EXPECT_DOUBLE_EQ(alice[0].end, 3.0);
  EXPECT_DOUBLE_EQ(tl.extent(), 4.5);
  EXPECT_DOUBLE_EQ(tl.speech_duration(), 4.0);
}

TEST(Rttm, RoundTrip) {
  const auto tl = timeline(10.0, {{"spk00", 0.0, 1.25}, {"spk01", 1.0, 4.5}, {"spk00", 6.0, 9.0}});
  const std::string text = sd::emit_rttm(tl, "meeting");
  EXPECT_EQ(text,
            "SPEAKER meeting 1 0.000 1.250 <NA> <NA> spk00 <NA> <NA>\n"
            "SPEAKER meeting 1 1.000 3.500 <NA> <NA> spk01 <NA> <NA>\n"
            "SPEAKER meeting 1 6.000 3.000 <NA> <NA> spk00 <NA> <NA>\n");
  const auto back = sd::parse_rttm(text);
  EXPECT_EQ(back.speakers(), tl.speakers());
}

TEST(Rttm, MultipleRecordings) {
  const auto files = sd::parse_rttm_files(
      "SPEAKER a 1 0 1 <NA> <NA> x <NA> <NA>\n"
      "SPEAKER b 1 0 2 <NA> <NA> y <NA> <NA>\n");
  ASSERT_EQ(files.size(), 2u);
  EXPECT_DOUBLE_EQ(files.at("b").speech_duration(), 2.0);
  EXPECT_THROW((void)sd::parse_rttm("SPEAKER a 1 0 1 <NA> <NA> x <NA> <NA>\n"
                                    "SPEAKER b 1 0 2 <NA> <NA> y <NA> <NA>\n"),
               sd::FormatError);
}

TEST(Rttm, MalformedLinesReportLineNumber) {
  try {
    (void)sd::parse_rttm("SPEAKER a 1 0 1 <NA> <NA> x <NA> <NA>\nSPEAKER a 1 0 1 <NA> <NA>\n");
    FAIL() << "expected a parse error";
  } catch (const sd::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW((void)sd::parse_rttm("SPEAKER a 1 0 -1 <NA> <NA> x <NA> <NA>\n"), sd::ParseError);
  EXPECT_THROW((void)sd::parse_rttm("SPEAKER a 1 zero 1 <NA> <NA> x <NA> <NA>\n"), sd::ParseError);
}

TEST(Timeline, MergesOverlappingIntervals) {
  sd::LabeledTimeline tl;
  tl.add("a", 5, 7);
  tl.add("a", 0, 2);
  tl.add("a", 1, 3);
  tl.add("a", 3, 4);
  tl.add("a", 9, 9);  // empty, ignored
  const auto& list = tl.speakers().at("a");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0], (sd::Interval{0, 4}));
  EXPECT_EQ(list[1], (sd::Interval{5, 7}));
  EXPECT_THROW(tl.add("a", 3, 2), sd::InvalidArgument);
  EXPECT_THROW(tl.set_total_duration(6.0), sd::InvalidArgument);
}

TEST(Assignment, MatchesBruteForce) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(0, 5);
  for (int trial = 0; trial < 300; ++trial) {
    Eigen::MatrixXd w(size(rng), size(rng));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unit(rng) < 0.3 ? 0.0 : unit(rng);
    const auto map = sd::max_weight_assignment(w);
    ASSERT_EQ(map.size(), static_cast<std::size_t>(w.rows()));
    double total = 0.0;
    std::vector<bool> used(static_cast<std::size_t>(w.cols()), false);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const int c = map[static_cast<std::size_t>(r)];
      if (c < 0) continue;
      ASSERT_LT(c, w.cols());
      EXPECT_FALSE(used[static_cast<std::size_t>(c)]);
      used[static_cast<std::size_t>(c)] = true;
      total += w(r, c);
    }
    EXPECT_NEAR(total, brute_force_assignment(w), 1e-12) << "trial " << trial;
  }
}

TEST(Der, IdenticalTimelinesScoreZero) {
  const auto ref = timeline(100, {{"a", 0, 40}, {"b", 30, 90}});
  const auto hyp = timeline(100, {{"x", 0, 40}, {"y", 30, 90}});
  const auto r = sd::der(ref, hyp);
  EXPECT_DOUBLE_EQ(r.der, 0.0);
  EXPECT_DOUBLE_EQ(r.total_reference_speech_seconds, 100.0);
}

TEST(Der, MissedSpeech) {
  const auto ref = timeline(100, {{"a", 0, 100}});
  const auto hyp = timeline(100, {{"a", 20, 100}});
  const auto r = sd::der(ref, hyp);
  EXPECT_DOUBLE_EQ(r.missed_seconds, 20.0);
  EXPECT_DOUBLE_EQ(r.false_alarm_seconds, 0.0);
  EXPECT_DOUBLE_EQ(r.confusion_seconds, 0.0);
  EXPECT_NEAR(r.der, 0.20, 1e-12);
}

TEST(Der, ConfusionAndFalseAlarm) {
  // Mapping a->x is best (60 s); b's 40 s are confused, and y's extra 10 s
  // beyond the reference are false alarm.
  const auto ref = timeline(110, {{"a", 0, 60}, {"b", 60, 100}});
  const auto hyp = timeline(110, {{"x", 0, 60}, {"x", 60, 100}, {"y", 100, 110}});
  const auto r = sd::der(ref, hyp);
  EXPECT_DOUBLE_EQ(r.confusion_seconds, 40.0);
  EXPECT_DOUBLE_EQ(r.false_alarm_seconds, 10.0);
  EXPECT_DOUBLE_EQ(r.missed_seconds, 0.0);
  EXPECT_NEAR(r.der, 0.5, 1e-12);
}

TEST(Der, CollarExcludesBoundaries) {
  const auto ref = timeline(20, {{"a", 0, 10}});
  const auto hyp = timeline(20, {{"a", 1, 10}});
  EXPECT_NEAR(sd::der(ref, hyp).der, 0.1, 1e-12);
  const auto collared = sd::der(ref, hyp, 1.0);
  EXPECT_DOUBLE_EQ(collared.der, 0.0);
  EXPECT_DOUBLE_EQ(collared.total_reference_speech_seconds, 8.0);
  EXPECT_THROW((void)sd::der(ref, hyp, -1.0), sd::InvalidArgument);
}

TEST(Der, MismatchedDurationsRejected) {
  const auto ref = timeline(20, {{"a", 0, 10}});
  const auto hyp = timeline(25, {{"a", 0, 10}});
  EXPECT_THROW((void)sd::der(ref, hyp), sd::InvalidArgument);
}

TEST(Der, EmptyReference) {
  const sd::LabeledTimeline empty(10.0);
  EXPECT_DOUBLE_EQ(sd::der(empty, empty).der, 0.0);
  EXPECT_TRUE(std::isinf(sd::der(empty, timeline(10, {{"a", 0, 1}})).der));
}

TEST(ClusterMetrics, OneSpeakerHypothesis) {
  const auto ref = timeline(100, {{"a", 0, 50}, {"b", 50, 100}});
  const auto hyp = timeline(100, {{"only", 0, 100}});
  EXPECT_DOUBLE_EQ(sd::purity(ref, hyp), 0.5);
  EXPECT_DOUBLE_EQ(sd::coverage(ref, hyp), 1.0);
  EXPECT_NEAR(sd::f_score(0.5, 1.0), 2.0 / 3.0, 1e-12);
}

TEST(ClusterMetrics, OneSpeakerBaselineOnVoxConverse) {
  // Purity 0.57 and coverage 1.00 are rounded to two decimals, so F lands at
  // 0.726 here against a reported 0.70.
  EXPECT_NEAR(sd::f_score(0.57, 1.0), 0.726, 5e-4);
  EXPECT_NEAR(sd::f_score(0.57, 1.0), 0.70, 0.03);
}

TEST(ClusterMetrics, FScoreEdgeCases) {
  EXPECT_DOUBLE_EQ(sd::f_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(sd::f_score(1.0, 1.0), 1.0);
  EXPECT_NEAR(sd::f_score(0.3, 0.9), 2 * 0.27 / 1.2, 1e-15);
}

TEST(MetricsOracle, RandomFrameScenarios) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> count(0, 4);
  const double frame = 0.1;
  const std::size_t frames = 1000;
  for (int trial = 0; trial < 200; ++trial) {
    const auto ref = oracle::random_activity(rng, count(rng), frames);
    const auto hyp = oracle::random_activity(rng, count(rng), frames);
    auto ref_tl = oracle::to_timeline(ref, frame, "r");
    auto hyp_tl = oracle::to_timeline(hyp, frame, "h");
    ref_tl.set_total_duration(static_cast<double>(frames) * frame);
    hyp_tl.set_total_duration(static_cast<double>(frames) * frame);
    const auto want = oracle::frame_scores(ref, hyp, frame);
    const auto got = sd::evaluate(ref_tl, hyp_tl);
    EXPECT_NEAR(got.der.false_alarm_seconds, want.false_alarm, 1e-9) << trial;
    EXPECT_NEAR(got.der.missed_seconds, want.missed, 1e-9) << trial;
    EXPECT_NEAR(got.der.confusion_seconds, want.confusion, 1e-9) << trial;
    if (std::isfinite(want.der)) {
      EXPECT_NEAR(got.der.der, want.der, 1e-9) << trial;
    } else {
      EXPECT_TRUE(std::isinf(got.der.der)) << trial;
    }
    EXPECT_NEAR(got.purity, want.purity, 1e-9) << trial;
    EXPECT_NEAR(got.coverage, want.coverage, 1e-9) << trial;
    // Swapping the roles swaps purity and coverage exactly.
    EXPECT_EQ(sd::purity(hyp_tl, ref_tl), sd::coverage(ref_tl, hyp_tl));
    EXPECT_EQ(sd::coverage(hyp_tl, ref_tl), sd::purity(ref_tl, hyp_tl));
  }
}

TEST(MetricsOracle, InvariantUnderLabelRenaming) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ref = oracle::random_activity(rng, 3, 400);
    const auto hyp = oracle::random_activity(rng, 3, 400);
    const auto a = sd::evaluate(oracle::to_timeline(ref, 0.25, "r"), oracle::to_timeline(hyp, 0.25, "h"));
    auto shuffled = hyp;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto b = sd::evaluate(oracle::to_timeline(ref, 0.25, "r"), oracle::to_timeline(shuffled, 0.25, "z"));
    EXPECT_NEAR(a.der.der, b.der.der, 1e-12);
    EXPECT_NEAR(a.purity, b.purity, 1e-12);
    EXPECT_NEAR(a.coverage, b.coverage, 1e-12);
  }
}

TEST(Evaluate, EmptyDenominatorsDefaultToOne) {
  const sd::LabeledTimeline empty(10.0);
  const auto speech = timeline(10, {{"a", 0, 5}});
  const auto no_hyp = sd::evaluate(speech, empty);
  EXPECT_DOUBLE_EQ(no_hyp.purity, 1.0);
  EXPECT_TRUE(no_hyp.purity_defaulted);
  EXPECT_FALSE(no_hyp.coverage_defaulted);
  EXPECT_DOUBLE_EQ(no_hyp.coverage, 0.0);
  EXPECT_DOUBLE_EQ(no_hyp.der.der, 1.0);
  const auto neither = sd::evaluate(empty, empty);
  EXPECT_TRUE(neither.purity_defaulted && neither.coverage_defaulted);
  EXPECT_DOUBLE_EQ(neither.f, 1.0);
}

TEST(Aggregate, MicroAndMacro) {
  const auto one = sd::evaluate(timeline(100, {{"a", 0, 100}}), timeline(100, {{"a", 20, 100}}));
  const auto two = sd::evaluate(timeline(10, {{"a", 0, 10}}), timeline(10, {{"a", 0, 10}}));
  const auto corpus = sd::aggregate({one, two});
  EXPECT_EQ(corpus.files, 2u);
  EXPECT_NEAR(corpus.micro.der.der, 20.0 / 110.0, 1e-12);
  EXPECT_NEAR(corpus.macro.der.der, 0.10, 1e-12);
  EXPECT_NEAR(corpus.micro.coverage, (0.8 * 100 + 1.0 * 10) / 110.0, 1e-12);
  EXPECT_NEAR(corpus.macro.coverage, 0.9, 1e-12);
  EXPECT_NEAR(corpus.macro.f, (one.f + two.f) / 2.0, 1e-12);
  EXPECT_EQ(sd::aggregate({}).files, 0u);
}
