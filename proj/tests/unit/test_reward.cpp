#include <cmath>

#include "doctest.h"
#include "adaptvo/error.hpp"
#include "adaptvo/reward.hpp"
#include "oracles.hpp"

using namespace adaptvo;

TEST_SUITE("reward") {

TEST_CASE("feature drift is the distance to the flow-predicted position") {
  FlowField f(10, 10);
  std::fill(f.du.begin(), f.du.end(), 1.0f);
  std::fill(f.dv.begin(), f.dv.end(), -2.0f);
  std::fill(f.valid.begin(), f.valid.end(), 1);
  FeatureTrack t;
  t.prev_position = Point2(4, 4);
  t.position = Point2(8, 5);  // predicted (5, 2): error (3, 3)
  CHECK(*feature_drift(t, f) == doctest::Approx(std::sqrt(18.0)));
  f.valid[f.index(4, 4)] = 0;
  CHECK_FALSE(feature_drift(t, f).has_value());
}

TEST_CASE("drift reward on hand examples") {
  CHECK(r_drift(std::vector<double>{}) == -35.0);
  CHECK(r_drift(std::vector<double>{0.0}) == doctest::Approx(5.0).epsilon(1e-15));
  // 2 * (-15 tanh(1.5) + 5) = -17.1544...
  CHECK(r_drift(std::vector<double>{10.0, 10.0}) == doctest::Approx(2 * (-15 * std::tanh(1.5) + 5)).epsilon(1e-15));
  CHECK(std::abs(r_drift(std::vector<double>{10.0, 10.0}) - -17.154) < 1e-3);
}

TEST_CASE("coverage counts occupied cells of the 8x8 grid") {
  // 64x64 image, 8 px cells.
  CHECK(coverage(std::vector<Point2>{}, 64, 64) == 0.0);
  CHECK(coverage(std::vector<Point2>{Point2(0, 0), Point2(7.9, 7.9)}, 64, 64) == doctest::Approx(1.0 / 64));
  CHECK(coverage(std::vector<Point2>{Point2(0, 0), Point2(8, 0)}, 64, 64) == doctest::Approx(2.0 / 64));
  std::vector<Point2> all;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) all.emplace_back(8 * x + 4, 8 * y + 4);
  CHECK(coverage(all, 64, 64) == 1.0);
  // 70 px wide: cells of 8 px, trailing pixels 64..69 belong to column 7.
  CHECK(coverage(std::vector<Point2>{Point2(69, 0), Point2(60, 0)}, 70, 64) == doctest::Approx(1.0 / 64));
}

TEST_CASE("coverage reward is piecewise linear and continuous at alpha0") {
  CHECK(r_cover(1.0) == doctest::Approx(0.3 * 0.7 + 0.03).epsilon(1e-15));
  CHECK(r_cover(1.0) == doctest::Approx(0.24));
  CHECK(r_cover(0.0) == doctest::Approx(-0.87));
  CHECK(std::abs(r_cover(0.3) - r_cover(std::nextafter(0.3, 0.0))) < 1e-12);
  CHECK(r_cover(0.3) == doctest::Approx(0.03));
}

TEST_CASE("cost model on the reference workload") {
  FrameStats s;
  s.n_klt = 1000;
  s.n_ransac = 50;
  s.tracked_count = 200;
  // Independent expansion of the polynomial, microseconds.
  const double w2 = 21.0 * 21.0;
  const double us = 0.0731 * 1000 + 0.0166 * w2 + 0.0010 * 1000 * w2 + 2.4456 * 50 + 0.1042 * 200 +
                    0.0050 * 50 * 200 + 187.9201;
  const double tau = estimate_runtime(s, 21);
  CHECK(tau == doctest::Approx(10.0 * us * 1e-6).epsilon(1e-12));
  CHECK(std::abs(tau * 1e3 - 9.0246) < 1e-3);
  CostModel slow;
  slow.beta = 20.0;
  CHECK(estimate_runtime(s, 21, slow) == doctest::Approx(2 * tau));
}

TEST_CASE("compute reward crosses zero at the analytic runtime") {
  const double tau0 = 1.0 / (10.2 - std::log(0.1));
  CHECK(std::abs(tau0 - 0.079984) < 1e-5);
  CHECK(std::abs(r_comp(tau0)) < 1e-9);
  CHECK(r_comp(tau0 - 1e-4) > 0.0);
  CHECK(r_comp(tau0 + 1e-4) < 0.0);
  CHECK(r_comp(1e-3) == doctest::Approx(0.1));
  CHECK(r_comp(10.0) == -10.0);
  CHECK_THROWS_AS(r_comp(0.0), Error);
}

TEST_CASE("frame reward with no features sums the three terms") {
  const RewardBreakdown b = frame_reward({}, nullptr, FrameStats{}, FrontendParams{}, 64, 64);
  CHECK(b.r_drift == -35.0);
  CHECK(b.alpha == 0.0);
  CHECK(b.r_cover == doctest::Approx(-0.87));
  CHECK(b.r_comp == doctest::Approx(0.1));
  CHECK(b.r_total == doctest::Approx(-35.77));
  CHECK(b.drift_count == 0);
}

TEST_CASE("frame reward measures drift only on tracked features with flow") {
  FlowField f(64, 64);
  std::fill(f.valid.begin(), f.valid.end(), 1);
  std::vector<FeatureTrack> tracks(3);
  tracks[0].status = TrackStatus::Tracked;
  tracks[0].prev_position = Point2(10, 10);
  tracks[0].position = Point2(13, 14);  // drift 5
  tracks[1].status = TrackStatus::New;
  tracks[1].position = tracks[1].prev_position = Point2(50, 50);
  tracks[2].status = TrackStatus::Lost;
  tracks[2].position = Point2(30, 30);
  const RewardBreakdown b = frame_reward(tracks, &f, FrameStats{}, FrontendParams{}, 64, 64);
  CHECK(b.drift_count == 1);
  CHECK(b.mean_drift_px == doctest::Approx(5.0));
  CHECK(b.r_drift == doctest::Approx(-15 * std::tanh(0.75) + 5));
  CHECK(b.alpha == doctest::Approx(2.0 / 64));
  CHECK(b.r_total == doctest::Approx(b.r_drift + b.r_cover + b.r_comp));
  const RewardBreakdown nf = frame_reward(tracks, nullptr, FrameStats{}, FrontendParams{}, 64, 64);
  CHECK(nf.r_drift == -35.0);
}

TEST_CASE("training reward subtracts the reference and checks frame indices") {
  RewardBreakdown p, r;
  p.r_total = 3.5;
  r.r_total = 1.25;
  CHECK(training_reward(p, r) == 2.25);
  CHECK(training_reward(p, 4, p, 4) == 0.0);
  CHECK_THROWS_AS(training_reward(p, 4, r, 5), Error);
}

TEST_CASE("sequence metrics on a hand-built sequence") {
  std::vector<FrameRecord> rs(4);
  const double drifts[] = {-1, 2.0, 4.0, -1};
  const int n_new[] = {10, 2, 0, 0};
  const int n_active[] = {10, 9, 7, 4};
  for (int i = 0; i < 4; ++i) {
    rs[i].frame = i;
    if (drifts[i] >= 0) rs[i].mean_drift_px = drifts[i];
    rs[i].alpha = 0.25 * i;
    rs[i].tau_ms = 1.0 + i;
    rs[i].r_total = 10.0 * i;
    rs[i].n_new = n_new[i];
    rs[i].n_active = n_active[i];
  }
  const SequenceMetrics m = sequence_metrics(rs, 80.0);
  CHECK(m.drift_px_per_s == doctest::Approx(3.0 * 80.0));
  CHECK(m.feature_age == doctest::Approx(30.0 / 12.0));
  CHECK(m.coverage_pct == doctest::Approx(37.5));
  CHECK(m.tau_ms == doctest::Approx(2.5));
  CHECK(m.mean_r_total == doctest::Approx(15.0));
  CHECK_THROWS_AS(sequence_metrics(std::vector<FrameRecord>{}, 80.0), Error);
}

TEST_CASE("feature age from counts equals the mean of explicit track lifetimes") {
  // Simulate births and deaths explicitly, then compare both definitions.
  std::mt19937_64 rng(5);
  std::vector<int> alive_ages, finished;
  std::vector<FrameRecord> rs;
  for (int f = 0; f < 50; ++f) {
    std::vector<int> next;
    for (int a : alive_ages) {
      if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.2)
        finished.push_back(a);
      else
        next.push_back(a + 1);
    }
    const int born = static_cast<int>(rng() % 5);
    for (int b = 0; b < born; ++b) next.push_back(1);
    alive_ages = next;
    FrameRecord r;
    r.n_new = born;
    r.n_active = static_cast<int>(alive_ages.size());
    rs.push_back(r);
  }
  for (int a : alive_ages) finished.push_back(a);
  double mean = 0.0;
  for (int a : finished) mean += a;
  mean /= static_cast<double>(finished.size());
  CHECK(sequence_metrics(rs, 30.0).feature_age == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("metrics CSV round trips exactly, including blank drift") {
  const auto dir = oracle::scratch_dir("metrics");
  std::vector<FrameRecord> rs(3);
  for (int i = 0; i < 3; ++i) {
    rs[i].sequence = "seq_a";
    rs[i].frame = i;
    rs[i].n_tracked = 10 * i;
    rs[i].n_inliers = 9 * i;
    if (i) rs[i].mean_drift_px = 0.1 * i + 1.0 / 3.0;
    rs[i].alpha = 0.3125;
    rs[i].tau_ms = 2.0 / 7.0;
    rs[i].r_drift = -1e-17 * i;
    rs[i].r_cover = 0.24;
    rs[i].r_comp = 0.1;
    rs[i].r_total = std::exp(1.0) * i;
    rs[i].n_new = 4;
    rs[i].n_active = 40 + i;
  }
  write_metrics_csv(dir / "m.csv", rs);
  CHECK(read_metrics_csv(dir / "m.csv") == rs);
  const std::string text = oracle::read_bytes(dir / "m.csv");
  CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  rs[0].sequence = "bad,name";
  CHECK_THROWS_AS(write_metrics_csv(dir / "x.csv", rs), Error);
}

TEST_CASE("make_record omits drift when it is unavailable") {
  FrameStats s;
  s.tracked_count = 5;
  s.inlier_count = 4;
  s.detected_count = 2;
  RewardBreakdown b;
  b.drift_count = 3;
  b.mean_drift_px = 0.7;
  const FrameRecord with = make_record("a", 3, s, b, 6, true);
  const FrameRecord without = make_record("a", 3, s, b, 6, false);
  CHECK(*with.mean_drift_px == 0.7);
  CHECK_FALSE(without.mean_drift_px.has_value());
  CHECK(with.n_new == 2);
  CHECK(with.n_active == 6);
  CHECK(with.n_inliers == 4);
}

}  // TEST_SUITE
