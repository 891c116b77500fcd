#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qkdlink/engine.hpp"
#include "qkdlink/sifting.hpp"
#include "qkdlink/stabilizer.hpp"

using namespace qkdlink;

namespace {

// Single narrow peak at `peak_ps` on a 1000 ps period with 5 ps bins.
ArrivalHistogram peaked(double peak_ps, std::uint64_t height = 1000) {
  auto h = ArrivalHistogram::covering(1000, 5, -500);
  h.add(peak_ps, height);
  h.add(peak_ps - 5, height / 2);
  h.add(peak_ps + 5, height / 2);
  return h;
}

}  // namespace

TEST_CASE("drift profiles") {
  CHECK(drift_offset(DriftProfile::none(), 123.0) == 0.0);
  CHECK(drift_offset(DriftProfile::linear(2.0), 50.0) == doctest::Approx(100.0));
  CHECK(drift_offset(DriftProfile::sinusoid(50, 600), 150) == doctest::Approx(50.0));
  const auto walk = DriftProfile::random_walk(2.0, 1.0, 7);
  CHECK(drift_offset(walk, 37.25) == drift_offset(walk, 37.25));
  CHECK(drift_offset(walk, 0.0) == 0.0);
  CHECK_THROWS_AS(drift_offset(walk, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(DriftProfile::sinusoid(1, 0), std::invalid_argument);
}

TEST_CASE("drift profiles are continuous") {
  for (const auto& prof : default_drift_profiles()) {
    double worst = 0;
    for (double t = 0; t < 200; t += 0.37) {
      worst = std::max(worst, std::fabs(drift_offset(prof, t + 1e-6) - drift_offset(prof, t)));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("single stabilizer steps") {
  SUBCASE("peak 35 ps ahead moves one increment") {
    const auto s = stabilize_step(peaked(35), 0.0);
    CHECK(s.delay_ps == 10.0);
    CHECK(s.status == StepStatus::Moved);
  }
  SUBCASE("peak behind moves back") {
    CHECK(stabilize_step(peaked(-35), 0.0).delay_ps == -10.0);
  }
  SUBCASE("peak inside the deadband") {
    const auto s = stabilize_step(peaked(103), 100.0);
    CHECK(s.delay_ps == 100.0);
    CHECK(s.status == StepStatus::Deadband);
  }
  SUBCASE("shortest way round the period") {
    // Peak near +490 ps and delay near -490 ps are 20 ps apart across the wrap.
    CHECK(stabilize_step(peaked(-492.5), 480.0).delay_ps == 490.0);
  }
  SUBCASE("empty histogram") {
    const auto s = stabilize_step(ArrivalHistogram::covering(1000, 10, -500), 42.0);
    CHECK(s.delay_ps == 42.0);
    CHECK(s.status == StepStatus::InsufficientCounts);
  }
}

TEST_CASE("stabilizer input checks") {
  CHECK_THROWS_AS(stabilize_step(ArrivalHistogram::covering(1000, 20, -500), 0.0),
                  std::invalid_argument);
  auto short_hist = ArrivalHistogram::covering(1000, 10, -500);
  short_hist.counts.resize(50);
  CHECK_THROWS_AS(stabilize_step(short_hist, 0.0), std::invalid_argument);
}

TEST_CASE("histogram binning wraps and merges") {
  auto h = ArrivalHistogram::covering(1000, 10, -500);
  h.add(-500);
  h.add(499.9);
  h.add(1200);  // same as 200
  CHECK(h.total() == 3);
  CHECK(h.counts.front() == 1);
  CHECK(h.counts.back() == 1);
  CHECK(h.counts[70] == 1);
  auto g = h;
  g.merge(h);
  CHECK(g.total() == 6);
  CHECK_THROWS_AS(g.merge(ArrivalHistogram::covering(1000, 5, -500)), std::invalid_argument);
}

TEST_CASE("sampled arrival histogram peaks at the drift") {
  CounterRng rng(1, 2);
  const auto h = sample_arrival_histogram(rng, 1000, 10, 1e5, 123.0, 60, 1e4);
  const auto s = stabilize_step(h, 123.0);
  CHECK(std::fabs(s.peak_ps - 123.0) < 5);
  CHECK(s.status == StepStatus::Deadband);
}

TEST_CASE("closed loop tracks linear drift for 1e4 s") {
  const ProtocolParams p;
  const auto l = LinkModel::unidirectional(ChannelSpec::emulated(10));
  StabilityConfig c;
  c.drift = DriftProfile::linear(1.0);
  c.seed = 1;
  const auto iv = run_stability(p, l, c);
  REQUIRE(iv.size() == 10'000);
  double worst = 0;
  Tallies all;
  for (const auto& i : iv) {
    all.merge(i.tallies);
    if (i.t_start_s >= 100) worst = std::max(worst, std::fabs(i.residual_ps()));
  }
  CHECK(worst <= 10);
  const double q0 = sifted_from_tallies(run_analytic(p, l, 1e4)).qber_majority;
  CHECK(std::fabs(sifted_from_tallies(all).qber_majority - q0) < 0.002);
}

TEST_CASE("open loop QBER runs away under linear drift") {
  const ProtocolParams p;
  StabilityConfig c;
  c.duration_s = 2000;
  c.drift = DriftProfile::linear(1.0);
  c.stabilized = false;
  const auto iv = run_stability(p, LinkModel::unidirectional(ChannelSpec::emulated(10)), c);
  const bool crossed = std::any_of(iv.begin(), iv.end(), [](const auto& i) {
    return sifted_from_tallies(i.tallies).qber_majority > 0.05;
  });
  CHECK(crossed);
  CHECK(iv.back().delay_ps == 0.0);
}

TEST_CASE("closed loop holds the default drift profiles near the no-drift QBER") {
  const ProtocolParams p;
  const auto l = LinkModel::unidirectional(ChannelSpec::emulated(10));
  const double q0 = sifted_from_tallies(run_analytic(p, l, 1.0)).qber_majority;
  for (const auto& prof : default_drift_profiles()) {
    StabilityConfig c;
    c.duration_s = 3000;
    c.drift = prof;
    c.seed = 5;
    Tallies all;
    for (const auto& i : run_stability(p, l, c)) all.merge(i.tallies);
    CHECK(std::fabs(sifted_from_tallies(all).qber_majority - q0) < 0.002);
  }
}
