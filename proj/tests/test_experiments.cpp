#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sew/experiments.hpp"
#include "sew/simulate.hpp"

using namespace sew;
using namespace sew::experiments;

namespace {

// Sample variance of the k-th finite difference scaled to a derivative.
double derivative_variance(const std::vector<double>& x, double rate, int order) {
  std::vector<double> d = x;
  for (int k = 0; k < order; ++k) {
    for (std::size_t i = 0; i + 1 < d.size(); ++i) d[i] = (d[i + 1] - d[i]) * rate;
    d.pop_back();
  }
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("rate plan reproduces the requested rate variance") {
  const double v_req = 0.5;
  const auto plan = rotation_bands_from_rate_plan(
      v_req, {{0.1, 0.8, 0.5, 0.0, 4}, {0.8, 4.0, 0.3, 1.0, 6}, {4.0, 12.0, 0.2, 1.0, 6}});
  // Long realization so per-band energy scatter stays small.
  const auto sig = sim::generate_test_signal(11, 120.0, 100.0, plan);
  const double v = derivative_variance(sig.samples, 100.0, 1);
  CHECK(v == doctest::Approx(v_req).epsilon(0.25));
}

TEST_CASE("accel plan reproduces the requested acceleration variance") {
  const double v_req = 2.0;
  const auto plan = position_bands_from_accel_plan(
      v_req, {{0.1, 0.8, 0.5, 0.0, 4}, {0.8, 4.0, 0.3, 1.0, 6}, {4.0, 12.0, 0.2, 1.0, 6}});
  const auto sig = sim::generate_test_signal(12, 120.0, 100.0, plan);
  const double v = derivative_variance(sig.samples, 100.0, 2);
  CHECK(v == doctest::Approx(v_req).epsilon(0.25));
}

TEST_CASE("band plans are ordered, bounded, and positive") {
  const std::vector<SpectralSplit> splits = {{0.2, 1.0, 0.6, 0.0, 3}, {1.0, 8.0, 0.4, 1.5, 5}};
  for (const auto& plan :
       {rotation_bands_from_rate_plan(1.0, splits), position_bands_from_accel_plan(1.0, splits)}) {
    REQUIRE(plan.size() == 8);
    for (std::size_t i = 0; i < plan.size(); ++i) {
      CHECK(plan[i].f_lo >= 0.2 - 1e-12);
      CHECK(plan[i].f_hi <= 8.0 + 1e-12);
      CHECK(plan[i].f_lo < plan[i].f_hi);
      CHECK(plan[i].amplitude > 0.0);
      if (i > 0) CHECK(plan[i].f_lo >= plan[i - 1].f_lo);
    }
  }
}

TEST_CASE("steeper slope concentrates energy at the low edge") {
  const auto flat = rotation_bands_from_rate_plan(1.0, {{1.0, 8.0, 1.0, 0.0, 6}});
  const auto steep = rotation_bands_from_rate_plan(1.0, {{1.0, 8.0, 1.0, 3.0, 6}});
  // Same edges; the sloped split must put a larger share of its amplitude in
  // the first sub-band and a smaller share in the last.
  CHECK(steep.front().amplitude > flat.front().amplitude);
  CHECK(steep.back().amplitude < flat.back().amplitude);
}

TEST_CASE("invalid splits are rejected") {
  CHECK_THROWS_AS(rotation_bands_from_rate_plan(1.0, {{2.0, 1.0, 0.5, 0.0, 2}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rotation_bands_from_rate_plan(1.0, {{1.0, 2.0, -0.1, 0.0, 2}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rotation_bands_from_rate_plan(1.0, {{1.0, 2.0, 0.5, 0.0, 0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(rotation_bands_from_rate_plan(0.0, {{1.0, 2.0, 0.5, 0.0, 2}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(position_bands_from_accel_plan(-1.0, {{1.0, 2.0, 0.5, 0.0, 2}}),
                  std::invalid_argument);
}

TEST_CASE("residual-curve band plan is normalized and in range") {
  const auto plan = fig2_band_plan();
  REQUIRE(plan.size() == 30);
  double e = 0.0;
  for (const auto& b : plan) {
    CHECK(b.f_lo > 0.0);
    CHECK(b.f_hi <= 12.0 + 1e-9);
    CHECK(b.f_lo < b.f_hi);
    e += b.amplitude * b.amplitude;
  }
  CHECK(e == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("scenario presets are self-consistent") {
  for (const auto& sc : {handheld_scenario(1), bodycam_scenario(1), quality_scenario(1)}) {
    CHECK(sc.duration >= 2.0);
    CHECK(sc.imu_rate > 4.0 * sc.frame_rate);
    CHECK(sc.camera.readout_time >= 0.0);
    CHECK(sc.camera.readout_time < sc.camera.frame_period);
    CHECK(sc.n_landmarks >= 8);
    CHECK(sc.landmark_min_distance < sc.landmark_max_distance);
    CHECK(sc.sigma_gyro > 0.0);
    CHECK(sc.sigma_accel > 0.0);
    CHECK(!sc.rotation_bands.empty());
    CHECK(!sc.position_bands.empty());
  }
}

TEST_CASE("quality preset keeps every band on the reachable grid") {
  // The trajectory generator lays band content onto a control-point grid at a
  // quarter of the IMU rate; content near or above that grid's Nyquist rate
  // is strongly attenuated. The quality preset relies on its high band
  // surviving, so it must sit safely below imu_rate / 8.
  const auto sc = quality_scenario(1);
  const double reachable = sc.imu_rate / 8.0;
  for (const auto& b : sc.rotation_bands) CHECK(b.f_hi <= reachable + 1e-9);
  for (const auto& b : sc.position_bands) CHECK(b.f_hi <= reachable + 1e-9);
}

TEST_CASE("residual curve experiment produces a sane sweep") {
  Fig2Config cfg;
  cfg.seed = 80;
  cfg.duration = 3.0;
  cfg.sample_rate = 100.0;
  cfg.sigma_n = 0.05;
  cfg.dt_lo = 0.05;
  cfg.dt_hi = 0.6;
  cfg.n_dt = 8;
  const auto s = run_fig2(cfg);
  REQUIRE(s.rows.size() == 8);
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const auto& r = s.rows[i];
    CHECK(r.sigma_n == doctest::Approx(0.05));
    CHECK(r.sigma_r_empirical > 0.0);
    CHECK(r.sigma_r_predicted > 0.0);
    CHECK(r.sigma_r0 >= 0.0);
    CHECK(std::isfinite(r.sigma_r_predicted));
    if (i > 0) CHECK(r.dt > s.rows[i - 1].dt);
  }
  CHECK(s.argmin_r0 < s.rows.size());
  CHECK(std::isfinite(s.max_rel_error));
}

TEST_CASE("experiment entry points reject empty requests") {
  CHECK_THROWS_AS(run_quality(std::vector<double>{}, std::vector<std::uint64_t>{1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_quality(std::vector<double>{0.9}, std::vector<std::uint64_t>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_weights(1, {}), std::invalid_argument);
  CHECK_THROWS_AS(run_dropout(1, {}), std::invalid_argument);
}
