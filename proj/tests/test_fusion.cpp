#include <algorithm>
#include <cmath>
#include <vector>

#include <ceres/ceres.h>

// glog (pulled in by the solver) defines a CHECK family; the test macros
// must win here.
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_GT
#undef CHECK_LT
#undef CHECK_GE
#undef CHECK_LE

#include "doctest.h"
#include "fusion_functors.hpp"
#include "sew/errors.hpp"
#include "sew/fusion.hpp"
#include "sew/simulate.hpp"

using namespace sew;

namespace {

// Central finite differences against the solver's automatic derivatives,
// with 1e-6-scaled steps and a 1e-4 relative gate.
void check_jacobian(const ceres::CostFunction& cost, const std::vector<double*>& params) {
  const auto& sizes = cost.parameter_block_sizes();
  const int n_res = cost.num_residuals();

  std::vector<std::vector<double>> jac(sizes.size());
  std::vector<double*> jac_ptr(sizes.size());
  for (size_t b = 0; b < sizes.size(); ++b) {
    jac[b].assign(static_cast<size_t>(n_res * sizes[b]), 0.0);
    jac_ptr[b] = jac[b].data();
  }
  std::vector<double> r0(static_cast<size_t>(n_res), 0.0);
  REQUIRE(cost.Evaluate(params.data(), r0.data(), jac_ptr.data()));

  std::vector<double> rp(r0.size()), rm(r0.size());
  for (size_t b = 0; b < sizes.size(); ++b) {
    for (int k = 0; k < sizes[b]; ++k) {
      double& x = params[b][k];
      const double saved = x;
      const double h = 1e-6 * std::max(1.0, std::abs(saved));
      x = saved + h;
      REQUIRE(cost.Evaluate(params.data(), rp.data(), nullptr));
      x = saved - h;
      REQUIRE(cost.Evaluate(params.data(), rm.data(), nullptr));
      x = saved;
      for (int r = 0; r < n_res; ++r) {
        const double fd = (rp[static_cast<size_t>(r)] - rm[static_cast<size_t>(r)]) / (2.0 * h);
        const double ad = jac[b][static_cast<size_t>(r * sizes[b] + k)];
        CHECK(std::abs(ad - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

std::vector<Eigen::Quaterniond> random_quat_chain(sim::Rng& rng, int n) {
  std::vector<Eigen::Quaterniond> q(static_cast<size_t>(n));
  const Eigen::Vector3d axis = rng.normal3().normalized();
  q[0] = Eigen::Quaterniond(Eigen::AngleAxisd(rng.uniform(-1.2, 1.2), axis));
  for (int i = 1; i < n; ++i) {
    q[static_cast<size_t>(i)] = q[static_cast<size_t>(i - 1)] * splines::quat_exp<double>(0.15 * rng.normal3());
  }
  return q;
}

// Small noise-free scenario whose dense truth grid the estimator can match
// exactly with a fixed knot spacing of 4 / imu_rate.
sim::ScenarioConfig recovery_scenario() {
  sim::ScenarioConfig sc;
  sc.seed = 3;
  sc.duration = 2.5;
  sc.imu_rate = 100.0;
  sc.frame_rate = 20.0;
  sc.camera = sensors::CameraModel{400.0, 400.0, 320.0, 240.0, 640.0, 480.0, 0.02, 0.05};
  sc.n_landmarks = 10;
  sc.landmark_min_distance = 2.0;
  sc.landmark_max_distance = 8.0;
  sc.pixel_noise = 0.0;
  sc.outlier_rate = 0.0;
  sc.sigma_gyro = 0.0;
  sc.sigma_accel = 0.0;
  sc.biases.gyro = Eigen::Vector3d(0.01, -0.02, 0.015);
  sc.biases.accel = Eigen::Vector3d(0.05, -0.03, 0.02);
  sc.rotation_bands = {{0.1, 0.8, 0.15}, {0.8, 2.0, 0.05}};
  sc.position_bands = {{0.1, 0.6, 0.25}, {0.6, 1.5, 0.08}};
  return sc;
}

fusion::FusionConfig recovery_config() {
  fusion::FusionConfig fc;
  fc.weight_mode = fusion::WeightMode::kInverseNoise;
  fc.fixed_dt_so3 = 0.04;  // matches the dense truth grid, 4 / imu_rate
  fc.fixed_dt_r3 = 0.04;
  fc.sigma_gyro = 0.05;
  fc.sigma_accel = 0.05;
  fc.max_iterations = 200;
  return fc;
}

// True inverse depth of each landmark along its measured reference ray;
// exact when the reference pixel is noise-free.
std::vector<sensors::Landmark> true_inverse_depths(const sensors::TrackSet& tracks, const sim::GroundTruth& truth,
                                                   const sensors::CameraModel& camera) {
  std::vector<sensors::Landmark> out = tracks.landmarks;
  for (auto& lm : out) {
    const auto& ref = lm.reference;
    const double t = sensors::observation_time(ref.frame_start_time, ref.pixel.y(), camera);
    const Eigen::Vector3d in_cam = truth.trajectory.rotation.eval_quat(t).conjugate() *
                                   (truth.landmarks[static_cast<size_t>(lm.track_id)] -
                                    truth.trajectory.position.eval(t));
    lm.inverse_depth = 1.0 / in_cam.norm();
  }
  return out;
}

// IMU + minimal two-frame track set for structural tests.
struct TinyProblem {
  sensors::ImuLog imu;
  sensors::TrackSet tracks;
  sensors::CameraModel camera{100.0, 100.0, 50.0, 50.0, 100.0, 100.0, 0.0, 0.5};
};

TinyProblem tiny_problem(double duration = 10.0, double rate = 100.0) {
  TinyProblem p;
  const int n = static_cast<int>(std::llround(duration * rate));
  for (int i = 0; i <= n; ++i) {
    sensors::ImuSample s;
    s.t = static_cast<double>(i) / rate;
    s.omega = Eigen::Vector3d(0.01, -0.02, 0.005);
    s.accel = Eigen::Vector3d(0.1, 0.2, 9.6);  // not at rest: nonzero residual at cold start
    p.imu.push_back(s);
  }
  sensors::Observation a;
  a.track_id = 7;
  a.frame_index = 0;
  a.pixel = Eigen::Vector2d(50.0, 50.0);
  a.frame_start_time = 0.4 * duration;
  sensors::Observation b = a;
  b.frame_index = 1;
  b.pixel = Eigen::Vector2d(52.0, 49.0);
  b.frame_start_time = 0.4 * duration + 0.5;
  p.tracks.observations = {a, b};
  sensors::Landmark lm;
  lm.track_id = 7;
  lm.reference = a;
  p.tracks.landmarks = {lm};
  return p;
}

weighting::ResidualWeightPlan fixed_plan(double dt, double gamma_gyro, double gamma_accel) {
  weighting::ResidualWeightPlan plan;
  plan.dt_so3 = dt;
  plan.dt_r3 = dt;
  plan.gyro.gamma = gamma_gyro;
  plan.gyro.sigma_r2 = 1.0 / gamma_gyro;
  plan.accel.gamma = gamma_accel;
  plan.accel.sigma_r2 = 1.0 / gamma_accel;
  return plan;
}

}  // namespace

TEST_CASE("gyro residual matches central finite differences on random states") {
  sim::Rng rng(11);
  for (int state = 0; state < 50; ++state) {
    fusion::detail::GyroResidual f;
    f.measured = 0.5 * rng.normal3();
    const double u = rng.uniform();
    splines::cumulative_basis(u, f.bt);
    splines::cumulative_basis_d1(u, f.btd);
    f.dt = rng.uniform(0.02, 0.4);
    f.sqrt_w = rng.uniform(0.5, 30.0);

    auto q = random_quat_chain(rng, 4);
    Eigen::Vector3d bias = 0.05 * rng.normal3();
    ceres::AutoDiffCostFunction<fusion::detail::GyroResidual, 3, 4, 4, 4, 4, 3> cost(
        new fusion::detail::GyroResidual(f));
    check_jacobian(cost, {q[0].coeffs().data(), q[1].coeffs().data(), q[2].coeffs().data(), q[3].coeffs().data(),
                          bias.data()});
  }
}

TEST_CASE("accel residual matches central finite differences on random states") {
  sim::Rng rng(12);
  for (int state = 0; state < 50; ++state) {
    fusion::detail::AccelResidual f;
    f.measured = Eigen::Vector3d(0.0, 0.0, 9.81) + rng.normal3();
    f.gravity = Eigen::Vector3d(0.0, 0.0, -9.81);
    const double u = rng.uniform();
    splines::cumulative_basis(u, f.bt);
    double b2[4];
    const double up = rng.uniform();
    splines::cubic_basis_d2(up, b2);
    const double dt = rng.uniform(0.02, 0.4);
    for (int m = 0; m < 4; ++m) f.b2[m] = b2[m] / (dt * dt);
    f.sqrt_w = rng.uniform(0.5, 30.0);

    auto q = random_quat_chain(rng, 4);
    std::vector<Eigen::Vector3d> p(4);
    for (auto& v : p) v = 0.5 * rng.normal3();
    Eigen::Vector3d bias = 0.05 * rng.normal3();
    ceres::AutoDiffCostFunction<fusion::detail::AccelResidual, 3, 4, 4, 4, 4, 3, 3, 3, 3, 3> cost(
        new fusion::detail::AccelResidual(f));
    check_jacobian(cost, {q[0].coeffs().data(), q[1].coeffs().data(), q[2].coeffs().data(), q[3].coeffs().data(),
                          p[0].data(), p[1].data(), p[2].data(), p[3].data(), bias.data()});
  }
}

TEST_CASE("reprojection residual matches central finite differences on random states") {
  const sensors::CameraModel camera{400.0, 400.0, 320.0, 240.0, 640.0, 480.0, 0.0, 0.05};
  sim::Rng rng(13);

  // Disjoint observation and reference segments: 17 parameter blocks.
  int done = 0;
  while (done < 50) {
    auto* f = new fusion::detail::ReprojResidual;
    f->measured = Eigen::Vector2d(rng.uniform(100.0, 540.0), rng.uniform(100.0, 380.0));
    f->ray = sensors::backproject_ray(Eigen::Vector2d(rng.uniform(100.0, 540.0), rng.uniform(100.0, 380.0)), camera);
    f->fx = camera.fx;
    f->fy = camera.fy;
    f->cx = camera.cx;
    f->cy = camera.cy;
    const double u_obs = rng.uniform(), u_ref = rng.uniform();
    splines::cumulative_basis(u_obs, f->bt_obs);
    splines::cumulative_basis(u_ref, f->bt_ref);
    splines::cubic_basis(u_obs, f->b_obs);
    splines::cubic_basis(u_ref, f->b_ref);
    for (int m = 0; m < 4; ++m) {
      f->rot_obs[m] = m;
      f->rot_ref[m] = 4 + m;
      f->pos_obs[m] = 8 + m;
      f->pos_ref[m] = 12 + m;
    }
    f->rho_slot = 16;

    auto q = random_quat_chain(rng, 8);
    std::vector<Eigen::Vector3d> p(8);
    for (auto& v : p) v = 0.3 * rng.normal3();
    double rho = rng.uniform(0.05, 0.5);

    ceres::DynamicAutoDiffCostFunction<fusion::detail::ReprojResidual, 4> cost(f);
    for (int b = 0; b < 8; ++b) cost.AddParameterBlock(4);
    for (int b = 0; b < 8; ++b) cost.AddParameterBlock(3);
    cost.AddParameterBlock(1);
    cost.SetNumResiduals(2);

    std::vector<double*> params;
    for (auto& qq : q) params.push_back(qq.coeffs().data());
    for (auto& pp : p) params.push_back(pp.data());
    params.push_back(&rho);

    double r[2];
    if (!cost.Evaluate(params.data(), r, nullptr)) continue;  // behind the camera; draw another state
    check_jacobian(cost, params);
    ++done;
  }

  // Shared segment with deduplicated blocks: 9 parameter blocks.
  done = 0;
  while (done < 50) {
    auto* f = new fusion::detail::ReprojResidual;
    f->measured = Eigen::Vector2d(rng.uniform(100.0, 540.0), rng.uniform(100.0, 380.0));
    f->ray = sensors::backproject_ray(Eigen::Vector2d(rng.uniform(100.0, 540.0), rng.uniform(100.0, 380.0)), camera);
    f->fx = camera.fx;
    f->fy = camera.fy;
    f->cx = camera.cx;
    f->cy = camera.cy;
    const double u_obs = rng.uniform(), u_ref = rng.uniform();
    splines::cumulative_basis(u_obs, f->bt_obs);
    splines::cumulative_basis(u_ref, f->bt_ref);
    splines::cubic_basis(u_obs, f->b_obs);
    splines::cubic_basis(u_ref, f->b_ref);
    for (int m = 0; m < 4; ++m) {
      f->rot_obs[m] = m;
      f->rot_ref[m] = m;  // same four control rotations
      f->pos_obs[m] = 4 + m;
      f->pos_ref[m] = 4 + m;
    }
    f->rho_slot = 8;

    auto q = random_quat_chain(rng, 4);
    std::vector<Eigen::Vector3d> p(4);
    for (auto& v : p) v = 0.3 * rng.normal3();
    double rho = rng.uniform(0.05, 0.5);

    ceres::DynamicAutoDiffCostFunction<fusion::detail::ReprojResidual, 4> cost(f);
    for (int b = 0; b < 4; ++b) cost.AddParameterBlock(4);
    for (int b = 0; b < 4; ++b) cost.AddParameterBlock(3);
    cost.AddParameterBlock(1);
    cost.SetNumResiduals(2);

    std::vector<double*> params;
    for (auto& qq : q) params.push_back(qq.coeffs().data());
    for (auto& pp : p) params.push_back(pp.data());
    params.push_back(&rho);

    double r[2];
    if (!cost.Evaluate(params.data(), r, nullptr)) continue;
    check_jacobian(cost, params);
    ++done;
  }
}

TEST_CASE("inverse-noise weight plan uses fixed spacing and 1/sigma^2") {
  const auto tiny = tiny_problem(4.0, 50.0);
  fusion::FusionConfig fc;
  fc.weight_mode = fusion::WeightMode::kInverseNoise;
  fc.fixed_dt_so3 = 0.1;
  fc.fixed_dt_r3 = 0.2;
  fc.sigma_gyro = 0.05;
  fc.sigma_accel = 0.2;
  const auto plan = fusion::make_weight_plan(tiny.imu, fc);
  CHECK(plan.dt_so3 == doctest::Approx(0.1));
  CHECK(plan.dt_r3 == doctest::Approx(0.2));
  CHECK(plan.gyro.gamma == doctest::Approx(1.0 / 0.0025));
  CHECK(plan.accel.gamma == doctest::Approx(1.0 / 0.04));

  fc.sigma_gyro = 0.0;
  CHECK_THROWS_AS(fusion::make_weight_plan(tiny.imu, fc), std::invalid_argument);
}

TEST_CASE("spectral weight plan selects spacing from the log") {
  auto sc = recovery_scenario();
  sc.sigma_gyro = 0.01;
  sc.sigma_accel = 0.05;
  const auto truth = sim::generate_trajectory(sc);
  const auto imu = sim::generate_imu(truth, sc);

  fusion::FusionConfig fc;
  fc.weight_mode = fusion::WeightMode::kSew;
  fc.quality_gyro = 0.95;
  fc.quality_accel = 0.95;
  fc.sigma_gyro = 0.01;
  fc.sigma_accel = 0.05;
  fc.dt_max = 0.5;
  const auto plan = fusion::make_weight_plan(imu, fc);
  CHECK(plan.dt_so3 > 0.0);
  CHECK(plan.dt_so3 <= 0.5);
  CHECK(plan.dt_r3 > 0.0);
  CHECK(plan.dt_r3 <= 0.5);
  CHECK(plan.gyro.gamma > 0.0);
  CHECK(plan.accel.gamma > 0.0);
  CHECK(plan.requested_quality_gyro == doctest::Approx(0.95));

  // Noise changes the weights, never the spacing.
  fusion::FusionConfig noisier = fc;
  noisier.sigma_gyro = 0.02;
  const auto plan2 = fusion::make_weight_plan(imu, noisier);
  CHECK(plan2.dt_so3 == doctest::Approx(plan.dt_so3));
  CHECK(plan2.gyro.gamma < plan.gyro.gamma);
}

TEST_CASE("build_problem rejects structurally broken inputs") {
  const auto tiny = tiny_problem();
  const auto plan = fixed_plan(0.05, 1e4, 1e2);
  const fusion::FusionConfig fc;

  SUBCASE("empty tracks") {
    sensors::TrackSet empty;
    CHECK_THROWS_AS(fusion::build_problem(empty, tiny.imu, tiny.camera, plan, fc), BuildError);
  }
  SUBCASE("IMU gap over five knot intervals") {
    sensors::ImuLog gappy;
    for (const auto& s : tiny.imu) {
      if (s.t > 5.0 && s.t < 5.31) continue;  // 0.31 s hole vs limit 0.25 s
      gappy.push_back(s);
    }
    CHECK_THROWS_WITH_AS(fusion::build_problem(tiny.tracks, gappy, tiny.camera, plan, fc),
                         doctest::Contains("gap"), BuildError);
  }
  SUBCASE("single-observation track") {
    auto tracks = tiny.tracks;
    tracks.observations.pop_back();
    CHECK_THROWS_AS(fusion::build_problem(tracks, tiny.imu, tiny.camera, plan, fc), BuildError);
  }
  SUBCASE("observation without a landmark") {
    auto tracks = tiny.tracks;
    auto stray = tracks.observations.front();
    stray.track_id = 99;
    tracks.observations.push_back(stray);
    CHECK_THROWS_AS(fusion::build_problem(tracks, tiny.imu, tiny.camera, plan, fc), BuildError);
  }
  SUBCASE("only self-observations") {
    auto tracks = tiny.tracks;
    tracks.observations = {tracks.landmarks[0].reference};
    tracks.observations.push_back(tracks.landmarks[0].reference);  // two copies of frame 0
    CHECK_THROWS_AS(fusion::build_problem(tracks, tiny.imu, tiny.camera, plan, fc), BuildError);
  }
}

TEST_CASE("knot coverage: 10 s of data at dt 0.05 gives 205 control points") {
  const auto tiny = tiny_problem();  // IMU spans exactly [0, 10]
  const auto plan = fixed_plan(0.05, 1e4, 1e2);
  fusion::FusionConfig fc;
  fc.max_iterations = 0;
  auto problem = fusion::build_problem(tiny.tracks, tiny.imu, tiny.camera, plan, fc);
  const auto res = fusion::optimize(problem, fc);
  CHECK(res.trajectory.rotation.control_rotations().size() == 205);
  CHECK(res.trajectory.position.control_points().size() == 205);
  // Full support for every measurement: the valid interval brackets the data.
  CHECK(res.trajectory.valid_begin() <= 0.0);
  CHECK(res.trajectory.valid_end() > 10.0);
}

TEST_CASE("doubling a modality weight exactly doubles its cost contribution") {
  const auto tiny = tiny_problem(4.0, 50.0);
  const fusion::FusionConfig fc;
  const auto plan1 = fixed_plan(0.1, 400.0, 25.0);
  auto plan2 = plan1;
  plan2.gyro.gamma *= 2.0;
  plan2.accel.gamma *= 2.0;

  auto p1 = fusion::build_problem(tiny.tracks, tiny.imu, tiny.camera, plan1, fc);
  auto p2 = fusion::build_problem(tiny.tracks, tiny.imu, tiny.camera, plan2, fc);
  const auto c1 = fusion::evaluate_cost(p1);
  const auto c2 = fusion::evaluate_cost(p2);
  CHECK(c1.gyro > 0.0);
  CHECK(c1.accel > 0.0);
  CHECK(c2.gyro == doctest::Approx(2.0 * c1.gyro).epsilon(1e-12));
  CHECK(c2.accel == doctest::Approx(2.0 * c1.accel).epsilon(1e-12));
  CHECK(c2.vision == doctest::Approx(c1.vision).epsilon(1e-12));

  // The scale factor multiplies both IMU weights and leaves vision alone.
  fusion::FusionConfig scaled = fc;
  scaled.weight_scale_factor = 10.0;
  auto p3 = fusion::build_problem(tiny.tracks, tiny.imu, tiny.camera, plan1, scaled);
  const auto c3 = fusion::evaluate_cost(p3);
  CHECK(c3.gyro == doctest::Approx(10.0 * c1.gyro).epsilon(1e-12));
  CHECK(c3.accel == doctest::Approx(10.0 * c1.accel).epsilon(1e-12));
  CHECK(c3.vision == doctest::Approx(c1.vision).epsilon(1e-12));
}

TEST_CASE("seeded at the exact truth the solver has nothing to do") {
  auto sc = recovery_scenario();
  sc.camera.readout_time = 0.0;  // global shutter: pixel measurements are exact
  const auto truth = sim::generate_trajectory(sc);
  const auto imu = sim::generate_imu(truth, sc);
  const auto tracks = sim::generate_observations(truth, sc);
  REQUIRE(!tracks.landmarks.empty());

  const auto fc = recovery_config();
  const auto plan = fusion::make_weight_plan(imu, fc);
  auto problem = fusion::build_problem(tracks, imu, sc.camera, plan, fc);
  const auto seeded = true_inverse_depths(tracks, truth, sc.camera);
  fusion::set_state(problem, truth.trajectory, seeded, truth.biases);

  const auto before = fusion::evaluate_cost(problem);
  CHECK(before.total <= 1e-12);

  const auto res = fusion::optimize(problem, fc);
  CHECK(res.report.final_cost <= 1e-12);
  CHECK(res.report.final_cost <= res.report.initial_cost);
  CHECK(res.report.iterations <= 2);

  // The state did not move.
  const auto& rot_truth = truth.trajectory.rotation.control_rotations();
  const auto& rot_est = res.trajectory.rotation.control_rotations();
  for (size_t j = 0; j < rot_est.size(); ++j) {
    CHECK(rot_est[j].angularDistance(rot_truth[j]) <= 1e-9);
  }
  const auto& pos_truth = truth.trajectory.position.control_points();
  const auto& pos_est = res.trajectory.position.control_points();
  for (size_t j = 0; j < pos_est.size(); ++j) {
    CHECK((pos_est[j] - pos_truth[j]).norm() <= 1e-9);
  }
  CHECK((res.biases.gyro - truth.biases.gyro).norm() <= 1e-9);
  CHECK((res.biases.accel - truth.biases.accel).norm() <= 1e-9);
  CHECK(res.report.q_out_gyro == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.report.q_out_accel == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cold start recovers the exact trajectory, biases and landmarks") {
  const auto sc = recovery_scenario();
  const auto truth = sim::generate_trajectory(sc);
  const auto imu = sim::generate_imu(truth, sc);
  const auto tracks = sim::generate_observations(truth, sc);
  REQUIRE(tracks.landmarks.size() >= 6);

  const auto fc = recovery_config();
  const auto res = fusion::fuse(tracks, imu, sc.camera, fc);

  CHECK(res.report.final_cost <= res.report.initial_cost);
  CHECK(res.report.termination == "CONVERGENCE");
  CHECK(res.report.reprojection_rms <= 1e-3);
  CHECK(res.report.n_reprojection ==
        static_cast<int>(tracks.observations.size() - tracks.landmarks.size()));
  CHECK((res.biases.gyro - truth.biases.gyro).norm() <= 1e-4);
  CHECK((res.biases.accel - truth.biases.accel).norm() <= 1e-4);

  double ss_pos = 0.0, max_rot = 0.0;
  int n_eval = 0;
  for (double t = 0.0; t <= sc.duration - 0.01; t += 0.01) {
    ss_pos += (res.trajectory.position.eval(t) - truth.trajectory.position.eval(t)).squaredNorm();
    max_rot = std::max(max_rot,
                       res.trajectory.rotation.eval_quat(t).angularDistance(truth.trajectory.rotation.eval_quat(t)));
    ++n_eval;
  }
  CHECK(std::sqrt(ss_pos / n_eval) <= 1e-3);
  CHECK(max_rot <= 1e-3);

  // Landmark inverse depths against geometry.
  const auto truth_lms = true_inverse_depths(tracks, truth, sc.camera);
  for (size_t i = 0; i < res.landmarks.size(); ++i) {
    CHECK(res.landmarks[i].inverse_depth == doctest::Approx(truth_lms[i].inverse_depth).epsilon(1e-3));
  }
  const double ratio = fusion::landmark_scale_ratio(res.landmarks, res.trajectory, sc.camera, truth.landmarks);
  CHECK(ratio == doctest::Approx(1.0).epsilon(1e-3));

  CHECK(res.report.q_out_gyro > 0.999);
  CHECK(res.report.q_out_accel > 0.999);
}

TEST_CASE("cost is invariant under a rigid yaw-and-translation gauge change") {
  auto sc = recovery_scenario();
  sc.sigma_gyro = 0.01;  // noisy data so the cost is far from zero
  sc.sigma_accel = 0.05;
  sc.pixel_noise = 0.5;
  const auto truth = sim::generate_trajectory(sc);
  const auto imu = sim::generate_imu(truth, sc);
  const auto tracks = sim::generate_observations(truth, sc);

  const auto fc = recovery_config();
  const auto plan = fusion::make_weight_plan(imu, fc);
  auto problem = fusion::build_problem(tracks, imu, sc.camera, plan, fc);
  const auto seeded = true_inverse_depths(tracks, truth, sc.camera);
  fusion::set_state(problem, truth.trajectory, seeded, truth.biases);
  const auto base = fusion::evaluate_cost(problem);
  REQUIRE(base.total > 1.0);

  // Rotation about gravity plus a translation: measurements are unchanged,
  // so the cost must not move.
  const Eigen::Quaterniond yaw(Eigen::AngleAxisd(0.8, Eigen::Vector3d::UnitZ()));
  const Eigen::Vector3d shift(0.4, -0.3, 0.25);
  auto moved = truth.trajectory;
  for (auto& q : moved.rotation.control_rotations()) q = yaw * q;
  moved.rotation.normalize_controls();
  for (auto& p : moved.position.control_points()) p = yaw * p + shift;
  fusion::set_state(problem, moved, seeded, truth.biases);
  const auto transformed = fusion::evaluate_cost(problem);
  CHECK(std::abs(transformed.total - base.total) <= 1e-8 * base.total);
}

TEST_CASE("non-finite initial cost raises a solver error naming the block") {
  const auto tiny = tiny_problem(4.0, 50.0);
  const auto plan = fixed_plan(0.1, 400.0, 25.0);
  const fusion::FusionConfig fc;
  auto problem = fusion::build_problem(tiny.tracks, tiny.imu, tiny.camera, plan, fc);

  splines::Trajectory state;
  state.rotation = splines::SplineSO3(0.1, tiny.imu.front().t - 0.2,
                                      std::vector<Eigen::Quaterniond>(60, Eigen::Quaterniond::Identity()));
  state.position =
      splines::Spline3d(0.1, tiny.imu.front().t - 0.2, std::vector<Eigen::Vector3d>(60, Eigen::Vector3d::Zero()));
  sensors::ImuBiases bad;
  bad.gyro = Eigen::Vector3d(std::nan(""), 0.0, 0.0);
  std::vector<sensors::Landmark> lms = tiny.tracks.landmarks;
  fusion::set_state(problem, state, lms, bad);
  CHECK_THROWS_AS(fusion::optimize(problem, fc), SolverError);
}

TEST_CASE("bias blocks stay frozen when estimation is disabled") {
  const auto tiny = tiny_problem(4.0, 50.0);
  const auto plan = fixed_plan(0.1, 400.0, 25.0);
  fusion::FusionConfig fc;
  fc.estimate_biases = false;
  fc.max_iterations = 3;
  auto problem = fusion::build_problem(tiny.tracks, tiny.imu, tiny.camera, plan, fc);
  const auto res = fusion::optimize(problem, fc);
  CHECK(res.biases.gyro.norm() == 0.0);
  CHECK(res.biases.accel.norm() == 0.0);
}

TEST_CASE("trajectory metrics") {
  // Quadratic position spline: p(t) = (t^2, 0, 0) via cp_j = ((t0 + j dt)^2 - dt^2/3, 0, 0),
  // compensating the dt^2 f'' / 6 offset of smoothing a quadratic.
  const double dt = 0.5, t0 = -1.0;
  std::vector<Eigen::Vector3d> cps;
  for (int j = 0; j < 12; ++j) {
    const double tj = t0 + j * dt;
    cps.emplace_back(tj * tj - dt * dt / 3.0, 0.0, 0.0);
  }
  splines::Trajectory traj;
  traj.position = splines::Spline3d(dt, t0, cps);
  traj.rotation = splines::SplineSO3(dt, t0, std::vector<Eigen::Quaterniond>(12, Eigen::Quaterniond::Identity()));

  CHECK(fusion::endpoint_error(traj, 0.0, 2.0) == doctest::Approx(4.0));
  CHECK(fusion::endpoint_error(traj, 1.0, 1.0) == doctest::Approx(0.0));
  CHECK(fusion::scale_error(1.05, 1.0) == doctest::Approx(0.05));
  CHECK(fusion::scale_error(0.9, 1.0) == doctest::Approx(0.1));

  splines::Trajectory still;
  still.position = splines::Spline3d(dt, t0, std::vector<Eigen::Vector3d>(12, Eigen::Vector3d::Zero()));
  still.rotation = traj.rotation;
  CHECK(fusion::endpoint_distortion(still, traj, 2.0) == doctest::Approx(4.0));
}

TEST_CASE("landmark scale ratio on a known geometry") {
  const sensors::CameraModel camera{100.0, 100.0, 50.0, 50.0, 100.0, 100.0, 0.0, 0.5};
  splines::Trajectory traj;
  traj.position = splines::Spline3d(1.0, -2.0, std::vector<Eigen::Vector3d>(8, Eigen::Vector3d::Zero()));
  traj.rotation = splines::SplineSO3(1.0, -2.0, std::vector<Eigen::Quaterniond>(8, Eigen::Quaterniond::Identity()));

  auto make_lm = [](std::int64_t id, double px, double py, double rho) {
    sensors::Landmark lm;
    lm.track_id = id;
    lm.reference.track_id = id;
    lm.reference.pixel = Eigen::Vector2d(px, py);
    lm.reference.frame_start_time = 0.5;
    lm.inverse_depth = rho;
    return lm;
  };
  std::vector<sensors::Landmark> lms = {make_lm(0, 50.0, 50.0, 0.5), make_lm(1, 70.0, 50.0, 0.25),
                                        make_lm(2, 50.0, 30.0, 0.4)};
  std::vector<Eigen::Vector3d> true_points(3);
  for (size_t i = 0; i < lms.size(); ++i) {
    true_points[i] = sensors::backproject_ray(lms[i].reference.pixel, camera) / lms[i].inverse_depth;
  }
  CHECK(fusion::landmark_scale_ratio(lms, traj, camera, true_points) == doctest::Approx(1.0));

  // Halving every inverse depth doubles all estimated distances.
  auto far = lms;
  for (auto& lm : far) lm.inverse_depth *= 0.5;
  CHECK(fusion::landmark_scale_ratio(far, traj, camera, true_points) == doctest::Approx(2.0));

  // Landmarks at infinity are skipped; with fewer than two usable points
  // there is no ratio.
  auto sparse = lms;
  sparse[0].inverse_depth = 0.0;
  sparse[1].inverse_depth = 0.0;
  CHECK(std::isnan(fusion::landmark_scale_ratio(sparse, traj, camera, true_points)));
}
