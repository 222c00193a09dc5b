#include "sew/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <ceres/ceres.h>
#include <glog/logging.h>

#include "fusion_functors.hpp"
#include "sew/errors.hpp"

namespace sew::fusion {
namespace {

using detail::AccelResidual;
using detail::GyroResidual;
using detail::ReprojResidual;

void init_logging() {
  static std::once_flag flag;
  // Initializing glog belongs to applications, not libraries; raising the
  // threshold is enough to keep the solver's internals quiet.
  std::call_once(flag, [] { FLAGS_minloglevel = 3; });
}

// Uniform knot grid covering [t_min, t_max] with two spare knots on each
// side, so every measurement time has full four-point support.
struct KnotGrid {
  double dt = 0.0;
  double t0 = 0.0;
  int size = 0;

  static KnotGrid cover(double t_min, double t_max, double dt) {
    KnotGrid g;
    g.dt = dt;
    g.t0 = t_min - 2.0 * dt;
    g.size = static_cast<int>(std::ceil((t_max - t_min) / dt)) + 5;
    return g;
  }

  // Segment index and local parameter; segment i uses control points i-1..i+2.
  void locate(double t, int& segment, double& u) const {
    const double s = (t - t0) / dt;
    segment = std::clamp(static_cast<int>(std::floor(s)), 1, size - 3);
    u = std::clamp(s - static_cast<double>(segment), 0.0, 1.0);
  }

  bool covers(double t) const { return t >= t0 + dt && t < t0 + (static_cast<double>(size) - 2.0) * dt; }
};

struct VisionMeta {
  int landmark = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double t_obs = 0.0;
  double t_ref = 0.0;
};

}  // namespace

struct FusionProblem::Impl {
  KnotGrid rot_grid, pos_grid;

  // Parameter storage. The solver holds raw pointers into these vectors, so
  // they are sized once in build_problem and never reallocated after.
  std::vector<Eigen::Quaterniond> rot_cps;
  std::vector<Eigen::Vector3d> pos_cps;
  std::vector<double> rho;  // aligned with landmarks
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();

  std::vector<sensors::Landmark> landmarks;
  std::unordered_map<std::int64_t, int> landmark_index;

  sensors::CameraModel camera;
  sensors::ImuLog imu;
  weighting::ResidualWeightPlan plan;
  FusionConfig config;

  ceres::Problem problem;

  std::vector<ceres::ResidualBlockId> gyro_blocks, accel_blocks, vision_blocks;
  std::vector<VisionMeta> vision_meta;

  double* rot_block(int j) { return rot_cps[static_cast<size_t>(j)].coeffs().data(); }
  double* pos_block(int j) { return pos_cps[static_cast<size_t>(j)].data(); }
};

FusionProblem::FusionProblem() : impl_(std::make_unique<Impl>()) {}
FusionProblem::~FusionProblem() = default;
FusionProblem::FusionProblem(FusionProblem&&) noexcept = default;
FusionProblem& FusionProblem::operator=(FusionProblem&&) noexcept = default;

namespace {

double part_cost(FusionProblem::Impl& im, const std::vector<ceres::ResidualBlockId>& ids) {
  if (ids.empty()) return 0.0;
  ceres::Problem::EvaluateOptions eo;
  eo.apply_loss_function = true;
  eo.num_threads = 1;
  eo.residual_blocks = ids;
  double c = 0.0;
  im.problem.Evaluate(eo, &c, nullptr, nullptr, nullptr);
  return c;
}

std::string first_bad_block(FusionProblem::Impl& im) {
  const std::pair<const char*, const std::vector<ceres::ResidualBlockId>*> parts[] = {
      {"reprojection", &im.vision_blocks}, {"gyro", &im.gyro_blocks}, {"accel", &im.accel_blocks}};
  for (const auto& [kind, ids] : parts) {
    for (size_t i = 0; i < ids->size(); ++i) {
      double c = 0.0;
      const bool ok = im.problem.EvaluateResidualBlock((*ids)[i], true, &c, nullptr, nullptr);
      if (!ok || !std::isfinite(c)) {
        std::ostringstream os;
        os << kind << " block " << i << (ok ? " has non-finite cost" : " failed to evaluate");
        return os.str();
      }
    }
  }
  return "unidentified block";
}

}  // namespace

CostBreakdown evaluate_cost(const FusionProblem& problem) {
  // ceres evaluation mutates scratch space only; the state is untouched.
  auto& im = const_cast<FusionProblem&>(problem).impl();
  CostBreakdown out;
  out.vision = part_cost(im, im.vision_blocks);
  out.gyro = part_cost(im, im.gyro_blocks);
  out.accel = part_cost(im, im.accel_blocks);
  out.total = out.vision + out.gyro + out.accel;
  return out;
}

void set_state(FusionProblem& problem, const splines::Trajectory& trajectory,
               const std::vector<sensors::Landmark>& landmarks, const sensors::ImuBiases& biases) {
  FusionProblem::Impl& im = problem.impl();
  const auto& rot = trajectory.rotation;
  const auto& pos = trajectory.position;
  const auto matches = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  if (!matches(rot.knot_spacing(), im.rot_grid.dt) || !matches(rot.t0(), im.rot_grid.t0) ||
      static_cast<int>(rot.control_rotations().size()) < im.rot_grid.size) {
    throw std::invalid_argument("set_state: rotation spline is not on the problem's knot grid");
  }
  if (!matches(pos.knot_spacing(), im.pos_grid.dt) || !matches(pos.t0(), im.pos_grid.t0) ||
      static_cast<int>(pos.control_points().size()) < im.pos_grid.size) {
    throw std::invalid_argument("set_state: position spline is not on the problem's knot grid");
  }
  for (int j = 0; j < im.rot_grid.size; ++j) {
    im.rot_cps[static_cast<size_t>(j)] = rot.control_rotations()[static_cast<size_t>(j)].normalized();
  }
  for (int j = 0; j < im.pos_grid.size; ++j) {
    im.pos_cps[static_cast<size_t>(j)] = pos.control_points()[static_cast<size_t>(j)];
  }
  for (const auto& lm : landmarks) {
    const auto it = im.landmark_index.find(lm.track_id);
    if (it == im.landmark_index.end()) {
      throw std::invalid_argument("set_state: landmark track id not in the problem");
    }
    im.rho[static_cast<size_t>(it->second)] = lm.inverse_depth;
  }
  im.gyro_bias = biases.gyro;
  im.accel_bias = biases.accel;
}

weighting::ResidualWeightPlan make_weight_plan(const sensors::ImuLog& imu, const FusionConfig& config) {
  if (imu.size() < 4) throw BuildError("IMU log too short to plan weights");
  if (config.weight_mode == WeightMode::kInverseNoise) {
    if (!(config.sigma_gyro > 0.0) || !(config.sigma_accel > 0.0)) {
      throw std::invalid_argument("inverse-noise weighting needs positive noise sigmas");
    }
    weighting::ResidualWeightPlan plan;
    plan.dt_so3 = config.fixed_dt_so3;
    plan.dt_r3 = config.fixed_dt_r3;
    plan.gyro.sigma_f2 = config.sigma_gyro * config.sigma_gyro;
    plan.gyro.sigma_r2 = plan.gyro.sigma_f2;
    plan.gyro.gamma = 1.0 / plan.gyro.sigma_r2;
    plan.accel.sigma_f2 = config.sigma_accel * config.sigma_accel;
    plan.accel.sigma_r2 = plan.accel.sigma_f2;
    plan.accel.gamma = 1.0 / plan.accel.sigma_r2;
    return plan;
  }
  const double span = imu.back().t - imu.front().t;
  if (!(span > 0.0)) throw BuildError("IMU log spans zero time");
  const double fs = static_cast<double>(imu.size() - 1) / span;
  std::vector<Eigen::Vector3d> gyro(imu.size()), accel(imu.size());
  for (size_t i = 0; i < imu.size(); ++i) {
    gyro[i] = imu[i].omega;
    accel[i] = imu[i].accel;
  }
  const auto gyro_spectrum = spectral::vector_spectrum(gyro, fs);
  const auto accel_spectrum = spectral::vector_spectrum(accel, fs);
  return weighting::weights_from_quality(gyro_spectrum, accel_spectrum, config.quality_gyro, config.quality_accel,
                                         config.sigma_gyro, config.sigma_accel, config.dt_max);
}

FusionProblem build_problem(const sensors::TrackSet& tracks, const sensors::ImuLog& imu,
                            const sensors::CameraModel& camera, const weighting::ResidualWeightPlan& plan,
                            const FusionConfig& config) {
  if (tracks.landmarks.empty() || tracks.observations.empty()) {
    throw BuildError("no visual tracks: fusion needs at least one landmark with two observations");
  }
  if (imu.size() < 2) throw BuildError("IMU log has fewer than two samples");
  if (!(plan.dt_so3 > 0.0) || !(plan.dt_r3 > 0.0)) throw BuildError("weight plan has non-positive knot spacing");
  if (!(plan.gyro.gamma > 0.0) || !(plan.accel.gamma > 0.0)) throw BuildError("weight plan has non-positive weights");
  if (!(config.weight_scale_factor > 0.0)) throw BuildError("weight scale factor must be positive");

  const double gap_limit = 5.0 * std::min(plan.dt_so3, plan.dt_r3);
  for (size_t i = 1; i < imu.size(); ++i) {
    const double gap = imu[i].t - imu[i - 1].t;
    if (!(gap > 0.0)) throw BuildError("IMU timestamps are not strictly increasing");
    if (gap > gap_limit) {
      std::ostringstream os;
      os << "IMU gap of " << gap << " s after t=" << imu[i - 1].t << " exceeds five knot intervals (" << gap_limit
         << " s): the spline would be unconstrained inside it";
      throw BuildError(os.str());
    }
  }

  double t_min = imu.front().t;
  double t_max = imu.back().t;
  std::vector<double> obs_time(tracks.observations.size(), 0.0);
  for (size_t i = 0; i < tracks.observations.size(); ++i) {
    const auto& o = tracks.observations[i];
    try {
      obs_time[i] = sensors::observation_time(o.frame_start_time, o.pixel.y(), camera);
    } catch (const std::invalid_argument& e) {
      std::ostringstream os;
      os << "track " << o.track_id << " frame " << o.frame_index << ": " << e.what();
      throw BuildError(os.str());
    }
    t_min = std::min(t_min, obs_time[i]);
    t_max = std::max(t_max, obs_time[i]);
  }

  FusionProblem fp;
  FusionProblem::Impl& im = fp.impl();
  im.camera = camera;
  im.imu = imu;
  im.plan = plan;
  im.config = config;
  im.rot_grid = KnotGrid::cover(t_min, t_max, plan.dt_so3);
  im.pos_grid = KnotGrid::cover(t_min, t_max, plan.dt_r3);

  // Cold start: identity rotations, zero positions, zero biases, and all
  // landmarks at a fixed nominal depth. Initializing depths at infinity
  // (rho = 0) makes the first iterations explain translation parallax as
  // rotation, and with weak IMU weights that basin can survive to
  // convergence; a finite nominal depth keeps translation observable from
  // the start.
  im.rot_cps.assign(static_cast<size_t>(im.rot_grid.size), Eigen::Quaterniond::Identity());
  im.pos_cps.assign(static_cast<size_t>(im.pos_grid.size), Eigen::Vector3d::Zero());

  std::unordered_map<std::int64_t, int> obs_count;
  for (const auto& o : tracks.observations) ++obs_count[o.track_id];
  im.landmarks = tracks.landmarks;
  im.rho.assign(im.landmarks.size(), config.initial_inverse_depth);
  for (size_t i = 0; i < im.landmarks.size(); ++i) {
    const auto& lm = im.landmarks[i];
    const auto it = obs_count.find(lm.track_id);
    if (it == obs_count.end() || it->second < 2) {
      std::ostringstream os;
      os << "track " << lm.track_id << " has fewer than two observations";
      throw BuildError(os.str());
    }
    if (!im.landmark_index.emplace(lm.track_id, static_cast<int>(i)).second) {
      std::ostringstream os;
      os << "duplicate landmark for track " << lm.track_id;
      throw BuildError(os.str());
    }
  }
  for (const auto& o : tracks.observations) {
    if (im.landmark_index.find(o.track_id) == im.landmark_index.end()) {
      std::ostringstream os;
      os << "observation references track " << o.track_id << " which has no landmark";
      throw BuildError(os.str());
    }
  }

  auto* quat_par = new ceres::EigenQuaternionParameterization;
  for (int j = 0; j < im.rot_grid.size; ++j) im.problem.AddParameterBlock(im.rot_block(j), 4, quat_par);
  for (int j = 0; j < im.pos_grid.size; ++j) im.problem.AddParameterBlock(im.pos_block(j), 3);
  im.problem.AddParameterBlock(im.gyro_bias.data(), 3);
  im.problem.AddParameterBlock(im.accel_bias.data(), 3);
  for (auto& r : im.rho) {
    im.problem.AddParameterBlock(&r, 1);
    im.problem.SetParameterLowerBound(&r, 0, 0.0);
  }

  // Gauge: anchoring removes the global rigid transform and the yaw about
  // gravity. Control point 0 only supports times before the first
  // measurement, so anchoring it alone would leave all data-coupled blocks
  // free to drift; control point 1 is the first measurement-coupled block
  // and is pinned at its cold-start value too.
  im.problem.SetParameterBlockConstant(im.rot_block(0));
  im.problem.SetParameterBlockConstant(im.rot_block(1));
  im.problem.SetParameterBlockConstant(im.pos_block(0));
  im.problem.SetParameterBlockConstant(im.pos_block(1));
  if (!config.estimate_biases) {
    im.problem.SetParameterBlockConstant(im.gyro_bias.data());
    im.problem.SetParameterBlockConstant(im.accel_bias.data());
  }

  const double sqrt_w_gyro = std::sqrt(plan.gyro.gamma * config.weight_scale_factor);
  const double sqrt_w_accel = std::sqrt(plan.accel.gamma * config.weight_scale_factor);
  for (const auto& s : imu) {
    if (!im.rot_grid.covers(s.t) || !im.pos_grid.covers(s.t)) {
      std::ostringstream os;
      os << "IMU sample at t=" << s.t << " is outside spline coverage";
      throw BuildError(os.str());
    }
    int ir = 0;
    double ur = 0.0;
    im.rot_grid.locate(s.t, ir, ur);

    GyroResidual g;
    g.measured = s.omega;
    splines::cumulative_basis(ur, g.bt);
    splines::cumulative_basis_d1(ur, g.btd);
    g.dt = im.rot_grid.dt;
    g.sqrt_w = sqrt_w_gyro;
    auto* gyro_cost = new ceres::AutoDiffCostFunction<GyroResidual, 3, 4, 4, 4, 4, 3>(new GyroResidual(g));
    im.gyro_blocks.push_back(im.problem.AddResidualBlock(gyro_cost, nullptr, im.rot_block(ir - 1), im.rot_block(ir),
                                                         im.rot_block(ir + 1), im.rot_block(ir + 2),
                                                         im.gyro_bias.data()));

    int ip = 0;
    double up = 0.0;
    im.pos_grid.locate(s.t, ip, up);
    AccelResidual a;
    a.measured = s.accel;
    a.gravity = config.gravity;
    splines::cumulative_basis(ur, a.bt);
    double b2[4];
    splines::cubic_basis_d2(up, b2);
    for (int m = 0; m < 4; ++m) a.b2[m] = b2[m] / (im.pos_grid.dt * im.pos_grid.dt);
    a.sqrt_w = sqrt_w_accel;
    auto* accel_cost =
        new ceres::AutoDiffCostFunction<AccelResidual, 3, 4, 4, 4, 4, 3, 3, 3, 3, 3>(new AccelResidual(a));
    im.accel_blocks.push_back(im.problem.AddResidualBlock(
        accel_cost, nullptr, im.rot_block(ir - 1), im.rot_block(ir), im.rot_block(ir + 1), im.rot_block(ir + 2),
        im.pos_block(ip - 1), im.pos_block(ip), im.pos_block(ip + 1), im.pos_block(ip + 2), im.accel_bias.data()));
  }

  auto* loss = new ceres::HuberLoss(config.huber_c);
  for (size_t i = 0; i < tracks.observations.size(); ++i) {
    const auto& o = tracks.observations[i];
    const int li = im.landmark_index.at(o.track_id);
    const auto& lm = im.landmarks[static_cast<size_t>(li)];
    // The reference observing itself reprojects through the identity
    // transform: the residual is identically zero and carries no
    // information, so the block is skipped.
    if (o.frame_index == lm.reference.frame_index) continue;

    const double t_obs = obs_time[i];
    const double t_ref = sensors::observation_time(lm.reference.frame_start_time, lm.reference.pixel.y(), camera);
    if (!im.rot_grid.covers(t_obs) || !im.pos_grid.covers(t_obs) || !im.rot_grid.covers(t_ref) ||
        !im.pos_grid.covers(t_ref)) {
      std::ostringstream os;
      os << "observation of track " << o.track_id << " is outside spline coverage";
      throw BuildError(os.str());
    }

    auto* f = new ReprojResidual;
    f->measured = o.pixel;
    f->ray = sensors::backproject_ray(lm.reference.pixel, camera);
    f->fx = camera.fx;
    f->fy = camera.fy;
    f->cx = camera.cx;
    f->cy = camera.cy;

    int ir_obs = 0, ir_ref = 0, ip_obs = 0, ip_ref = 0;
    double u = 0.0;
    im.rot_grid.locate(t_obs, ir_obs, u);
    splines::cumulative_basis(u, f->bt_obs);
    im.rot_grid.locate(t_ref, ir_ref, u);
    splines::cumulative_basis(u, f->bt_ref);
    im.pos_grid.locate(t_obs, ip_obs, u);
    splines::cubic_basis(u, f->b_obs);
    im.pos_grid.locate(t_ref, ip_ref, u);
    splines::cubic_basis(u, f->b_ref);

    std::vector<double*> blocks;
    std::vector<int> sizes;
    const auto slot_of = [&blocks, &sizes](double* ptr, int size) {
      for (size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k] == ptr) return static_cast<int>(k);
      }
      blocks.push_back(ptr);
      sizes.push_back(size);
      return static_cast<int>(blocks.size()) - 1;
    };
    for (int m = 0; m < 4; ++m) f->rot_obs[m] = slot_of(im.rot_block(ir_obs - 1 + m), 4);
    for (int m = 0; m < 4; ++m) f->rot_ref[m] = slot_of(im.rot_block(ir_ref - 1 + m), 4);
    for (int m = 0; m < 4; ++m) f->pos_obs[m] = slot_of(im.pos_block(ip_obs - 1 + m), 3);
    for (int m = 0; m < 4; ++m) f->pos_ref[m] = slot_of(im.pos_block(ip_ref - 1 + m), 3);
    f->rho_slot = slot_of(&im.rho[static_cast<size_t>(li)], 1);

    auto* cost = new ceres::DynamicAutoDiffCostFunction<ReprojResidual, 4>(f);
    for (const int size : sizes) cost->AddParameterBlock(size);
    cost->SetNumResiduals(2);
    im.vision_blocks.push_back(im.problem.AddResidualBlock(cost, loss, blocks));
    im.vision_meta.push_back(VisionMeta{li, o.pixel, t_obs, t_ref});
  }

  if (im.vision_blocks.empty()) {
    throw BuildError("every observation is a reference self-observation; nothing constrains the landmarks");
  }
  return fp;
}

FusionResult optimize(FusionProblem& problem, const FusionConfig& config) {
  init_logging();
  FusionProblem::Impl& im = problem.impl();

  {
    ceres::Problem::EvaluateOptions eo;
    eo.apply_loss_function = true;
    eo.num_threads = 1;
    double c = 0.0;
    const bool ok = im.problem.Evaluate(eo, &c, nullptr, nullptr, nullptr);
    if (!ok || !std::isfinite(c)) {
      throw SolverError("initial cost is not finite: " + first_bad_block(im));
    }
  }

  ceres::Solver::Options opt;
  opt.linear_solver_type = ceres::SPARSE_NORMAL_CHOLESKY;
  opt.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
  opt.max_num_iterations = config.max_iterations;
  opt.function_tolerance = config.function_tolerance;
  opt.gradient_tolerance = config.gradient_tolerance;
  opt.num_threads = 1;
  opt.minimizer_progress_to_stdout = false;
  opt.logging_type = ceres::SILENT;

  ceres::Solver::Summary summary;
  ceres::Solve(opt, &im.problem, &summary);

  FusionResult res;
  res.plan = im.plan;
  res.trajectory.rotation = splines::SplineSO3(im.rot_grid.dt, im.rot_grid.t0, im.rot_cps);
  res.trajectory.position = splines::Spline3d(im.pos_grid.dt, im.pos_grid.t0, im.pos_cps);
  res.landmarks = im.landmarks;
  for (size_t i = 0; i < im.rho.size(); ++i) res.landmarks[i].inverse_depth = im.rho[i];
  res.biases.gyro = im.gyro_bias;
  res.biases.accel = im.accel_bias;

  FusionReport& rep = res.report;
  rep.initial_cost = summary.initial_cost;
  rep.final_cost = summary.final_cost;
  rep.iterations = std::max(0, static_cast<int>(summary.iterations.size()) - 1);
  rep.termination = ceres::TerminationTypeToString(summary.termination_type);
  rep.n_imu = static_cast<int>(im.imu.size());

  // Post-fit statistics go through the public prediction operators, an
  // independent path from the solver's residual functors.
  const double sqrt_w_gyro = std::sqrt(im.plan.gyro.gamma * im.config.weight_scale_factor);
  const double sqrt_w_accel = std::sqrt(im.plan.accel.gamma * im.config.weight_scale_factor);
  const double n = static_cast<double>(im.imu.size());
  Eigen::Vector3d gyro_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_mean = Eigen::Vector3d::Zero();
  for (const auto& s : im.imu) {
    gyro_mean += s.omega;
    accel_mean += s.accel;
  }
  gyro_mean /= n;
  accel_mean /= n;

  double ss_res_gyro = 0.0, ss_sig_gyro = 0.0, ss_res_accel = 0.0, ss_sig_accel = 0.0;
  res.gyro_weighted_residuals.reserve(3 * im.imu.size());
  res.accel_weighted_residuals.reserve(3 * im.imu.size());
  for (const auto& s : im.imu) {
    const Eigen::Vector3d rg = s.omega - sensors::predict_gyro(res.trajectory, s.t, res.biases);
    const Eigen::Vector3d ra = s.accel - sensors::predict_accel(res.trajectory, s.t, res.biases, im.config.gravity);
    ss_res_gyro += rg.squaredNorm();
    ss_sig_gyro += (s.omega - gyro_mean).squaredNorm();
    ss_res_accel += ra.squaredNorm();
    ss_sig_accel += (s.accel - accel_mean).squaredNorm();
    for (int a = 0; a < 3; ++a) {
      res.gyro_weighted_residuals.push_back(sqrt_w_gyro * rg[a]);
      res.accel_weighted_residuals.push_back(sqrt_w_accel * ra[a]);
    }
  }
  rep.q_out_gyro = ss_sig_gyro > 0.0 ? 1.0 - ss_res_gyro / ss_sig_gyro : 0.0;
  rep.q_out_accel = ss_sig_accel > 0.0 ? 1.0 - ss_res_accel / ss_sig_accel : 0.0;

  const auto moments = [](const std::vector<double>& v, double& mean, double& std_out) {
    mean = 0.0;
    for (const double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    std_out = std::sqrt(ss / static_cast<double>(v.size()));
  };
  moments(res.gyro_weighted_residuals, rep.gyro_weighted_mean, rep.gyro_weighted_std);
  moments(res.accel_weighted_residuals, rep.accel_weighted_mean, rep.accel_weighted_std);

  double ss_pix = 0.0;
  int n_pix = 0;
  for (const auto& meta : im.vision_meta) {
    const auto& lm = res.landmarks[static_cast<size_t>(meta.landmark)];
    sensors::Pose ref_pose{res.trajectory.rotation.eval_quat(meta.t_ref), res.trajectory.position.eval(meta.t_ref)};
    sensors::Pose obs_pose{res.trajectory.rotation.eval_quat(meta.t_obs), res.trajectory.position.eval(meta.t_obs)};
    try {
      const Eigen::Vector2d pix =
          sensors::reproject(lm.reference, lm.inverse_depth, ref_pose, obs_pose, im.camera);
      ss_pix += (meta.pixel - pix).squaredNorm();
      ++n_pix;
    } catch (const CheiralityError&) {
      // converged behind the camera for this block: excluded from the RMS
    }
  }
  rep.n_reprojection = n_pix;
  rep.reprojection_rms = n_pix > 0 ? std::sqrt(ss_pix / (2.0 * static_cast<double>(n_pix))) : 0.0;
  return res;
}

FusionResult fuse(const sensors::TrackSet& tracks, const sensors::ImuLog& imu, const sensors::CameraModel& camera,
                  const FusionConfig& config) {
  const auto plan = make_weight_plan(imu, config);
  auto problem = build_problem(tracks, imu, camera, plan, config);
  return optimize(problem, config);
}

double endpoint_error(const splines::Trajectory& trajectory, double t0, double t_end) {
  return (trajectory.position.eval(t0) - trajectory.position.eval(t_end)).norm();
}

double scale_error(double estimated_length, double true_length) {
  return std::abs(true_length - estimated_length) / true_length;
}

double endpoint_distortion(const splines::Trajectory& dropout, const splines::Trajectory& full, double t_end) {
  return (dropout.position.eval(t_end) - full.position.eval(t_end)).norm();
}

double landmark_scale_ratio(const std::vector<sensors::Landmark>& landmarks, const splines::Trajectory& trajectory,
                            const sensors::CameraModel& camera, const std::vector<Eigen::Vector3d>& true_points) {
  std::vector<Eigen::Vector3d> est, tru;
  for (const auto& lm : landmarks) {
    if (lm.inverse_depth <= 1e-9) continue;
    if (lm.track_id < 0 || lm.track_id >= static_cast<std::int64_t>(true_points.size())) continue;
    const double t_ref = sensors::observation_time(lm.reference.frame_start_time, lm.reference.pixel.y(), camera);
    if (!trajectory.contains(t_ref)) continue;
    const Eigen::Vector3d cam_pt = sensors::backproject_ray(lm.reference.pixel, camera) / lm.inverse_depth;
    est.push_back(trajectory.rotation.eval_quat(t_ref) * cam_pt + trajectory.position.eval(t_ref));
    tru.push_back(true_points[static_cast<size_t>(lm.track_id)]);
  }
  std::vector<double> ratios;
  for (size_t i = 0; i < est.size(); ++i) {
    for (size_t j = i + 1; j < est.size(); ++j) {
      const double d_true = (tru[i] - tru[j]).norm();
      if (d_true > 1e-9) ratios.push_back((est[i] - est[j]).norm() / d_true);
    }
  }
  if (ratios.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(ratios.begin(), ratios.end());
  const size_t m = ratios.size() / 2;
  return ratios.size() % 2 == 1 ? ratios[m] : 0.5 * (ratios[m - 1] + ratios[m]);
}

}  // namespace sew::fusion
