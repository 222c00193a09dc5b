// Command line surface: IMU log analysis, experiment reproduction, fusion
// runs. Exit codes are a stable contract for harnesses:
//   0 success, 2 input error, 3 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sew/errors.hpp"
#include "sew/experiments.hpp"
#include "sew/fusion.hpp"
#include "sew/io.hpp"
#include "sew/sew.hpp"
#include "sew/simulate.hpp"
#include "sew/spectral.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

namespace fs = std::filesystem;
using namespace sew;

// Row-level CSV errors do not carry the file name; prepend it so a command
// reading several files stays unambiguous.
template <typename F>
auto load_step(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const io::ParseError& e) {
    if (std::string(e.what()).find(path) != std::string::npos) throw;
    throw io::ParseError("'" + path + "': " + e.what(), e.line);
  }
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

// Robust noise std from first differences: on a smooth signal the
// sample-to-sample change is dominated by measurement noise, so
// 1.4826 * median|x[i+1] - x[i]| / sqrt(2) approximates sigma_n. Heuristic:
// motion energy near the Nyquist frequency inflates the estimate.
double estimate_noise_std(const sensors::ImuLog& imu, bool use_gyro) {
  std::vector<double> diffs;
  diffs.reserve(3 * imu.size());
  for (std::size_t i = 1; i < imu.size(); ++i) {
    const Eigen::Vector3d d = use_gyro ? Eigen::Vector3d(imu[i].omega - imu[i - 1].omega)
                                       : Eigen::Vector3d(imu[i].accel - imu[i - 1].accel);
    for (int a = 0; a < 3; ++a) diffs.push_back(std::abs(d[a]));
  }
  if (diffs.empty()) throw BuildError("noise estimation needs at least two IMU samples");
  auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return 1.4826 * *mid / std::sqrt(2.0);
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeOptions {
  std::string imu_path;
  std::string out_path;
  double quality_gyro = 0.99;
  double quality_accel = 0.97;
  double sigma_gyro = 0.0;
  double sigma_accel = 0.0;
  double dt_max = 0.5;
  bool estimate_sigma = false;
};

int run_analyze(const AnalyzeOptions& opt) {
  const auto imu = load_step(opt.imu_path, [&] { return io::load_imu_csv(opt.imu_path); });
  if (imu.size() < 4) throw BuildError("IMU log too short to plan weights");
  if (!opt.estimate_sigma && (!(opt.sigma_gyro > 0.0) || !(opt.sigma_accel > 0.0)))
    throw std::invalid_argument(
        "noise stds are required: pass --sigma-gyro and --sigma-accel, or --estimate-sigma");

  io::AnalysisOutput doc;
  double sigma_gyro = opt.sigma_gyro;
  double sigma_accel = opt.sigma_accel;
  if (opt.estimate_sigma) {
    sigma_gyro = estimate_noise_std(imu, true);
    sigma_accel = estimate_noise_std(imu, false);
    doc.warnings.push_back("noise stds estimated from first differences (heuristic): gyro " +
                           format_value(sigma_gyro) + " rad/s, accel " + format_value(sigma_accel) +
                           " m/s^2");
  }

  // Same spectrum convention as the fusion planner: uniform rate recovered
  // from the log span, per-modality magnitude spectra with DC removed.
  const double span = imu.back().t - imu.front().t;
  const double rate = static_cast<double>(imu.size() - 1) / span;
  std::vector<Eigen::Vector3d> gyro(imu.size()), accel(imu.size());
  for (std::size_t i = 0; i < imu.size(); ++i) {
    gyro[i] = imu[i].omega;
    accel[i] = imu[i].accel;
  }
  const auto gyro_spectrum = spectral::vector_spectrum(gyro, rate);
  const auto accel_spectrum = spectral::vector_spectrum(accel, rate);

  const auto plan = weighting::weights_from_quality(gyro_spectrum, accel_spectrum, opt.quality_gyro,
                                                    opt.quality_accel, sigma_gyro, sigma_accel, opt.dt_max);
  if (plan.saturated_gyro)
    doc.warnings.push_back("gyro quality " + format_value(opt.quality_gyro) +
                           " is unreachable; knot spacing pinned at the floor " +
                           format_value(plan.dt_so3) + " s");
  if (plan.saturated_accel)
    doc.warnings.push_back("accel quality " + format_value(opt.quality_accel) +
                           " is unreachable; knot spacing pinned at the floor " +
                           format_value(plan.dt_r3) + " s");

  doc.requested_quality_gyro = plan.requested_quality_gyro;
  doc.requested_quality_accel = plan.requested_quality_accel;
  doc.dt_so3 = plan.dt_so3;
  doc.dt_r3 = plan.dt_r3;
  doc.gyro = plan.gyro;
  doc.accel = plan.accel;
  doc.saturated_gyro = plan.saturated_gyro;
  doc.saturated_accel = plan.saturated_accel;
  doc.spectrum_size = gyro_spectrum.size();
  doc.sample_rate = rate;
  doc.energy_gyro = spectral::energy(gyro_spectrum);
  doc.energy_accel = spectral::energy(accel_spectrum);

  for (const auto& w : doc.warnings) std::cerr << "warning: " << w << "\n";
  io::save_analysis(opt.out_path, doc);
  return kExitOk;
}

// --- experiment ------------------------------------------------------------

struct ExperimentOptions {
  std::string name;
  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_experiment(const ExperimentOptions& opt) {
  const bool has_scenario = !opt.scenario_path.empty();
  if (opt.name == "fig2") {
    if (has_scenario)
      throw std::invalid_argument("fig2 sweeps a scalar test signal and takes no --scenario");
    experiments::Fig2Config config;
    if (opt.seed_given) config.seed = opt.seed;
    io::save_fig2(opt.out_dir, experiments::run_fig2(config));
    return kExitOk;
  }

  sim::ScenarioConfig scenario;
  if (has_scenario) {
    scenario = load_step(opt.scenario_path, [&] { return io::load_scenario(opt.scenario_path); });
    if (opt.seed_given) scenario.seed = opt.seed;
  }

  if (opt.name == "quality") {
    const std::vector<double> q_hats = {0.90, 0.95, 0.97, 0.99, 0.995};
    if (has_scenario) {
      io::save_quality(opt.out_dir, experiments::run_quality(scenario, q_hats));
    } else {
      const std::vector<std::uint64_t> seeds =
          opt.seed_given ? std::vector<std::uint64_t>{opt.seed} : std::vector<std::uint64_t>{1, 2, 3, 4, 5};
      io::save_quality(opt.out_dir, experiments::run_quality(q_hats, seeds));
    }
    return kExitOk;
  }
  if (opt.name == "weights") {
    const std::vector<double> factors = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};
    const auto summary = has_scenario
                             ? experiments::run_weights(scenario, factors)
                             : experiments::run_weights(opt.seed_given ? opt.seed : 1, factors);
    io::save_weights(opt.out_dir, summary);
    return kExitOk;
  }
  if (opt.name == "dropout") {
    const std::vector<double> dropouts = {0.0, 0.5, 1.0, 2.0, 4.0};
    const auto summary = has_scenario
                             ? experiments::run_dropout(scenario, dropouts)
                             : experiments::run_dropout(opt.seed_given ? opt.seed : 1, dropouts);
    io::save_dropout(opt.out_dir, summary);
    return kExitOk;
  }

  std::cerr << "unknown experiment '" << opt.name << "': valid names are fig2, quality, weights, dropout\n";
  return kExitInput;
}

// --- fuse --------------------------------------------------------------------

struct FuseOptions {
  std::string scenario_path;
  std::string imu_path;
  std::string tracks_path;
  std::string camera_path;
  std::string config_path;
  std::string out_dir;
  double quality_gyro = 0.0;
  double quality_accel = 0.0;
  double sigma_gyro = 0.0;
  double sigma_accel = 0.0;
  double dt_max = 0.0;
  double weight_scale = 0.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double rate = 100.0;
  bool estimate_sigma = false;
  bool closed_loop = false;

  bool has(const char* flag) const {
    return std::find(given.begin(), given.end(), std::string(flag)) != given.end();
  }
  std::vector<std::string> given;  // flag names seen on the command line
};

int run_fuse(const FuseOptions& opt) {
  const bool scenario_mode = !opt.scenario_path.empty();
  if (scenario_mode && (!opt.imu_path.empty() || !opt.tracks_path.empty() || !opt.camera_path.empty()))
    throw std::invalid_argument("--scenario replaces --imu/--tracks/--camera; pass one or the other");
  if (!scenario_mode && (opt.imu_path.empty() || opt.tracks_path.empty() || opt.camera_path.empty()))
    throw std::invalid_argument("fuse needs either --scenario, or all of --imu, --tracks and --camera");
  if (scenario_mode && opt.estimate_sigma)
    throw std::invalid_argument("--estimate-sigma applies to recorded logs; scenarios carry their noise stds");
  if (!(opt.rate > 0.0)) throw std::invalid_argument("--rate must be positive");
  if (opt.dropout < 0.0) throw std::invalid_argument("--dropout must be nonnegative");

  // Assemble inputs.
  sim::ScenarioConfig scenario;
  sim::GroundTruth truth;
  sensors::ImuLog imu;
  sensors::TrackSet tracks;
  sensors::CameraModel camera;
  if (scenario_mode) {
    scenario = load_step(opt.scenario_path, [&] { return io::load_scenario(opt.scenario_path); });
    if (opt.seed_given) scenario.seed = opt.seed;
    truth = sim::generate_trajectory(scenario);
    imu = sim::generate_imu(truth, scenario);
    tracks = sim::generate_observations(truth, scenario);
    camera = scenario.camera;
  } else {
    imu = load_step(opt.imu_path, [&] { return io::load_imu_csv(opt.imu_path); });
    camera = load_step(opt.camera_path, [&] { return io::load_camera(opt.camera_path); });
    if (!(camera.fx > 0.0) || !(camera.fy > 0.0) || !(camera.image_width > 0.0) ||
        !(camera.image_height > 0.0) || !(camera.frame_period > 0.0))
      throw std::invalid_argument("camera needs positive fx, fy, image size and frame_period");
    tracks = load_step(opt.tracks_path, [&] { return io::load_tracks_csv(opt.tracks_path, camera); });
  }

  // Configuration: explicit file beats scenario defaults, flags beat both.
  fusion::FusionConfig fc;
  if (!opt.config_path.empty())
    fc = load_step(opt.config_path, [&] { return io::load_fusion_config(opt.config_path); });
  else if (scenario_mode)
    fc = experiments::fusion_config_for(scenario);
  if (opt.has("--quality-gyro")) fc.quality_gyro = opt.quality_gyro;
  if (opt.has("--quality-accel")) fc.quality_accel = opt.quality_accel;
  if (opt.has("--sigma-gyro")) fc.sigma_gyro = opt.sigma_gyro;
  if (opt.has("--sigma-accel")) fc.sigma_accel = opt.sigma_accel;
  if (opt.has("--dt-max")) fc.dt_max = opt.dt_max;
  if (opt.has("--weight-scale")) fc.weight_scale_factor = opt.weight_scale;
  if (opt.estimate_sigma) {
    fc.sigma_gyro = estimate_noise_std(imu, true);
    fc.sigma_accel = estimate_noise_std(imu, false);
    std::cerr << "warning: noise stds estimated from first differences (heuristic): gyro "
              << format_value(fc.sigma_gyro) << " rad/s, accel " << format_value(fc.sigma_accel)
              << " m/s^2\n";
  }
  if (!scenario_mode && !opt.estimate_sigma && (!(fc.sigma_gyro > 0.0) || !(fc.sigma_accel > 0.0)))
    throw std::invalid_argument(
        "noise stds are required: pass --sigma-gyro and --sigma-accel, a config that sets them, or "
        "--estimate-sigma");

  const double t_end = scenario_mode ? scenario.duration : imu.back().t;
  const bool closed_loop = scenario_mode ? scenario.closed_loop : opt.closed_loop;

  // Solve. With a dropout the full solve is kept as the reference for the
  // endpoint distortion; outputs describe the dropout run.
  fusion::FusionResult result = fusion::fuse(tracks, imu, camera, fc);
  io::FusionMetrics metrics;
  if (opt.dropout > 0.0) {
    const auto dropped = sim::apply_dropout(tracks, opt.dropout, t_end);
    fusion::FusionResult degraded = fusion::fuse(dropped, imu, camera, fc);
    metrics.epd = fusion::endpoint_distortion(degraded.trajectory, result.trajectory, t_end);
    result = std::move(degraded);
  }

  metrics.report = result.report;
  metrics.dt_so3 = result.plan.dt_so3;
  metrics.dt_r3 = result.plan.dt_r3;
  metrics.gamma_gyro = result.plan.gyro.gamma;
  metrics.gamma_accel = result.plan.accel.gamma;
  if (closed_loop) metrics.epe = fusion::endpoint_error(result.trajectory, imu.front().t, t_end);
  if (scenario_mode) {
    const double ratio =
        fusion::landmark_scale_ratio(result.landmarks, result.trajectory, camera, truth.landmarks);
    metrics.scale_error = std::abs(1.0 - ratio);
  }

  io::save_trajectory_csv(join(opt.out_dir, "trajectory.csv"), result.trajectory, opt.rate);
  io::save_metrics(join(opt.out_dir, "metrics.json"), metrics);
  io::save_residual_histogram(join(opt.out_dir, "residuals.csv"), result.gyro_weighted_residuals,
                              result.accel_weighted_residuals);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spline error weighting: spectral knot selection, statistically balanced "
               "visual-inertial fusion, and synthetic experiment reproduction"};
  app.require_subcommand(1);

  AnalyzeOptions aopt;
  auto* analyze = app.add_subcommand(
      "analyze", "Select knot spacings and IMU weights for a requested quality from an IMU log");
  analyze->add_option("--imu", aopt.imu_path, "IMU CSV (t,gx,gy,gz,ax,ay,az)")->required();
  analyze->add_option("--out", aopt.out_path, "output JSON document")->required();
  analyze->add_option("--quality-gyro", aopt.quality_gyro, "requested gyro quality in (0,1]");
  analyze->add_option("--quality-accel", aopt.quality_accel, "requested accel quality in (0,1]");
  analyze->add_option("--sigma-gyro", aopt.sigma_gyro, "gyro noise std, rad/s");
  analyze->add_option("--sigma-accel", aopt.sigma_accel, "accel noise std, m/s^2");
  analyze->add_option("--dt-max", aopt.dt_max, "largest allowed knot spacing, s");
  analyze->add_flag("--estimate-sigma", aopt.estimate_sigma,
                    "estimate noise stds from first differences (heuristic)");

  ExperimentOptions eopt;
  auto* experiment =
      app.add_subcommand("experiment", "Reproduce a synthetic experiment: fig2, quality, weights, dropout");
  experiment->add_option("name", eopt.name, "experiment name")->required();
  experiment->add_option("--scenario", eopt.scenario_path, "scenario JSON overriding the built-in preset");
  experiment->add_option("--out", eopt.out_dir, "output directory")->required();
  auto* eseed = experiment->add_option("--seed", eopt.seed, "override the preset seed");

  FuseOptions fopt;
  auto* fuse = app.add_subcommand("fuse", "Estimate a trajectory from visual tracks and an IMU log");
  fuse->add_option("--scenario", fopt.scenario_path, "scenario JSON to simulate and solve");
  fuse->add_option("--imu", fopt.imu_path, "IMU CSV (t,gx,gy,gz,ax,ay,az)");
  fuse->add_option("--tracks", fopt.tracks_path, "tracks CSV (track_id,frame,u,v,frame_time)");
  fuse->add_option("--camera", fopt.camera_path, "camera JSON");
  fuse->add_option("--config", fopt.config_path, "fusion config JSON");
  fuse->add_option("--out", fopt.out_dir, "output directory")->required();
  fuse->add_option("--quality-gyro", fopt.quality_gyro, "requested gyro quality in (0,1]");
  fuse->add_option("--quality-accel", fopt.quality_accel, "requested accel quality in (0,1]");
  fuse->add_option("--sigma-gyro", fopt.sigma_gyro, "gyro noise std, rad/s");
  fuse->add_option("--sigma-accel", fopt.sigma_accel, "accel noise std, m/s^2");
  fuse->add_option("--dt-max", fopt.dt_max, "largest allowed knot spacing, s");
  fuse->add_option("--weight-scale", fopt.weight_scale, "multiplier on both IMU weights");
  fuse->add_option("--dropout", fopt.dropout, "drop visual observations in the trailing window, s");
  auto* fseed = fuse->add_option("--seed", fopt.seed, "override the scenario seed");
  fuse->add_option("--rate", fopt.rate, "trajectory output sample rate, Hz");
  fuse->add_flag("--estimate-sigma", fopt.estimate_sigma,
                 "estimate noise stds from first differences (heuristic)");
  fuse->add_flag("--closed-loop", fopt.closed_loop,
                 "recorded log returns to its start; report the endpoint error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }
  eopt.seed_given = eseed->count() > 0;
  fopt.seed_given = fseed->count() > 0;
  for (const char* flag : {"--quality-gyro", "--quality-accel", "--sigma-gyro", "--sigma-accel",
                           "--dt-max", "--weight-scale"})
    if (fuse->count(flag) > 0) fopt.given.push_back(flag);

  try {
    if (analyze->parsed()) return run_analyze(aopt);
    if (experiment->parsed()) return run_experiment(eopt);
    return run_fuse(fopt);
  } catch (const io::ParseError& e) {
    std::cerr << "input error: " << e.what();
    if (e.line > 0) std::cerr << " (line " << e.line << ")";
    std::cerr << "\n";
    return kExitInput;
  } catch (const BuildError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
