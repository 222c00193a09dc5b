#include "sew/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "sew/spline_math.hpp"

namespace sew::sim {
namespace {

// Distinct RNG streams per purpose so changing one knob (e.g. outlier rate)
// cannot shift unrelated draws. Streams of adjacent scenario seeds never
// collide because the base advances in steps of 16.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return seed * 16u + stream; }
constexpr std::uint64_t kStreamRotX = 1, kStreamRotY = 2, kStreamRotZ = 3;
constexpr std::uint64_t kStreamPosX = 4, kStreamPosY = 5, kStreamPosZ = 6;
constexpr std::uint64_t kStreamImu = 7, kStreamLandmarks = 8, kStreamPixels = 9;

void validate(const ScenarioConfig& config) {
  if (!(config.duration >= 2.0)) throw std::invalid_argument("scenario duration must be at least 2 s");
  if (!(config.imu_rate > 0.0) || !(config.frame_rate > 0.0))
    throw std::invalid_argument("scenario rates must be positive");
  if (!(config.camera.fx > 0.0) || !(config.camera.fy > 0.0))
    throw std::invalid_argument("camera focal lengths must be positive");
  if (config.camera.readout_time < 0.0 || config.camera.readout_time >= config.camera.frame_period)
    throw std::invalid_argument("readout time must lie in [0, frame_period)");
}

double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * (3.0 - 2.0 * s);
}

}  // namespace

double Rng::uniform() {
  // 53 uniform mantissa bits; exact across platforms.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller without caching the second variate, for a reproducible stream.
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * uniform();
  return r * std::cos(theta);
}

Eigen::Vector3d Rng::normal3() {
  const double x = normal();
  const double y = normal();
  const double z = normal();
  return {x, y, z};
}

spectral::UniformSignal generate_test_signal(std::uint64_t seed, double duration, double sample_rate,
                                             const BandPlan& plan) {
  if (!(duration > 0.0) || !(sample_rate > 0.0))
    throw std::invalid_argument("test signal needs positive duration and sample rate");
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  if (n < 4) throw std::invalid_argument("test signal too short");

  spectral::Spectrum spec;
  spec.sample_rate = sample_rate;
  spec.bins.assign(n, {0.0, 0.0});

  Rng rng(seed);
  const double bin_hz = sample_rate / static_cast<double>(n);
  for (const Band& band : plan) {
    // Bins strictly inside (0, fs/2); the self-conjugate Nyquist bin is left
    // empty so the mirrored spectrum stays exactly Hermitian.
    std::size_t lo = static_cast<std::size_t>(std::ceil(band.f_lo / bin_hz - 1e-12));
    lo = std::max<std::size_t>(lo, 1);
    std::size_t hi = n / 2;  // exclusive
    for (std::size_t k = lo; k < hi; ++k) {
      if (static_cast<double>(k) * bin_hz >= band.f_hi) {
        hi = k;
        break;
      }
    }
    if (lo >= hi) continue;
    const auto n_inc = static_cast<double>(hi - lo);
    const double sigma_b = band.amplitude * std::sqrt(static_cast<double>(n) / (2.0 * n_inc));
    for (std::size_t k = lo; k < hi; ++k) {
      const double g1 = rng.normal();
      const double g2 = rng.normal();
      const std::complex<double> x = sigma_b / std::sqrt(2.0) * std::complex<double>(g1, g2);
      spec.bins[k] += x;
      spec.bins[n - k] += std::conj(x);
    }
  }

  spectral::UniformSignal out = spectral::idft(spec);
  out.start_time = 0.0;
  return out;
}

GroundTruth generate_trajectory(const ScenarioConfig& config) {
  validate(config);
  const double dt = 4.0 / config.imu_rate;
  const double t0 = -2.0 * dt;
  // Cover every possible measurement time: IMU up to the duration, rolling
  // shutter rows up to one readout beyond the last frame start.
  const double t_max = config.duration + config.camera.readout_time;
  const int n_cps = static_cast<int>(std::ceil(t_max / dt)) + 5;

  const double cp_rate = 1.0 / dt;
  const double cp_span = static_cast<double>(n_cps) * dt;

  std::vector<Eigen::Vector3d> rot_vecs(static_cast<std::size_t>(n_cps), Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> pos_cps(static_cast<std::size_t>(n_cps), Eigen::Vector3d::Zero());
  const std::uint64_t rot_streams[3] = {kStreamRotX, kStreamRotY, kStreamRotZ};
  const std::uint64_t pos_streams[3] = {kStreamPosX, kStreamPosY, kStreamPosZ};
  for (int axis = 0; axis < 3; ++axis) {
    if (!config.rotation_bands.empty()) {
      const auto sig = generate_test_signal(stream_seed(config.seed, rot_streams[axis]), cp_span, cp_rate,
                                            config.rotation_bands);
      for (int j = 0; j < n_cps; ++j) rot_vecs[static_cast<std::size_t>(j)][axis] = sig.samples[static_cast<std::size_t>(j)];
    }
    if (!config.position_bands.empty()) {
      const auto sig = generate_test_signal(stream_seed(config.seed, pos_streams[axis]), cp_span, cp_rate,
                                            config.position_bands);
      for (int j = 0; j < n_cps; ++j) pos_cps[static_cast<std::size_t>(j)][axis] = sig.samples[static_cast<std::size_t>(j)];
    }
  }

  std::vector<Eigen::Quaterniond> rot_cps(static_cast<std::size_t>(n_cps));
  for (int j = 0; j < n_cps; ++j)
    rot_cps[static_cast<std::size_t>(j)] = splines::quat_exp(rot_vecs[static_cast<std::size_t>(j)].eval());

  GroundTruth truth;
  truth.biases = config.biases;
  truth.duration = config.duration;
  truth.trajectory.rotation = splines::SplineSO3(dt, t0, std::move(rot_cps));
  truth.trajectory.position = splines::Spline3d(dt, t0, std::move(pos_cps));

  if (config.closed_loop) {
    // Blend the control lattice so the state at t = duration equals t = 0.
    // The ramp reaches 1 at knot time duration - 3 dt, so every control
    // point supporting t = duration carries the full correction and the
    // endpoints match exactly.
    const double ramp_start = 0.15 * config.duration;
    const double ramp_end = config.duration - 3.0 * dt;
    const Eigen::Vector3d pos_gap =
        truth.trajectory.position.eval(0.0) - truth.trajectory.position.eval(config.duration);
    Eigen::Quaterniond rot_gap = truth.trajectory.rotation.eval_quat(0.0) *
                                 truth.trajectory.rotation.eval_quat(config.duration).conjugate();
    if (rot_gap.w() < 0.0) rot_gap.coeffs() *= -1.0;
    const Eigen::Vector3d delta = splines::quat_log(rot_gap);

    auto& pos = truth.trajectory.position.control_points();
    auto& rot = truth.trajectory.rotation.control_rotations();
    for (int j = 0; j < n_cps; ++j) {
      const double tj = t0 + static_cast<double>(j) * dt;
      const double w = smoothstep((tj - ramp_start) / (ramp_end - ramp_start));
      pos[static_cast<std::size_t>(j)] += w * pos_gap;
      rot[static_cast<std::size_t>(j)] =
          splines::quat_exp((w * delta).eval()) * rot[static_cast<std::size_t>(j)];
    }
    truth.trajectory.rotation.normalize_controls();
  }

  // Normalize so control point 1 is (identity, zero): it is the first control
  // point inside the measurement support, and the estimator anchors the gauge
  // there with the same values.
  {
    auto& pos = truth.trajectory.position.control_points();
    auto& rot = truth.trajectory.rotation.control_rotations();
    const Eigen::Vector3d p1 = pos[1];
    const Eigen::Quaterniond q1 = rot[1];
    for (auto& p : pos) p -= p1;
    for (auto& q : rot) q = q1.conjugate() * q;
    truth.trajectory.rotation.normalize_controls();
  }

  // Landmarks: born at a random frame, through a random interior pixel, at a
  // random distance inside the configured shell; visible at birth by
  // construction.
  Rng lm_rng(stream_seed(config.seed, kStreamLandmarks));
  const auto n_frames = static_cast<int>(std::floor(config.duration * config.frame_rate)) + 1;
  const int last_birth = std::max(0, static_cast<int>(0.7 * static_cast<double>(n_frames)) - 1);
  const double margin = 40.0;
  truth.landmarks.reserve(static_cast<std::size_t>(config.n_landmarks));
  for (int k = 0; k < config.n_landmarks; ++k) {
    const int birth = static_cast<int>(lm_rng.uniform(0.0, static_cast<double>(last_birth + 1)));
    const double u = lm_rng.uniform(margin, config.camera.image_width - margin);
    const double v = lm_rng.uniform(margin, config.camera.image_height - margin);
    const double distance = lm_rng.uniform(config.landmark_min_distance, config.landmark_max_distance);
    const double t = static_cast<double>(birth) / config.frame_rate;
    const Eigen::Vector3d ray = sensors::backproject_ray({u, v}, config.camera);
    const Eigen::Quaterniond q = truth.trajectory.rotation.eval_quat(t);
    const Eigen::Vector3d p = truth.trajectory.position.eval(t);
    truth.landmarks.push_back(q * (distance * ray) + p);
  }

  return truth;
}

sensors::ImuLog generate_imu(const GroundTruth& truth, const ScenarioConfig& config) {
  validate(config);
  Rng rng(stream_seed(config.seed, kStreamImu));
  const auto n = static_cast<long>(std::floor(config.duration * config.imu_rate)) + 1;
  sensors::ImuLog log;
  log.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    sensors::ImuSample s;
    s.t = static_cast<double>(i) / config.imu_rate;
    s.omega = sensors::predict_gyro(truth.trajectory, s.t, truth.biases) + config.sigma_gyro * rng.normal3();
    s.accel = sensors::predict_accel(truth.trajectory, s.t, truth.biases, config.gravity) +
              config.sigma_accel * rng.normal3();
    log.push_back(s);
  }
  return log;
}

sensors::TrackSet generate_observations(const GroundTruth& truth, const ScenarioConfig& config) {
  validate(config);
  Rng rng(stream_seed(config.seed, kStreamPixels));
  const auto n_frames = static_cast<int>(std::floor(config.duration * config.frame_rate)) + 1;
  const sensors::CameraModel& cam = config.camera;

  sensors::TrackSet out;
  for (std::size_t k = 0; k < truth.landmarks.size(); ++k) {
    const Eigen::Vector3d& world = truth.landmarks[k];
    std::vector<sensors::Observation> track;

    for (int m = 0; m < n_frames; ++m) {
      const double t_m = static_cast<double>(m) / config.frame_rate;
      // Row appears in its own capture time; fixed-point iteration converges
      // in a few steps because the pose drifts little over one readout.
      double v = cam.image_height / 2.0;
      Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
      bool ok = false;
      for (int it = 0; it < 25; ++it) {
        const double t = t_m + cam.readout_time * v / cam.image_height;
        if (!truth.trajectory.contains(t)) break;
        const Eigen::Quaterniond q = truth.trajectory.rotation.eval_quat(t);
        const Eigen::Vector3d in_cam = q.conjugate() * (world - truth.trajectory.position.eval(t));
        if (in_cam.z() < 0.1) break;
        pixel = sensors::project(in_cam, cam);
        if (!(pixel.x() >= 0.0 && pixel.x() < cam.image_width && pixel.y() >= 0.0 &&
              pixel.y() < cam.image_height))
          break;
        const double v_new = pixel.y();
        const bool converged = std::abs(v_new - v) < 1e-6;
        v = v_new;
        if (converged) {
          ok = true;
          break;
        }
      }
      if (!ok) continue;

      sensors::Observation obs;
      obs.track_id = static_cast<std::int64_t>(k);
      obs.frame_index = m;
      obs.frame_start_time = t_m;
      obs.pixel = pixel;
      if (config.pixel_noise > 0.0) {
        obs.pixel.x() += config.pixel_noise * rng.normal();
        obs.pixel.y() += config.pixel_noise * rng.normal();
      }
      if (config.outlier_rate > 0.0 && rng.uniform() < config.outlier_rate) {
        obs.pixel.x() = rng.uniform(0.0, cam.image_width);
        obs.pixel.y() = rng.uniform(0.0, cam.image_height);
      }
      obs.pixel.x() = std::clamp(obs.pixel.x(), 0.0, cam.image_width - 1e-6);
      obs.pixel.y() = std::clamp(obs.pixel.y(), 0.0, cam.image_height - 1e-6);
      track.push_back(obs);
    }

    if (track.size() < 2) {
      out.dropped_track_ids.push_back(static_cast<std::int64_t>(k));
      continue;
    }
    sensors::Landmark lm;
    lm.track_id = static_cast<std::int64_t>(k);
    lm.reference = track.front();
    lm.inverse_depth = 0.0;  // placeholder; the estimator seeds depths from its config
    out.landmarks.push_back(lm);
    out.observations.insert(out.observations.end(), track.begin(), track.end());
  }
  return out;
}

sensors::TrackSet apply_dropout(const sensors::TrackSet& tracks, double dropout_seconds, double t_end) {
  if (dropout_seconds < 0.0) throw std::invalid_argument("dropout must be nonnegative");
  const double cutoff = t_end - dropout_seconds;

  sensors::TrackSet out;
  for (const auto& obs : tracks.observations)
    if (!(obs.frame_start_time > cutoff)) out.observations.push_back(obs);

  out.dropped_track_ids = tracks.dropped_track_ids;
  for (const auto& lm : tracks.landmarks) {
    long count = 0;
    bool reference_alive = false;
    for (const auto& obs : out.observations) {
      if (obs.track_id != lm.track_id) continue;
      ++count;
      if (obs.frame_index == lm.reference.frame_index) reference_alive = true;
    }
    if (count >= 2 && reference_alive) {
      out.landmarks.push_back(lm);
    } else {
      // Remove the track's leftover observations as well.
      out.observations.erase(std::remove_if(out.observations.begin(), out.observations.end(),
                                            [&](const sensors::Observation& o) { return o.track_id == lm.track_id; }),
                             out.observations.end());
      out.dropped_track_ids.push_back(lm.track_id);
    }
  }
  return out;
}

}  // namespace sew::sim
