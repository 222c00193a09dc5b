#include "sew/io.hpp"

#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sew::io {
namespace {

using nlohmann::json;

// --- low-level text helpers -------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& token, long line) {
  if (token.empty()) throw ParseError("empty numeric field", line);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || errno == ERANGE || !std::isfinite(v))
    throw ParseError("malformed number '" + token + "'", line);
  return v;
}

std::int64_t parse_int(const std::string& token, long line) {
  if (token.empty()) throw ParseError("empty integer field", line);
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(token.c_str(), &end, 10);
  if (end != token.c_str() + token.size() || errno == ERANGE)
    throw ParseError("malformed integer '" + token + "'", line);
  return v;
}

// Reads one line, stripping a trailing carriage return. Returns false at EOF.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "' for reading", 0);
  return in;
}

std::ofstream open_output(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing", 0);
  return out;
}

void expect_header(std::istream& in, const std::string& expected, const std::string& path) {
  std::string line;
  if (!next_line(in, line)) throw ParseError("'" + path + "' is empty, expected header", 1);
  if (line != expected)
    throw ParseError("bad header in '" + path + "': expected '" + expected + "', got '" + line + "'", 1);
}

// --- JSON helpers -------------------------------------------------------------

long line_of_byte_offset(const std::string& path, std::size_t byte) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  long line = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

json load_json(const std::string& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("JSON parse error in '") + path + "': " + e.what(),
                     line_of_byte_offset(path, e.byte));
  }
}

void save_json(const std::string& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
  for (const auto& item : j.items()) {
    if (known.find(item.key()) == known.end())
      throw ParseError("unknown key '" + item.key() + "' in " + what, 0);
  }
}

// Typed readers: wrong JSON types surface as ParseError, not json::exception.
template <typename T>
void read_field(const json& j, const char* key, T& target, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("bad value for '" + std::string(key) + "' in " + what + ": " + e.what(), 0);
  }
}

void read_vec3(const json& j, const char* key, Eigen::Vector3d& target, const std::string& what) {
  std::vector<double> v = {target.x(), target.y(), target.z()};
  read_field(j, key, v, what);
  if (v.size() != 3) throw ParseError("'" + std::string(key) + "' in " + what + " needs 3 numbers", 0);
  target = Eigen::Vector3d(v[0], v[1], v[2]);
}

json vec3_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json bands_json(const sim::BandPlan& plan) {
  json arr = json::array();
  for (const auto& b : plan) arr.push_back(json::array({b.f_lo, b.f_hi, b.amplitude}));
  return arr;
}

sim::BandPlan bands_from_json(const json& arr, const std::string& what) {
  sim::BandPlan plan;
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 3)
      throw ParseError("each band in " + what + " needs [f_lo, f_hi, amplitude]", 0);
    plan.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
  }
  return plan;
}

json prediction_json(const weighting::ResidualPrediction& p) {
  return json{{"sigma_e2", p.sigma_e2}, {"sigma_f2", p.sigma_f2}, {"sigma_r2", p.sigma_r2}, {"gamma", p.gamma}};
}

weighting::ResidualPrediction prediction_from_json(const json& j, const std::string& what) {
  reject_unknown_keys(j, {"sigma_e2", "sigma_f2", "sigma_r2", "gamma"}, what);
  weighting::ResidualPrediction p;
  read_field(j, "sigma_e2", p.sigma_e2, what);
  read_field(j, "sigma_f2", p.sigma_f2, what);
  read_field(j, "sigma_r2", p.sigma_r2, what);
  read_field(j, "gamma", p.gamma, what);
  return p;
}

// Overwrites only the keys present, like every other reader here.
void read_camera(const json& c, sensors::CameraModel& cam, const std::string& what) {
  reject_unknown_keys(
      c, {"fx", "fy", "cx", "cy", "image_width", "image_height", "readout_time", "frame_period"},
      what);
  read_field(c, "fx", cam.fx, what);
  read_field(c, "fy", cam.fy, what);
  read_field(c, "cx", cam.cx, what);
  read_field(c, "cy", cam.cy, what);
  read_field(c, "image_width", cam.image_width, what);
  read_field(c, "image_height", cam.image_height, what);
  read_field(c, "readout_time", cam.readout_time, what);
  read_field(c, "frame_period", cam.frame_period, what);
}

json camera_json(const sensors::CameraModel& cam) {
  return json{{"fx", cam.fx},
              {"fy", cam.fy},
              {"cx", cam.cx},
              {"cy", cam.cy},
              {"image_width", cam.image_width},
              {"image_height", cam.image_height},
              {"readout_time", cam.readout_time},
              {"frame_period", cam.frame_period}};
}

}  // namespace

// --- IMU CSV -----------------------------------------------------------------

sensors::ImuLog load_imu_csv(const std::string& path) {
  auto in = open_input(path);
  expect_header(in, "t,gx,gy,gz,ax,ay,az", path);

  sensors::ImuLog log;
  std::string line;
  long line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError("empty row", line_no);
    const auto fields = split_fields(line);
    if (fields.size() != 7)
      throw ParseError("expected 7 fields, got " + std::to_string(fields.size()), line_no);
    sensors::ImuSample s;
    s.t = parse_double(fields[0], line_no);
    for (int i = 0; i < 3; ++i) s.omega[i] = parse_double(fields[1 + i], line_no);
    for (int i = 0; i < 3; ++i) s.accel[i] = parse_double(fields[4 + i], line_no);
    if (!log.empty() && !(s.t > log.back().t))
      throw ParseError("time is not strictly increasing (" + format_double(log.back().t) + " then " +
                           format_double(s.t) + ")",
                       line_no);
    log.push_back(s);
  }
  if (log.empty()) throw ParseError("'" + path + "' has a header but no samples", line_no);
  return log;
}

void save_imu_csv(const std::string& path, const sensors::ImuLog& log) {
  auto out = open_output(path);
  out << "t,gx,gy,gz,ax,ay,az\n";
  for (const auto& s : log) {
    out << format_double(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.omega[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(s.accel[i]);
    out << '\n';
  }
}

// --- tracks CSV ----------------------------------------------------------------

sensors::TrackSet load_tracks_csv(const std::string& path, const sensors::CameraModel& camera) {
  auto in = open_input(path);
  expect_header(in, "track_id,frame,u,v,frame_time", path);

  sensors::TrackSet set;
  std::map<std::int64_t, std::int64_t> last_frame;  // per finished/open track
  std::int64_t open_track = -1;
  bool any = false;
  std::string line;
  long line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) throw ParseError("empty row", line_no);
    const auto fields = split_fields(line);
    if (fields.size() != 5)
      throw ParseError("expected 5 fields, got " + std::to_string(fields.size()), line_no);

    sensors::Observation obs;
    obs.track_id = parse_int(fields[0], line_no);
    obs.frame_index = parse_int(fields[1], line_no);
    obs.pixel.x() = parse_double(fields[2], line_no);
    obs.pixel.y() = parse_double(fields[3], line_no);
    obs.frame_start_time = parse_double(fields[4], line_no);

    if (obs.pixel.x() < 0.0 || obs.pixel.x() > camera.image_width || obs.pixel.y() < 0.0 ||
        obs.pixel.y() > camera.image_height)
      throw ParseError("pixel outside image bounds", line_no);

    const auto it = last_frame.find(obs.track_id);
    if (it == last_frame.end()) {
      last_frame.emplace(obs.track_id, obs.frame_index);
      open_track = obs.track_id;
      sensors::Landmark lm;
      lm.track_id = obs.track_id;
      lm.reference = obs;
      set.landmarks.push_back(lm);
    } else {
      if (obs.track_id != open_track)
        throw ParseError("rows for track " + std::to_string(obs.track_id) + " are not contiguous",
                         line_no);
      if (obs.frame_index <= it->second)
        throw ParseError("frame index is not strictly increasing within track " +
                             std::to_string(obs.track_id),
                         line_no);
      it->second = obs.frame_index;
    }
    set.observations.push_back(obs);
    any = true;
  }
  if (!any) throw ParseError("'" + path + "' has a header but no observations", line_no);
  return set;
}

void save_tracks_csv(const std::string& path, const sensors::TrackSet& tracks) {
  auto out = open_output(path);
  out << "track_id,frame,u,v,frame_time\n";
  for (const auto& o : tracks.observations) {
    out << o.track_id << ',' << o.frame_index << ',' << format_double(o.pixel.x()) << ','
        << format_double(o.pixel.y()) << ',' << format_double(o.frame_start_time) << '\n';
  }
}

// --- scenario JSON ---------------------------------------------------------------

sim::ScenarioConfig load_scenario(const std::string& path) {
  const json j = load_json(path);
  const std::string what = "scenario '" + path + "'";
  reject_unknown_keys(j,
                      {"seed", "duration", "imu_rate", "frame_rate", "camera", "n_landmarks",
                       "landmark_min_distance", "landmark_max_distance", "pixel_noise", "outlier_rate",
                       "closed_loop", "sigma_gyro", "sigma_accel", "bias_gyro", "bias_accel",
                       "rotation_bands", "position_bands", "gravity"},
                      what);

  sim::ScenarioConfig sc;
  read_field(j, "seed", sc.seed, what);
  read_field(j, "duration", sc.duration, what);
  read_field(j, "imu_rate", sc.imu_rate, what);
  read_field(j, "frame_rate", sc.frame_rate, what);
  if (j.contains("camera")) read_camera(j.at("camera"), sc.camera, what + " camera");
  read_field(j, "n_landmarks", sc.n_landmarks, what);
  read_field(j, "landmark_min_distance", sc.landmark_min_distance, what);
  read_field(j, "landmark_max_distance", sc.landmark_max_distance, what);
  read_field(j, "pixel_noise", sc.pixel_noise, what);
  read_field(j, "outlier_rate", sc.outlier_rate, what);
  read_field(j, "closed_loop", sc.closed_loop, what);
  read_field(j, "sigma_gyro", sc.sigma_gyro, what);
  read_field(j, "sigma_accel", sc.sigma_accel, what);
  read_vec3(j, "bias_gyro", sc.biases.gyro, what);
  read_vec3(j, "bias_accel", sc.biases.accel, what);
  if (j.contains("rotation_bands")) sc.rotation_bands = bands_from_json(j.at("rotation_bands"), what);
  if (j.contains("position_bands")) sc.position_bands = bands_from_json(j.at("position_bands"), what);
  read_vec3(j, "gravity", sc.gravity, what);
  return sc;
}

void save_scenario(const std::string& path, const sim::ScenarioConfig& config) {
  const json j{{"seed", config.seed},
               {"duration", config.duration},
               {"imu_rate", config.imu_rate},
               {"frame_rate", config.frame_rate},
               {"camera", camera_json(config.camera)},
               {"n_landmarks", config.n_landmarks},
               {"landmark_min_distance", config.landmark_min_distance},
               {"landmark_max_distance", config.landmark_max_distance},
               {"pixel_noise", config.pixel_noise},
               {"outlier_rate", config.outlier_rate},
               {"closed_loop", config.closed_loop},
               {"sigma_gyro", config.sigma_gyro},
               {"sigma_accel", config.sigma_accel},
               {"bias_gyro", vec3_json(config.biases.gyro)},
               {"bias_accel", vec3_json(config.biases.accel)},
               {"rotation_bands", bands_json(config.rotation_bands)},
               {"position_bands", bands_json(config.position_bands)},
               {"gravity", vec3_json(config.gravity)}};
  save_json(path, j);
}

// --- camera JSON -------------------------------------------------------------------

sensors::CameraModel load_camera(const std::string& path) {
  const json j = load_json(path);
  sensors::CameraModel cam;
  read_camera(j, cam, "camera '" + path + "'");
  return cam;
}

void save_camera(const std::string& path, const sensors::CameraModel& camera) {
  save_json(path, camera_json(camera));
}

// --- fusion config JSON -----------------------------------------------------------

namespace {

std::string weight_mode_name(fusion::WeightMode mode) {
  return mode == fusion::WeightMode::kSew ? "sew" : "inverse_noise";
}

fusion::WeightMode weight_mode_from_name(const std::string& name) {
  if (name == "sew") return fusion::WeightMode::kSew;
  if (name == "inverse_noise") return fusion::WeightMode::kInverseNoise;
  throw ParseError("unknown weight_mode '" + name + "' (expected sew|inverse_noise)", 0);
}

}  // namespace

fusion::FusionConfig load_fusion_config(const std::string& path) {
  const json j = load_json(path);
  const std::string what = "fusion config '" + path + "'";
  reject_unknown_keys(j,
                      {"quality_gyro", "quality_accel", "sigma_gyro", "sigma_accel", "dt_max", "huber_c",
                       "weight_mode", "fixed_dt_so3", "fixed_dt_r3", "weight_scale_factor",
                       "estimate_biases", "initial_inverse_depth", "max_iterations",
                       "function_tolerance", "gradient_tolerance", "gravity"},
                      what);

  fusion::FusionConfig fc;
  read_field(j, "quality_gyro", fc.quality_gyro, what);
  read_field(j, "quality_accel", fc.quality_accel, what);
  read_field(j, "sigma_gyro", fc.sigma_gyro, what);
  read_field(j, "sigma_accel", fc.sigma_accel, what);
  read_field(j, "dt_max", fc.dt_max, what);
  read_field(j, "huber_c", fc.huber_c, what);
  if (j.contains("weight_mode")) {
    std::string name;
    read_field(j, "weight_mode", name, what);
    fc.weight_mode = weight_mode_from_name(name);
  }
  read_field(j, "fixed_dt_so3", fc.fixed_dt_so3, what);
  read_field(j, "fixed_dt_r3", fc.fixed_dt_r3, what);
  read_field(j, "weight_scale_factor", fc.weight_scale_factor, what);
  read_field(j, "estimate_biases", fc.estimate_biases, what);
  read_field(j, "initial_inverse_depth", fc.initial_inverse_depth, what);
  read_field(j, "max_iterations", fc.max_iterations, what);
  read_field(j, "function_tolerance", fc.function_tolerance, what);
  read_field(j, "gradient_tolerance", fc.gradient_tolerance, what);
  read_vec3(j, "gravity", fc.gravity, what);
  return fc;
}

void save_fusion_config(const std::string& path, const fusion::FusionConfig& config) {
  const json j{{"quality_gyro", config.quality_gyro},
               {"quality_accel", config.quality_accel},
               {"sigma_gyro", config.sigma_gyro},
               {"sigma_accel", config.sigma_accel},
               {"dt_max", config.dt_max},
               {"huber_c", config.huber_c},
               {"weight_mode", weight_mode_name(config.weight_mode)},
               {"fixed_dt_so3", config.fixed_dt_so3},
               {"fixed_dt_r3", config.fixed_dt_r3},
               {"weight_scale_factor", config.weight_scale_factor},
               {"estimate_biases", config.estimate_biases},
               {"initial_inverse_depth", config.initial_inverse_depth},
               {"max_iterations", config.max_iterations},
               {"function_tolerance", config.function_tolerance},
               {"gradient_tolerance", config.gradient_tolerance},
               {"gravity", vec3_json(config.gravity)}};
  save_json(path, j);
}

// --- analysis JSON ------------------------------------------------------------------

void save_analysis(const std::string& path, const AnalysisOutput& analysis) {
  const json j{{"requested_quality_gyro", analysis.requested_quality_gyro},
               {"requested_quality_accel", analysis.requested_quality_accel},
               {"dt_so3", analysis.dt_so3},
               {"dt_r3", analysis.dt_r3},
               {"gyro", prediction_json(analysis.gyro)},
               {"accel", prediction_json(analysis.accel)},
               {"saturated_gyro", analysis.saturated_gyro},
               {"saturated_accel", analysis.saturated_accel},
               {"spectrum",
                {{"n", analysis.spectrum_size},
                 {"sample_rate", analysis.sample_rate},
                 {"energy_gyro", analysis.energy_gyro},
                 {"energy_accel", analysis.energy_accel}}},
               {"warnings", analysis.warnings}};
  save_json(path, j);
}

AnalysisOutput load_analysis(const std::string& path) {
  const json j = load_json(path);
  const std::string what = "analysis '" + path + "'";
  reject_unknown_keys(j,
                      {"requested_quality_gyro", "requested_quality_accel", "dt_so3", "dt_r3", "gyro",
                       "accel", "saturated_gyro", "saturated_accel", "spectrum", "warnings"},
                      what);
  AnalysisOutput a;
  read_field(j, "requested_quality_gyro", a.requested_quality_gyro, what);
  read_field(j, "requested_quality_accel", a.requested_quality_accel, what);
  read_field(j, "dt_so3", a.dt_so3, what);
  read_field(j, "dt_r3", a.dt_r3, what);
  if (j.contains("gyro")) a.gyro = prediction_from_json(j.at("gyro"), what + " gyro");
  if (j.contains("accel")) a.accel = prediction_from_json(j.at("accel"), what + " accel");
  read_field(j, "saturated_gyro", a.saturated_gyro, what);
  read_field(j, "saturated_accel", a.saturated_accel, what);
  if (j.contains("spectrum")) {
    const json& s = j.at("spectrum");
    const std::string swhat = what + " spectrum";
    reject_unknown_keys(s, {"n", "sample_rate", "energy_gyro", "energy_accel"}, swhat);
    read_field(s, "n", a.spectrum_size, swhat);
    read_field(s, "sample_rate", a.sample_rate, swhat);
    read_field(s, "energy_gyro", a.energy_gyro, swhat);
    read_field(s, "energy_accel", a.energy_accel, swhat);
  }
  read_field(j, "warnings", a.warnings, what);
  return a;
}

// --- experiment emission ----------------------------------------------------------

void save_fig2(const std::string& out_dir, const experiments::Fig2Summary& summary) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    auto out = open_output((dir / "fig2.csv").string());
    out << "dt,sigma_r_empirical,sigma_r_predicted,sigma_n,sigma_r0\n";
    for (const auto& r : summary.rows) {
      out << format_double(r.dt) << ',' << format_double(r.sigma_r_empirical) << ','
          << format_double(r.sigma_r_predicted) << ',' << format_double(r.sigma_n) << ','
          << format_double(r.sigma_r0) << '\n';
    }
  }
  const json j{{"argmin_dt", summary.rows.at(summary.argmin_r0).dt},
               {"interior_minimum", summary.interior_minimum},
               {"max_rel_error", summary.max_rel_error},
               {"noise_underprediction", summary.noise_underprediction}};
  save_json((dir / "fig2_summary.json").string(), j);
}

void save_quality(const std::string& out_dir, const experiments::QualitySummary& summary) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    auto out = open_output((dir / "quality.csv").string());
    out << "seed,q_hat,q_out_gyro,q_out_accel,dt_so3,dt_r3\n";
    for (const auto& p : summary.points) {
      out << p.seed << ',' << format_double(p.q_hat) << ',' << format_double(p.q_out_gyro) << ','
          << format_double(p.q_out_accel) << ',' << format_double(p.dt_so3) << ','
          << format_double(p.dt_r3) << '\n';
    }
  }
  const json j{{"worst_gyro_dev", summary.worst_gyro_dev},
               {"worst_accel_above", summary.worst_accel_above},
               {"worst_accel_below", summary.worst_accel_below}};
  save_json((dir / "quality_summary.json").string(), j);
}

void save_weights(const std::string& out_dir, const experiments::WeightSummary& summary) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  double argmin_factor = 0.0;
  double best = std::numeric_limits<double>::infinity();
  {
    auto out = open_output((dir / "weights.csv").string());
    out << "factor,epe,scale_error,reprojection_rms\n";
    for (const auto& p : summary.points) {
      out << format_double(p.factor) << ',' << format_double(p.epe) << ','
          << format_double(p.scale_error) << ',' << format_double(p.reprojection_rms) << '\n';
      if (p.epe < best) {
        best = p.epe;
        argmin_factor = p.factor;
      }
    }
  }
  const json j{{"epe_at_unit", summary.epe_at_unit},
               {"epe_min", summary.epe_min},
               {"epe_at_largest", summary.epe_at_largest},
               {"argmin_factor", argmin_factor}};
  save_json((dir / "weights_summary.json").string(), j);
}

void save_dropout(const std::string& out_dir, const experiments::DropoutSummary& summary) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    auto out = open_output((dir / "dropout.csv").string());
    out << "dropout_seconds,epd,epe\n";
    for (const auto& p : summary.points) {
      out << format_double(p.dropout_seconds) << ',' << format_double(p.epd) << ','
          << format_double(p.epe) << '\n';
    }
  }
  const json j{{"inversions", summary.inversions}};
  save_json((dir / "dropout_summary.json").string(), j);
}

// --- fusion emission ----------------------------------------------------------------

void save_trajectory_csv(const std::string& path, const splines::Trajectory& trajectory, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("trajectory sampling rate must be positive");
  auto out = open_output(path);
  out << "t,px,py,pz,qw,qx,qy,qz\n";
  const double t0 = trajectory.valid_begin();
  const double t1 = trajectory.valid_end();
  const auto n = static_cast<long long>(std::floor((t1 - t0) * rate));
  for (long long k = 0; k <= n; ++k) {
    const double t = t0 + static_cast<double>(k) / rate;
    if (!trajectory.contains(t)) continue;
    const Eigen::Vector3d p = trajectory.position.eval(t);
    const Eigen::Quaterniond q = trajectory.rotation.eval_quat(t);
    out << format_double(t) << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
        << format_double(p.z()) << ',' << format_double(q.w()) << ',' << format_double(q.x()) << ','
        << format_double(q.y()) << ',' << format_double(q.z()) << '\n';
  }
}

void save_metrics(const std::string& path, const FusionMetrics& metrics) {
  json j{{"dt_so3", metrics.dt_so3},
         {"dt_r3", metrics.dt_r3},
         {"gamma_gyro", metrics.gamma_gyro},
         {"gamma_accel", metrics.gamma_accel},
         {"solver",
          {{"termination", metrics.report.termination},
           {"iterations", metrics.report.iterations},
           {"initial_cost", metrics.report.initial_cost},
           {"final_cost", metrics.report.final_cost},
           {"q_out_gyro", metrics.report.q_out_gyro},
           {"q_out_accel", metrics.report.q_out_accel},
           {"gyro_weighted_mean", metrics.report.gyro_weighted_mean},
           {"gyro_weighted_std", metrics.report.gyro_weighted_std},
           {"accel_weighted_mean", metrics.report.accel_weighted_mean},
           {"accel_weighted_std", metrics.report.accel_weighted_std},
           {"reprojection_rms", metrics.report.reprojection_rms},
           {"n_reprojection", metrics.report.n_reprojection},
           {"n_imu", metrics.report.n_imu}}}};
  if (metrics.epe >= 0.0) j["epe"] = metrics.epe;
  if (metrics.epd >= 0.0) j["epd"] = metrics.epd;
  if (metrics.scale_error >= 0.0) j["scale_error"] = metrics.scale_error;
  save_json(path, j);
}

void save_residual_histogram(const std::string& path, const std::vector<double>& gyro_weighted,
                             const std::vector<double>& accel_weighted) {
  constexpr double kLo = -5.0;
  constexpr double kHi = 5.0;
  constexpr int kBins = 40;
  constexpr double kWidth = (kHi - kLo) / kBins;

  auto out = open_output(path);
  out << "modality,bin_lo,bin_hi,count\n";
  const auto emit = [&](const char* name, const std::vector<double>& values) {
    std::vector<long long> counts(kBins, 0);
    for (double v : values) {
      int b = static_cast<int>(std::floor((v - kLo) / kWidth));
      b = std::max(0, std::min(kBins - 1, b));
      ++counts[static_cast<size_t>(b)];
    }
    for (int b = 0; b < kBins; ++b) {
      out << name << ',' << format_double(kLo + b * kWidth) << ',' << format_double(kLo + (b + 1) * kWidth)
          << ',' << counts[static_cast<size_t>(b)] << '\n';
    }
  };
  emit("gyro", gyro_weighted);
  emit("accel", accel_weighted);
}

}  // namespace sew::io
