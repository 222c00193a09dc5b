#include "sew/sensors.hpp"

#include <cmath>
#include <sstream>

namespace sew::sensors {

double observation_time(double frame_start_time, double row, const CameraModel& camera) {
  if (!(row >= 0.0 && row <= camera.image_height)) {
    std::ostringstream msg;
    msg << "row " << row << " outside image of height " << camera.image_height;
    throw std::invalid_argument(msg.str());
  }
  return frame_start_time + camera.readout_time * row / camera.image_height;
}

Eigen::Vector3d predict_gyro(const splines::Trajectory& trajectory, double t, const ImuBiases& biases,
                             const Eigen::Quaterniond& imu_to_body) {
  return imu_to_body.conjugate() * trajectory.rotation.angular_velocity(t) + biases.gyro;
}

Eigen::Vector3d predict_accel(const splines::Trajectory& trajectory, double t, const ImuBiases& biases,
                              const Eigen::Vector3d& gravity, const Eigen::Quaterniond& imu_to_body) {
  const Eigen::Quaterniond q = trajectory.rotation.eval_quat(t);
  const Eigen::Vector3d acc_world = trajectory.position.eval(t, 2);
  return imu_to_body.conjugate() * (q.conjugate() * (acc_world - gravity)) + biases.accel;
}

Eigen::Vector3d backproject_ray(const Eigen::Vector2d& pixel, const CameraModel& camera) {
  const Eigen::Vector3d dir((pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy, 1.0);
  return dir.normalized();
}

Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraModel& camera) {
  if (point.z() <= 1e-9) throw CheiralityError("projection of a point at or behind the camera");
  return {camera.fx * point.x() / point.z() + camera.cx, camera.fy * point.y() / point.z() + camera.cy};
}

Eigen::Vector2d reproject(const Observation& reference, double inverse_depth, const Pose& reference_pose,
                          const Pose& observing_pose, const CameraModel& camera) {
  if (inverse_depth < 0.0) throw std::invalid_argument("reproject: negative inverse depth");
  const Eigen::Vector3d ray = backproject_ray(reference.pixel, camera);
  const Eigen::Quaterniond r_rel = observing_pose.rotation.conjugate() * reference_pose.rotation;
  if (inverse_depth == 0.0) {
    // Point at infinity: direction only, translation drops out.
    return project(r_rel * ray, camera);
  }
  const Eigen::Vector3d t_rel =
      observing_pose.rotation.conjugate() * (reference_pose.position - observing_pose.position);
  return project(r_rel * (ray / inverse_depth) + t_rel, camera);
}

double huber_cost(const Eigen::Vector2d& residual, double cutoff) {
  const double s = residual.norm();
  if (s <= cutoff) return s * s;
  return 2.0 * cutoff * s - cutoff * cutoff;
}

}  // namespace sew::sensors
