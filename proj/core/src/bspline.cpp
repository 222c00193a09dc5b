#include "sew/bspline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "sew/spline_math.hpp"

namespace sew::splines {
namespace {

void check_domain(double t, double begin, double end) {
  if (!(t >= begin && t < end)) {
    std::ostringstream msg;
    msg << "t = " << t << " outside the valid interval [" << begin << ", " << end << ")";
    throw std::domain_error(msg.str());
  }
}

int locate_uniform(double t, double t0, double dt, int n_cps, double& u) {
  const double s = (t - t0) / dt;
  int i = static_cast<int>(std::floor(s));
  i = std::clamp(i, 1, n_cps - 3);
  // Clamping i (and floor roundoff) can push u a few ulps outside [0, 1).
  u = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
  return i;
}

}  // namespace

template <int D>
Spline<D>::Spline(double knot_spacing, double t0, std::vector<Vec> control_points)
    : dt_(knot_spacing), t0_(t0), cps_(std::move(control_points)) {
  if (!(dt_ > 0.0)) throw std::invalid_argument("spline knot spacing must be positive");
  if (cps_.size() < 4) throw std::invalid_argument("spline needs at least 4 control points");
}

template <int D>
void Spline<D>::locate(double t, int& segment, double& u) const {
  check_domain(t, valid_begin(), valid_end());
  segment = locate_uniform(t, t0_, dt_, static_cast<int>(cps_.size()), u);
}

template <int D>
typename Spline<D>::Vec Spline<D>::eval(double t, int derivative_order) const {
  int i;
  double u;
  locate(t, i, u);

  double b[4];
  double scale = 1.0;
  switch (derivative_order) {
    case 0:
      cubic_basis(u, b);
      break;
    case 1:
      cubic_basis_d1(u, b);
      scale = 1.0 / dt_;
      break;
    case 2:
      cubic_basis_d2(u, b);
      scale = 1.0 / (dt_ * dt_);
      break;
    default:
      throw std::invalid_argument("derivative_order must be 0, 1 or 2");
  }

  Vec out = Vec::Zero();
  for (int a = 0; a < 4; ++a) out += b[a] * cps_[static_cast<std::size_t>(i - 1 + a)];
  return out * scale;
}

template class Spline<1>;
template class Spline<3>;

SplineSO3::SplineSO3(double knot_spacing, double t0, std::vector<Eigen::Quaterniond> control_rotations)
    : dt_(knot_spacing), t0_(t0), cps_(std::move(control_rotations)) {
  if (!(dt_ > 0.0)) throw std::invalid_argument("spline knot spacing must be positive");
  if (cps_.size() < 4) throw std::invalid_argument("spline needs at least 4 control rotations");
  normalize_controls();
}

void SplineSO3::normalize_controls() {
  for (auto& q : cps_) q.normalize();
  for (std::size_t j = 1; j < cps_.size(); ++j)
    if (cps_[j - 1].dot(cps_[j]) < 0.0) cps_[j].coeffs() = -cps_[j].coeffs();
}

void SplineSO3::locate(double t, int& segment, double& u) const {
  check_domain(t, valid_begin(), valid_end());
  segment = locate_uniform(t, t0_, dt_, static_cast<int>(cps_.size()), u);
}

Eigen::Quaterniond SplineSO3::eval_quat(double t) const {
  int i;
  double u;
  locate(t, i, u);
  double bt[3];
  cumulative_basis(u, bt);
  const auto k = static_cast<std::size_t>(i);
  return so3_segment<double>(cps_[k - 1], cps_[k], cps_[k + 1], cps_[k + 2], bt);
}

Eigen::Matrix3d SplineSO3::eval(double t) const { return eval_quat(t).toRotationMatrix(); }

Eigen::Vector3d SplineSO3::angular_velocity(double t) const {
  int i;
  double u;
  locate(t, i, u);
  double bt[3];
  double btd[3];
  cumulative_basis(u, bt);
  cumulative_basis_d1(u, btd);
  const auto k = static_cast<std::size_t>(i);
  return so3_segment_body_rate<double>(cps_[k - 1], cps_[k], cps_[k + 1], cps_[k + 2], bt, btd, dt_);
}

Spline1d fit_least_squares_1d(const spectral::UniformSignal& signal, double knot_spacing) {
  if (signal.samples.size() < 2) throw std::invalid_argument("fit needs at least 2 samples");
  if (!(knot_spacing > 0.0)) throw std::invalid_argument("knot spacing must be positive");
  const auto n = static_cast<long>(signal.samples.size());
  const double span = static_cast<double>(n - 1) / signal.sample_rate;
  if (span < 4.0 * knot_spacing - 1e-12)
    throw std::invalid_argument("signal must span at least 4 knot intervals");

  const double dt = knot_spacing;
  const double t_start = signal.start_time;
  const double t0 = t_start - dt;
  const int nseg = static_cast<int>(std::floor(span / dt)) + 1;
  const int n_cps = nseg + 3;

  // Banded normal equations: bandwidth 7 (|row - col| <= 3).
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_cps);
  std::vector<std::array<double, 4>> band(static_cast<std::size_t>(n_cps), {0.0, 0.0, 0.0, 0.0});
  std::vector<long> seg_count(static_cast<std::size_t>(nseg + 1), 0);

  for (long s = 0; s < n; ++s) {
    const double t = t_start + static_cast<double>(s) / signal.sample_rate;
    const double pos = (t - t0) / dt;
    int i = std::clamp(static_cast<int>(std::floor(pos)), 1, nseg);
    const double u = pos - static_cast<double>(i);
    ++seg_count[static_cast<std::size_t>(i)];

    double b[4];
    cubic_basis(u, b);
    const double x = signal.samples[static_cast<std::size_t>(s)];
    for (int a = 0; a < 4; ++a) {
      const int row = i - 1 + a;
      rhs[row] += b[a] * x;
      // Lower-triangular band entries: band[row][d] holds (row, row-d).
      for (int c = 0; c <= a; ++c) band[static_cast<std::size_t>(row)][static_cast<std::size_t>(a - c)] += b[a] * b[c];
    }
  }

  for (int i = 1; i <= nseg; ++i) {
    if (seg_count[static_cast<std::size_t>(i)] == 0) {
      const double a = t0 + static_cast<double>(i) * dt;
      std::ostringstream msg;
      msg << "knot interval " << i << " [" << a << ", " << a + dt << ") contains no samples";
      throw FitError(msg.str(), i, a, a + dt);
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n_cps) * 4);
  for (int row = 0; row < n_cps; ++row)
    for (int d = 0; d < 4 && row - d >= 0; ++d)
      triplets.emplace_back(row, row - d, band[static_cast<std::size_t>(row)][static_cast<std::size_t>(d)]);

  Eigen::SparseMatrix<double> normal(n_cps, n_cps);
  normal.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> solver;
  solver.compute(normal);
  if (solver.info() != Eigen::Success) {
    throw FitError("normal equations are rank deficient", -1, t0, t0 + static_cast<double>(nseg) * dt);
  }
  const Eigen::VectorXd theta = solver.solve(rhs);

  std::vector<Eigen::Matrix<double, 1, 1>> cps(static_cast<std::size_t>(n_cps));
  for (int i = 0; i < n_cps; ++i) cps[static_cast<std::size_t>(i)][0] = theta[i];
  return Spline1d(dt, t0, std::move(cps));
}

}  // namespace sew::splines
