#include "sew/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include <fftw3.h>

namespace sew::spectral {
namespace {

// FFTW plan creation is not thread safe; execution of a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void transform(std::vector<std::complex<double>>& data, int sign) {
  const auto n = static_cast<int>(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& v : data) v *= scale;
}

void check_rate(double sample_rate) {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw std::invalid_argument("sample rate must be positive and finite");
}

}  // namespace

Spectrum dft(const UniformSignal& signal) {
  if (signal.samples.size() < 2)
    throw std::invalid_argument("dft requires at least 2 samples");
  check_rate(signal.sample_rate);
  for (double v : signal.samples)
    if (!std::isfinite(v)) throw std::invalid_argument("dft: non-finite sample");

  Spectrum out;
  out.sample_rate = signal.sample_rate;
  out.bins.assign(signal.samples.begin(), signal.samples.end());
  transform(out.bins, FFTW_FORWARD);
  return out;
}

UniformSignal idft(const Spectrum& spectrum) {
  if (spectrum.bins.size() < 2)
    throw std::invalid_argument("idft requires at least 2 bins");
  check_rate(spectrum.sample_rate);

  std::vector<std::complex<double>> data = spectrum.bins;
  transform(data, FFTW_BACKWARD);

  UniformSignal out;
  out.sample_rate = spectrum.sample_rate;
  out.samples.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.samples[i] = data[i].real();
  return out;
}

ScalarSpectrum vector_spectrum(const std::vector<Eigen::Vector3d>& samples, double sample_rate) {
  if (samples.size() < 2)
    throw std::invalid_argument("vector_spectrum requires at least 2 samples");
  check_rate(sample_rate);
  for (const auto& s : samples)
    if (!s.allFinite()) throw std::invalid_argument("vector_spectrum: non-finite sample");

  const std::size_t n = samples.size();
  ScalarSpectrum out;
  out.sample_rate = sample_rate;
  out.magnitudes.assign(n, 0.0);

  UniformSignal axis;
  axis.sample_rate = sample_rate;
  axis.samples.resize(n);
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < n; ++i) axis.samples[i] = samples[i][a];
    const Spectrum spec = dft(axis);
    for (std::size_t k = 0; k < n; ++k) out.magnitudes[k] += std::norm(spec.bins[k]);
  }
  for (std::size_t k = 0; k < n; ++k) out.magnitudes[k] = std::sqrt(out.magnitudes[k] / 3.0);
  out.magnitudes[0] = 0.0;
  return out;
}

ScalarSpectrum scalar_spectrum(const UniformSignal& signal) {
  const Spectrum spec = dft(signal);
  ScalarSpectrum out;
  out.sample_rate = spec.sample_rate;
  out.magnitudes.resize(spec.bins.size());
  for (std::size_t k = 0; k < spec.bins.size(); ++k) out.magnitudes[k] = std::abs(spec.bins[k]);
  out.magnitudes[0] = 0.0;
  return out;
}

double energy(const Spectrum& spectrum) {
  double e = 0.0;
  for (const auto& b : spectrum.bins) e += std::norm(b);
  return e;
}

double energy(const ScalarSpectrum& spectrum) {
  double e = 0.0;
  for (double m : spectrum.magnitudes) e += m * m;
  return e;
}

std::vector<double> decimate(const std::vector<double>& samples, double in_rate, double out_rate) {
  check_rate(in_rate);
  check_rate(out_rate);
  const double ratio = in_rate / out_rate;
  const auto r = static_cast<long>(std::llround(ratio));
  if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9)
    throw std::invalid_argument("decimate: output rate must divide input rate");
  if (r == 1) return samples;

  const auto n = static_cast<long>(samples.size());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>((n + r - 1) / r));
  for (long i = 0; i < n; i += r) {
    // Centered width-r average, clamped at the edges.
    double acc = 0.0;
    for (long j = i - (r - 1) / 2; j <= i + r / 2; ++j)
      acc += samples[static_cast<std::size_t>(std::clamp(j, 0L, n - 1))];
    out.push_back(acc / static_cast<double>(r));
  }
  return out;
}

}  // namespace sew::spectral
