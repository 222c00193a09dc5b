#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace sew::spectral {

// Uniformly sampled scalar signal. N >= 2, sample_rate > 0.
struct UniformSignal {
  std::vector<double> samples;
  double sample_rate = 0.0;
  double start_time = 0.0;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Complex DFT bins under unitary 1/sqrt(N) scaling. Bin k holds frequency
// k*fs/N for k < N/2; the upper half mirrors the negative frequencies.
struct Spectrum {
  std::vector<std::complex<double>> bins;
  double sample_rate = 0.0;

  std::size_t size() const { return bins.size(); }
  double bin_frequency(std::size_t k) const {
    const auto n = static_cast<double>(bins.size());
    const auto kk = static_cast<double>(k);
    return (kk < n / 2.0 ? kk : kk - n) * sample_rate / n;
  }
};

// Per-bin magnitudes of a 3-vector signal collapsed to one nonnegative
// scalar per frequency; DC is zero by construction.
struct ScalarSpectrum {
  std::vector<double> magnitudes;
  double sample_rate = 0.0;

  std::size_t size() const { return magnitudes.size(); }
  double bin_frequency(std::size_t k) const {
    const auto n = static_cast<double>(magnitudes.size());
    const auto kk = static_cast<double>(k);
    return (kk < n / 2.0 ? kk : kk - n) * sample_rate / n;
  }
};

// Unitary forward transform: bins[k] = (1/sqrt(N)) sum_n samples[n] e^{-i 2pi kn/N}.
// Throws std::invalid_argument on fewer than 2 samples, a non-positive or
// non-finite sample rate, or non-finite samples.
Spectrum dft(const UniformSignal& signal);

// Unitary inverse transform. The imaginary residue of a conjugate-symmetric
// spectrum is below 1e-9 and is discarded. start_time of the result is 0.
UniformSignal idft(const Spectrum& spectrum);

// Collapses a 3-vector signal to one scalar magnitude per bin,
// sqrt(1/3)*||(X,Y,Z)(k)||, with the DC bin forced to zero so a large
// constant component cannot dominate energy ratios.
ScalarSpectrum vector_spectrum(const std::vector<Eigen::Vector3d>& samples, double sample_rate);

// Builds a ScalarSpectrum from a scalar signal (|X(k)| per bin, DC zeroed).
ScalarSpectrum scalar_spectrum(const UniformSignal& signal);

double energy(const Spectrum& spectrum);
double energy(const ScalarSpectrum& spectrum);

// Low-pass (centered moving average of width in_rate/out_rate, edges clamped)
// followed by subsampling. The rate ratio must be a whole number.
std::vector<double> decimate(const std::vector<double>& samples, double in_rate, double out_rate);

}  // namespace sew::spectral
