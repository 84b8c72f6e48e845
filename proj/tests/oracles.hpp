#pragma once

// Brute-force reference implementations used only by the test suites. They deliberately take a
// different route from the library code they check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace awemixer::oracle {

/// O(L^2) DFT magnitudes for bins 0..L/2.
inline std::vector<double> naive_dft_amplitude(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k*t mod n before the trig call to keep the angle small.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      re += x[t] * std::cos(angle);
      im += x[t] * std::sin(angle);
    }
    out[k] = std::hypot(re, im);
  }
  return out;
}

/// Full circular convolution y[n] = sum_m f[m] x[(n - m) mod N], then keep the odd samples.
inline std::vector<double> conv_decimate(std::span<const double> x, std::span<const double> filter) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::vector<double> full(x.size(), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < filter.size(); ++m) {
      const std::int64_t idx = ((i - static_cast<std::int64_t>(m)) % n + n) % n;
      full[static_cast<std::size_t>(i)] += filter[m] * x[static_cast<std::size_t>(idx)];
    }
  }
  std::vector<double> out;
  for (std::size_t i = 1; i < full.size(); i += 2) out.push_back(full[i]);
  return out;
}

/// Iterated conv_decimate producing [cA_J, cD_J, ..., cD_1].
inline std::vector<std::vector<double>> naive_wavedec(std::span<const double> x, std::span<const double> lo,
                                                      std::span<const double> hi, int levels) {
  std::vector<double> approx(x.begin(), x.end());
  std::vector<std::vector<double>> details;
  for (int j = 0; j < levels; ++j) {
    details.push_back(conv_decimate(approx, hi));
    approx = conv_decimate(approx, lo);
  }
  std::vector<std::vector<double>> out{approx};
  for (auto it = details.rbegin(); it != details.rend(); ++it) out.push_back(*it);
  return out;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace awemixer::oracle
