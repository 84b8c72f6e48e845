#include "awemixer/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "awemixer/error.hpp"

namespace awemixer {

namespace {

using cplx = std::complex<double>;

// Daubechies 4 (8 taps) scaling filter, standard table values.
constexpr double kDb4Lo[] = {
    -0.010597401784997278, 0.032883011666982945, 0.030841381835986965, -0.18703481171888114,
    -0.02798376941698385,  0.6308807679295904,   0.7148465705525415,   0.23037781330885523,
};

constexpr double kBasisTolerance = 1e-10;

WaveletBasis from_scaling_filter(std::string name, std::vector<double> lo) {
  const std::size_t taps = lo.size();
  std::vector<double> hi(taps);
  // h[k] = (-1)^(k+1) g[F-1-k]
  for (std::size_t k = 0; k < taps; ++k) hi[k] = (k % 2 == 0 ? -1.0 : 1.0) * lo[taps - 1 - k];
  std::vector<double> rec_lo(lo.rbegin(), lo.rend());
  std::vector<double> rec_hi(hi.rbegin(), hi.rend());
  return {std::move(name), std::move(lo), std::move(hi), std::move(rec_lo), std::move(rec_hi)};
}

std::size_t wrap(std::ptrdiff_t index, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  return static_cast<std::size_t>(((index % m) + m) % m);
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  if (n == 1) return;
  std::vector<cplx> even(n / 2);
  std::vector<cplx> odd(n / 2);
  for (std::size_t i = 0; i < n / 2; ++i) {
    even[i] = a[2 * i];
    odd[i] = a[2 * i + 1];
  }
  fft_radix2(even);
  fft_radix2(odd);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    const cplx t = std::polar(1.0, angle) * odd[k];
    a[k] = even[k] + t;
    a[k + n / 2] = even[k] - t;
  }
}

void ifft_radix2(std::vector<cplx>& a) {
  for (auto& v : a) v = std::conj(v);
  fft_radix2(a);
  const auto scale = 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v = std::conj(v) * scale;
}

std::vector<cplx> bluestein(std::span<const cplx> x) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;

  // chirp[k] = exp(-i pi k^2 / n); k^2 is reduced mod 2n to keep the angle small.
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k2 = (k * k) % (2 * n);
    chirp[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
  }

  std::vector<cplx> a(m, cplx{});
  std::vector<cplx> b(m, cplx{});
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

  fft_radix2(a);
  fft_radix2(b);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  ifft_radix2(a);

  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
  return out;
}

}  // namespace

std::string WaveletPyramid::band_name(std::size_t band) const {
  if (band == 0) return "cA" + std::to_string(level);
  return "cD" + std::to_string(level - static_cast<int>(band) + 1);
}

std::vector<std::string> supported_bases() { return {"haar", "db4"}; }

double basis_identity_error(const WaveletBasis& basis) {
  const auto& g = basis.dec_lo;
  const auto& h = basis.dec_hi;
  const std::size_t taps = g.size();
  double err = 0.0;
  double sum_g = 0.0;
  double sum_h = 0.0;
  for (std::size_t k = 0; k < taps; ++k) {
    sum_g += g[k];
    sum_h += h[k];
  }
  err = std::max(err, std::abs(sum_g - std::numbers::sqrt2));
  err = std::max(err, std::abs(sum_h));
  for (std::size_t shift = 0; shift < taps; shift += 2) {
    double gg = 0.0;
    double hh = 0.0;
    double gh = 0.0;
    for (std::size_t k = 0; k + shift < taps; ++k) {
      gg += g[k] * g[k + shift];
      hh += h[k] * h[k + shift];
      gh += g[k] * h[k + shift];
    }
    const double expected = shift == 0 ? 1.0 : 0.0;
    err = std::max({err, std::abs(gg - expected), std::abs(hh - expected), std::abs(gh)});
  }
  for (std::size_t k = 0; k < taps; ++k) {
    const double mirrored = (k % 2 == 0 ? -1.0 : 1.0) * g[taps - 1 - k];
    err = std::max(err, std::abs(h[k] - mirrored));
  }
  return err;
}

WaveletBasis make_basis(std::string_view name) {
  WaveletBasis basis;
  if (name == "haar") {
    basis = from_scaling_filter("haar", {1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2});
  } else if (name == "db4") {
    basis = from_scaling_filter("db4", std::vector<double>(std::begin(kDb4Lo), std::end(kDb4Lo)));
  } else {
    std::string listed;
    for (const auto& b : supported_bases()) listed += (listed.empty() ? "" : ", ") + b;
    throw ConfigError("unknown wavelet basis '" + std::string(name) + "' (supported: " + listed + ")");
  }
  if (const double err = basis_identity_error(basis); err > kBasisTolerance) {
    throw ConfigError("wavelet basis '" + basis.name + "' fails filter identities (error " + std::to_string(err) + ")");
  }
  return basis;
}

// Periodized analysis: cA[k] = sum_m g[m] x[(2k + 1 - m) mod N], i.e. g[2k - n] applied to the
// circular extension shifted by one sample so that haar pairs (x[2k], x[2k+1]).
std::pair<std::vector<double>, std::vector<double>> dwt_level(std::span<const double> x, const WaveletBasis& basis) {
  const std::size_t n = x.size();
  if (n % 2 != 0) throw InputError("dwt_level: input length " + std::to_string(n) + " is odd");
  if (n < basis.taps()) {
    throw InputError("dwt_level: input length " + std::to_string(n) + " shorter than " + basis.name + " filter (" +
                     std::to_string(basis.taps()) + " taps)");
  }
  const std::size_t half = n / 2;
  std::vector<double> approx(half, 0.0);
  std::vector<double> detail(half, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t m = 0; m < basis.taps(); ++m) {
      const double v = x[wrap(static_cast<std::ptrdiff_t>(2 * k + 1) - static_cast<std::ptrdiff_t>(m), n)];
      a += basis.dec_lo[m] * v;
      d += basis.dec_hi[m] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
  return {std::move(approx), std::move(detail)};
}

std::vector<double> idwt_level(std::span<const double> approx, std::span<const double> detail,
                               const WaveletBasis& basis) {
  if (approx.size() != detail.size()) {
    throw InputError("idwt_level: approximation length " + std::to_string(approx.size()) +
                     " differs from detail length " + std::to_string(detail.size()));
  }
  const std::size_t n = 2 * approx.size();
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < approx.size(); ++k) {
    for (std::size_t m = 0; m < basis.taps(); ++m) {
      const std::size_t idx = wrap(static_cast<std::ptrdiff_t>(2 * k + 1) - static_cast<std::ptrdiff_t>(m), n);
      x[idx] += basis.dec_lo[m] * approx[k] + basis.dec_hi[m] * detail[k];
    }
  }
  return x;
}

WaveletPyramid wavedec(std::span<const double> x, const WaveletBasis& basis, int levels) {
  if (levels < 1) throw InputError("wavedec: level must be >= 1, got " + std::to_string(levels));
  const std::size_t block = std::size_t{1} << levels;
  if (x.empty() || x.size() % block != 0) {
    throw InputError("wavedec: length " + std::to_string(x.size()) + " must be divisible by 2^" +
                     std::to_string(levels) + " = " + std::to_string(block));
  }
  WaveletPyramid pyramid;
  pyramid.level = levels;
  pyramid.original_len = x.size();
  std::vector<std::vector<double>> details;
  std::vector<double> approx(x.begin(), x.end());
  for (int j = 0; j < levels; ++j) {
    auto [a, d] = dwt_level(approx, basis);
    approx = std::move(a);
    details.push_back(std::move(d));
  }
  pyramid.coeffs.push_back(std::move(approx));
  for (auto it = details.rbegin(); it != details.rend(); ++it) pyramid.coeffs.push_back(std::move(*it));
  return pyramid;
}

std::vector<double> waverec(const WaveletPyramid& pyramid, const WaveletBasis& basis) {
  if (pyramid.level < 1 || pyramid.coeffs.size() != static_cast<std::size_t>(pyramid.level) + 1) {
    throw InputError("waverec: pyramid of level " + std::to_string(pyramid.level) + " has " +
                     std::to_string(pyramid.coeffs.size()) + " bands");
  }
  std::vector<double> approx = pyramid.coeffs[0];
  for (std::size_t band = 1; band < pyramid.coeffs.size(); ++band) {
    if (pyramid.coeffs[band].size() != approx.size()) {
      throw InputError("waverec: band " + pyramid.band_name(band) + " has length " +
                       std::to_string(pyramid.coeffs[band].size()) + ", expected " + std::to_string(approx.size()));
    }
    approx = idwt_level(approx, pyramid.coeffs[band], basis);
  }
  if (pyramid.original_len != 0 && approx.size() != pyramid.original_len) {
    throw InputError("waverec: reconstructed length " + std::to_string(approx.size()) + " differs from original " +
                     std::to_string(pyramid.original_len));
  }
  return approx;
}

std::vector<double> interp_linear(std::span<const double> values, std::size_t target_len) {
  if (values.empty()) throw InputError("interp_linear: empty input");
  if (target_len == 0) throw InputError("interp_linear: target length must be >= 1");
  const std::size_t n = values.size();
  if (n == 1) return std::vector<double>(target_len, values[0]);
  if (target_len == 1) return {values[0]};
  std::vector<double> out(target_len);
  const double step = static_cast<double>(n - 1) / static_cast<double>(target_len - 1);
  for (std::size_t i = 0; i < target_len; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto left = std::min(static_cast<std::size_t>(pos), n - 2);
    const double frac = pos - static_cast<double>(left);
    out[i] = values[left] + frac * (values[left + 1] - values[left]);
  }
  return out;
}

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input) {
  if (input.empty()) return {};
  if (is_power_of_two(input.size())) {
    std::vector<cplx> a(input.begin(), input.end());
    fft_radix2(a);
    return a;
  }
  return bluestein(input);
}

AmplitudeSpectrum rfft_amplitude(std::span<const double> x) {
  if (x.size() < 2) throw InputError("rfft_amplitude: need at least 2 samples, got " + std::to_string(x.size()));
  std::vector<cplx> buf(x.begin(), x.end());
  const auto spectrum = fft(buf);
  AmplitudeSpectrum out;
  out.source_len = x.size();
  out.amps.resize(x.size() / 2 + 1);
  for (std::size_t k = 0; k < out.amps.size(); ++k) out.amps[k] = std::abs(spectrum[k]);
  return out;
}

}  // namespace awemixer
