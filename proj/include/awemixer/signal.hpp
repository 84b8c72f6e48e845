#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace awemixer {

/// Orthonormal two-channel filter bank.
struct WaveletBasis {
  std::string name;
  std::vector<double> dec_lo;  // g
  std::vector<double> dec_hi;  // h
  std::vector<double> rec_lo;
  std::vector<double> rec_hi;

  std::size_t taps() const { return dec_lo.size(); }
};

/// Multi-level decomposition ordered [cA_J, cD_J, ..., cD_1].
struct WaveletPyramid {
  std::vector<std::vector<double>> coeffs;
  int level = 0;
  std::size_t original_len = 0;

  std::size_t bands() const { return coeffs.size(); }
  /// "cA3", "cD3", ..., "cD1"
  std::string band_name(std::size_t band) const;
};

/// Non-negative FFT magnitudes for bins 0..floor(L/2).
struct AmplitudeSpectrum {
  std::vector<double> amps;
  std::size_t source_len = 0;
};

std::vector<std::string> supported_bases();

/// Builds "haar" or "db4"; the filters are checked against the orthonormality and QMF identities.
WaveletBasis make_basis(std::string_view name);

/// Largest deviation from the WaveletBasis identities (sums, double-shift orthonormality, QMF).
double basis_identity_error(const WaveletBasis& basis);

/// Single analysis step with periodized boundaries. Haar gives
/// cA[k] = (x[2k] + x[2k+1]) / sqrt2 and cD[k] = (x[2k] - x[2k+1]) / sqrt2.
std::pair<std::vector<double>, std::vector<double>> dwt_level(std::span<const double> x, const WaveletBasis& basis);

/// Exact inverse (adjoint) of dwt_level.
std::vector<double> idwt_level(std::span<const double> approx, std::span<const double> detail,
                               const WaveletBasis& basis);

WaveletPyramid wavedec(std::span<const double> x, const WaveletBasis& basis, int levels);
std::vector<double> waverec(const WaveletPyramid& pyramid, const WaveletBasis& basis);

/// Endpoint-aligned linear resampling to `target_len` samples.
std::vector<double> interp_linear(std::span<const double> values, std::size_t target_len);

/// Unnormalized forward DFT of arbitrary length: radix-2 for powers of two, Bluestein otherwise.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input);

AmplitudeSpectrum rfft_amplitude(std::span<const double> x);

}  // namespace awemixer
