#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "awemixer/error.hpp"
#include "awemixer/signal.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace awemixer;

namespace {

double energy(std::span<const double> x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); }

}  // namespace

TEST_CASE("make_basis") {
  const auto haar = make_basis("haar");
  REQUIRE(haar.taps() == 2);
  CHECK(haar.dec_lo[0] == doctest::Approx(0.70710678));
  CHECK(haar.dec_lo[1] == doctest::Approx(0.70710678));

  const auto db4 = make_basis("db4");
  CHECK(db4.taps() == 8);
  CHECK(basis_identity_error(db4) < 1e-10);
  // Four vanishing moments of the high-pass filter.
  for (int p = 0; p < 4; ++p) {
    double moment = 0.0;
    for (std::size_t k = 0; k < db4.taps(); ++k) moment += db4.dec_hi[k] * std::pow(static_cast<double>(k), p);
    CHECK(std::abs(moment) < 1e-9);
  }
  CHECK(db4.rec_lo.front() == db4.dec_lo.back());

  try {
    make_basis("sym9");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("haar") != std::string::npos);
    CHECK(msg.find("db4") != std::string::npos);
  }
}

TEST_CASE("dwt_level examples") {
  const auto haar = make_basis("haar");
  const std::vector<double> x{1, 2, 3, 4};
  auto [a, d] = dwt_level(x, haar);
  CHECK(a[0] == doctest::Approx(2.12132034));
  CHECK(a[1] == doctest::Approx(4.94974747));
  CHECK(d[0] == doctest::Approx(-0.70710678));
  CHECK(d[1] == doctest::Approx(-0.70710678));

  for (const char* name : {"haar", "db4"}) {
    const auto basis = make_basis(name);
    const std::vector<double> constant(16, 2.5);
    auto [ca, cd] = dwt_level(constant, basis);
    for (double v : cd) CHECK(std::abs(v) < 1e-14);
    for (double v : ca) CHECK(v == doctest::Approx(2.5 * std::numbers::sqrt2));
  }

  const auto db4 = make_basis("db4");
  std::mt19937_64 rng(32);
  const auto signal = oracle::random_vector(32, rng);
  auto [ra, rd] = dwt_level(signal, db4);
  CHECK(oracle::max_abs_diff(ra, oracle::conv_decimate(signal, db4.dec_lo)) < 1e-12);
  CHECK(oracle::max_abs_diff(rd, oracle::conv_decimate(signal, db4.dec_hi)) < 1e-12);

  CHECK_THROWS_AS(dwt_level(std::vector<double>{1, 2, 3}, haar), InputError);
}

TEST_CASE("wavedec examples") {
  const auto haar = make_basis("haar");
  const std::vector<double> x{1, 1, 1, 1, 2, 2, 2, 2};

  auto single = wavedec(x, haar, 1);
  auto [a1, d1] = dwt_level(x, haar);
  REQUIRE(single.bands() == 2);
  CHECK(single.coeffs[0] == a1);
  CHECK(single.coeffs[1] == d1);

  auto two = wavedec(x, haar, 2);
  REQUIRE(two.bands() == 3);
  CHECK(two.coeffs[0][0] == doctest::Approx(2.0));
  CHECK(two.coeffs[0][1] == doctest::Approx(4.0));
  const auto expected = oracle::naive_wavedec(x, haar.dec_lo, haar.dec_hi, 2);
  for (std::size_t b = 0; b < 3; ++b) CHECK(oracle::max_abs_diff(two.coeffs[b], expected[b]) < 1e-12);
  CHECK(two.band_name(0) == "cA2");
  CHECK(two.band_name(1) == "cD2");
  CHECK(two.band_name(2) == "cD1");

  std::vector<double> lookback(96, 0.0);
  auto three = wavedec(lookback, make_basis("db4"), 3);
  REQUIRE(three.bands() == 4);
  CHECK(three.coeffs[0].size() == 12);
  CHECK(three.coeffs[1].size() == 12);
  CHECK(three.coeffs[2].size() == 24);
  CHECK(three.coeffs[3].size() == 48);

  try {
    wavedec(std::vector<double>(20, 0.0), haar, 3);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("divisible by 2^3") != std::string::npos);
  }
}

TEST_CASE("waverec examples") {
  const auto haar = make_basis("haar");
  WaveletPyramid zero{{std::vector<double>(2, 0.0), std::vector<double>(2, 0.0), std::vector<double>(4, 0.0)}, 2, 8};
  for (double v : waverec(zero, haar)) CHECK(v == 0.0);

  const double c = 1.75;
  WaveletPyramid approx_only{{std::vector<double>(2, c * 2.0), std::vector<double>(2, 0.0),
                              std::vector<double>(4, 0.0)},
                             2,
                             8};
  for (double v : waverec(approx_only, haar)) CHECK(v == doctest::Approx(c));

  WaveletPyramid broken{{std::vector<double>(2, 0.0), std::vector<double>(3, 0.0)}, 1, 4};
  CHECK_THROWS_AS(waverec(broken, haar), InputError);
}

TEST_CASE("perfect reconstruction and energy preservation") {
  std::mt19937_64 rng(99);
  for (const char* name : {"haar", "db4"}) {
    const auto basis = make_basis(name);
    for (int levels = 1; levels <= 3; ++levels) {
      const std::size_t block = std::size_t{1} << levels;
      for (std::size_t len = 8; len <= 96; len += 8) {
        if (len % block != 0 || len / (block / 2) < basis.taps()) continue;
        const auto x = oracle::random_vector(len, rng);
        const auto pyramid = wavedec(x, basis, levels);
        CHECK(oracle::max_abs_diff(waverec(pyramid, basis), x) < 1e-8);
        double band_energy = 0.0;
        for (const auto& band : pyramid.coeffs) band_energy += energy(band);
        CHECK(std::abs(band_energy - energy(x)) < 1e-9);
      }
    }
  }
}

TEST_CASE("interp_linear") {
  CHECK(interp_linear(std::vector<double>{0, 2}, 3) == std::vector<double>{0, 1, 2});
  const auto quarter = interp_linear(std::vector<double>{1, 3}, 4);
  CHECK(quarter[0] == doctest::Approx(1.0));
  CHECK(quarter[1] == doctest::Approx(5.0 / 3.0));
  CHECK(quarter[2] == doctest::Approx(7.0 / 3.0));
  CHECK(quarter[3] == doctest::Approx(3.0));
  CHECK(interp_linear(std::vector<double>{5}, 4) == std::vector<double>{5, 5, 5, 5});
  CHECK(interp_linear(std::vector<double>{4, 8, 9}, 1) == std::vector<double>{4});
  CHECK_THROWS_AS(interp_linear(std::vector<double>{}, 3), InputError);

  std::mt19937_64 rng(4);
  for (std::size_t n : {2u, 5u, 12u, 48u}) {
    const auto v = oracle::random_vector(n, rng);
    CHECK(oracle::max_abs_diff(interp_linear(v, n), v) < 1e-15);
  }
}

TEST_CASE("rfft_amplitude") {
  auto dc = rfft_amplitude(std::vector<double>{1, 1, 1, 1});
  REQUIRE(dc.amps.size() == 3);
  CHECK(dc.amps[0] == doctest::Approx(4.0));
  CHECK(std::abs(dc.amps[1]) < 1e-12);
  CHECK(std::abs(dc.amps[2]) < 1e-12);

  auto nyquist = rfft_amplitude(std::vector<double>{1, -1, 1, -1});
  CHECK(std::abs(nyquist.amps[0]) < 1e-12);
  CHECK(std::abs(nyquist.amps[1]) < 1e-12);
  CHECK(nyquist.amps[2] == doctest::Approx(4.0));

  std::vector<double> tone(8);
  for (int n = 0; n < 8; ++n) tone[n] = std::sin(2.0 * std::numbers::pi * n / 8.0);
  auto spec = rfft_amplitude(tone);
  for (std::size_t k = 0; k < spec.amps.size(); ++k) {
    if (k == 1) {
      CHECK(std::abs(spec.amps[k] - 4.0) < 1e-9);
    } else {
      CHECK(spec.amps[k] < 1e-9);
    }
  }

  std::mt19937_64 rng(12);
  for (std::size_t len : {4u, 6u, 8u, 12u, 17u, 96u, 100u}) {
    const auto x = oracle::random_vector(len, rng);
    const auto amps = rfft_amplitude(x).amps;
    CHECK(amps.size() == len / 2 + 1);
    CHECK(oracle::max_abs_diff(amps, oracle::naive_dft_amplitude(x)) < 1e-9);

    if (len % 2 == 0) {
      double parseval = amps.front() * amps.front() + amps.back() * amps.back();
      for (std::size_t k = 1; k + 1 < amps.size(); ++k) parseval += 2.0 * amps[k] * amps[k];
      CHECK(std::abs(parseval / static_cast<double>(len) - energy(x)) < 1e-9);
    }

    std::vector<double> rotated(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) rotated[(i + 5) % x.size()] = x[i];
    CHECK(oracle::max_abs_diff(rfft_amplitude(rotated).amps, amps) < 1e-9);
  }
  CHECK_THROWS_AS(rfft_amplitude(std::vector<double>{1.0}), InputError);
}
