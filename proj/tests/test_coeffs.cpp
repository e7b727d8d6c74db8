#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "kinlang/coeffs.hpp"

using namespace kinlang::coeffs;

namespace {

// Series in long double: sum_k (-a)^k / (k + offset)!
long double series(long double a, int offset, int terms = 30) {
  long double fact = 1.0L;
  for (int i = 2; i <= offset; ++i) fact *= i;
  long double term = 1.0L / fact, sum = term;
  for (int k = 1; k < terms; ++k) {
    term *= -a / (k + offset);
    sum += term;
  }
  return sum;
}

// Reference values: long double series near zero, long double closed forms elsewhere.
long double ref_phi1(long double a) {
  if (std::fabs(a) < 1.0L) return series(a, 1, 40);
  return -std::expm1(-a) / a;
}
long double ref_phi2(long double a) {
  if (std::fabs(a) < 1.0L) return series(a, 2, 40);
  return (std::expm1(-a) + a) / (a * a);
}
long double ref_psi(long double a) {
  if (std::fabs(a) < 3.0L) {
    long double sum = 0.0L, pw = 1.0L / 6.0L, two = 4.0L;
    for (int j = 0; j < 80; ++j) {
      sum += ((j % 2 == 0) ? 1.0L : -1.0L) * (two - 2.0L) * pw;
      pw *= a / (j + 4);
      two *= 2.0L;
    }
    return sum;
  }
  const long double e = std::exp(-a);
  return (4.0L * e - e * e + 2.0L * a - 3.0L) / (2.0L * a * a * a);
}

double rel(double got, long double want) {
  return static_cast<double>(std::fabs((got - want) / want));
}

}  // namespace

TEST_CASE("kernel limits and closed-form values") {
  CHECK(phi0(0.0) == 1.0);
  CHECK(phi1(0.0) == 1.0);
  CHECK(phi2(0.0) == 0.5);
  CHECK(phi2(1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(exp_pair_psi(0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("phi1(-a) e^{-a} = phi1(a)") {
  for (double a : {0.1, 1.0, 10.0}) {
    CHECK(rel(phi1(-a) * std::exp(-a), phi1(a)) < 1e-14);
  }
}

TEST_CASE("kernels match high-precision references to 1e-14 relative") {
  double worst1 = 0, worst2 = 0, worst_psi = 0;
  for (double lg = -12.0; lg <= 2.5; lg += 0.01) {
    for (double sign : {1.0, -1.0}) {
      const double a = sign * std::pow(10.0, lg);
      worst1 = std::max(worst1, rel(phi1(a), ref_phi1(a)));
      worst2 = std::max(worst2, rel(phi2(a), ref_phi2(a)));
      if (a > 0) worst_psi = std::max(worst_psi, rel(exp_pair_psi(a), ref_psi(a)));
    }
  }
  INFO("phi1 ", worst1, " phi2 ", worst2, " psi ", worst_psi);
  CHECK(worst1 < 1e-14);
  CHECK(worst2 < 1e-14);
  CHECK(worst_psi < 1e-13);
}

TEST_CASE("kernels agree with the 30-term Taylor series on [1e-12, 1e-2]") {
  for (double lg = -12.0; lg <= -2.0; lg += 0.05) {
    const double a = std::pow(10.0, lg);
    CHECK(rel(phi1(a), series(a, 1)) < 1e-14);
    CHECK(rel(phi2(a), series(a, 2)) < 1e-14);
  }
}

TEST_CASE("kernels are continuous across the series crossover") {
  for (double c : {kSeriesCutoff, -kSeriesCutoff}) {
    const double below = std::nextafter(c, 0.0);
    CHECK(rel(phi1(below), phi1(c)) < 1e-14);
    CHECK(rel(phi2(below), phi2(c)) < 1e-14);
  }
  CHECK(rel(exp_pair_psi(std::nextafter(2.0, 0.0)), exp_pair_psi(2.0)) < 1e-13);
}

TEST_CASE("phi1 is strictly decreasing on a > 0") {
  double prev = phi1(1e-9);
  for (double a = 1e-3; a < 50.0; a *= 1.05) {
    const double cur = phi1(a);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("out-of-range arguments raise range errors") {
  CHECK_THROWS_AS(phi0(-800.0), std::range_error);
  CHECK_THROWS_AS(phi1(-800.0), std::range_error);
  CHECK_THROWS_AS(phi2(std::nan("")), std::range_error);
  CHECK_THROWS_AS(exp_pair_psi(1e6), std::range_error);
}

TEST_CASE("Forest-Ruth constant and its time identities") {
  const double phi = sofa_phi();
  CHECK(phi == doctest::Approx(0.1756035959798288).epsilon(1e-15));
  const double c = std::cbrt(2.0);
  CHECK(rel(phi, (-1.0L + c) / (2.0L * (2.0L - c))) < 1e-15);
  CHECK(2.0 * (1.0 + 2.0 * phi) - (1.0 + 4.0 * phi) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(-(0.5 + phi) + phi + phi - (0.5 + phi) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("exp-pair moments match the closed-form covariance") {
  for (auto [g, h] : {std::pair{2.0, 1.0}, {0.5, 1.0}, {2.0, 0.01}, {1.0, 1e-7}}) {
    const ExpPairMoments m = exp_pair_moments(g, h);
    const long double a = static_cast<long double>(g) * h;
    const long double var1 = -std::expm1(-2.0L * a) / (2.0L * g);
    const long double em = -std::expm1(-a);
    const long double cov = em * em / (2.0L * g * g);
    const long double var2 = h * h * static_cast<long double>(h) * ref_psi(a);
    CHECK(rel(m.var_i1, var1) < 1e-14);
    CHECK(rel(m.cov, cov) < 1e-13);
    CHECK(rel(m.var_i2, var2) < 1e-13);
    CHECK(rel(m.beta, cov / var1) < 1e-13);
    CHECK(m.residual_var >= 0.0);
    CHECK(std::abs(m.residual_var - (var2 - cov * cov / var1)) <= 1e-12 * var2);
  }
}

TEST_CASE("small gamma h limit of the covariance") {
  const ExpPairMoments m = exp_pair_moments(1e-9, 1.0);
  CHECK(m.var_i1 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(m.var_i2 == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  CHECK(m.cov == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("exp-pair moments reject non-positive inputs") {
  CHECK_THROWS_AS(exp_pair_moments(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(exp_pair_moments(1.0, -1.0), std::invalid_argument);
}
