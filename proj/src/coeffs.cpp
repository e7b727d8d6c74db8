#include "kinlang/coeffs.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kinlang::coeffs {

namespace {

void check_range(double a, const char* name) {
  if (!std::isfinite(a) || std::abs(a) > kMaxArgument) {
    throw std::range_error(std::string(name) + ": argument out of range: " + std::to_string(a));
  }
}

// sum_{k>=0} (-a)^k / (k + offset)!
double shifted_exp_series(double a, int offset) {
  double factorial = 1.0;
  for (int i = 2; i <= offset; ++i) factorial *= i;
  double term = 1.0 / factorial;
  double sum = term;
  for (int k = 1; k < 30; ++k) {
    term *= -a / (k + offset);
    sum += term;
  }
  return sum;
}

}  // namespace

double phi0(double a) {
  check_range(a, "phi0");
  return std::exp(-a);
}

double phi1(double a) {
  check_range(a, "phi1");
  if (std::abs(a) < kSeriesCutoff) return shifted_exp_series(a, 1);
  return -std::expm1(-a) / a;
}

double phi2(double a) {
  check_range(a, "phi2");
  if (std::abs(a) < kSeriesCutoff) return shifted_exp_series(a, 2);
  return (std::expm1(-a) + a) / (a * a);
}

double exp_pair_psi(double a) {
  check_range(a, "exp_pair_psi");
  if (std::abs(a) < 2.0) {
    // sum_{j>=0} (-1)^j (2^{j+2} - 2) a^j / (j+3)!
    double sum = 0.0;
    double power = 1.0;  // a^j / (j+3)!
    double two_pow = 4.0;
    power /= 6.0;
    for (int j = 0; j < 45; ++j) {
      const double term = (two_pow - 2.0) * power;
      sum += (j % 2 == 0) ? term : -term;
      power *= a / (j + 4);
      two_pow *= 2.0;
    }
    return sum;
  }
  const double e1 = std::exp(-a);
  return (4.0 * e1 - e1 * e1 + 2.0 * a - 3.0) / (2.0 * a * a * a);
}

double sofa_phi() {
  const double cbrt2 = std::cbrt(2.0);
  return (-1.0 + cbrt2) / (2.0 * (2.0 - cbrt2));
}

ExpPairMoments exp_pair_moments(double gamma, double h) {
  if (!(gamma > 0.0) || !(h > 0.0)) {
    throw std::invalid_argument("exp_pair_moments: gamma and h must be positive");
  }
  const double a = gamma * h;
  const double e = a > kMaxArgument ? 0.0 : std::exp(-a);
  const double p1 = a > kMaxArgument ? 1.0 / a : phi1(a);

  ExpPairMoments m{};
  m.var_i1 = -std::expm1(-2.0 * a) / (2.0 * gamma);
  m.cov = h * h * p1 * p1 / 2.0;
  const double psi = a > kMaxArgument ? (2.0 * a - 3.0) / (2.0 * a * a * a) : exp_pair_psi(a);
  m.var_i2 = h * h * h * psi;
  m.beta = h * p1 / (1.0 + e);

  double residual = h * h * h * (psi - p1 * p1 * p1 / (2.0 * (1.0 + e)));
  if (residual < 0.0) {
    if (residual < -1e-13 * m.var_i2) {
      throw std::domain_error("exp_pair_moments: negative residual variance");
    }
    residual = 0.0;
  }
  m.residual_var = residual;
  return m;
}

}  // namespace kinlang::coeffs
