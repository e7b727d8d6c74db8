#pragma once

// Exponential kernels behind every step coefficient. With a = gamma * h:
//
//   phi0(a) = e^{-a}
//   phi1(a) = (1 - e^{-a}) / a            so (1 - e^{-gamma h}) / gamma = h * phi1(a)
//   phi2(a) = (e^{-a} + a - 1) / a^2      so (e^{-gamma h} + gamma h - 1) / gamma^2 = h^2 * phi2(a)
//
// Near a = 0 the closed forms cancel, so a Taylor branch takes over there.

namespace kinlang::coeffs {

/// Largest |a| accepted before the kernels throw std::range_error.
inline constexpr double kMaxArgument = 700.0;

/// Below this |a| the kernels switch to their Taylor series.
inline constexpr double kSeriesCutoff = 0.5;

double phi0(double a);
double phi1(double a);
double phi2(double a);

/// (4e^{-a} - e^{-2a} + 2a - 3) / (2a^3); Var of the double exponential
/// integral is h^3 * exp_pair_psi(gamma h).
double exp_pair_psi(double a);

/// Forest-Ruth constant (-1 + 2^{1/3}) / (2 (2 - 2^{1/3})).
double sofa_phi();

/// Closed-form covariance of (i1, i2) per coordinate, plus the regression
/// split i2 = beta * i1 + X used to sample it.
struct ExpPairMoments {
  double var_i1;
  double cov;
  double var_i2;
  double beta;          // cov / var_i1
  double residual_var;  // var_i2 - cov^2 / var_i1
};

/// Requires gamma > 0 and h > 0. Throws std::domain_error if the residual
/// variance comes out below -1e-13 * var_i2 (it is clamped to 0 above that).
ExpPairMoments exp_pair_moments(double gamma, double h);

}  // namespace kinlang::coeffs
