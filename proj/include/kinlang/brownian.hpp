#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "kinlang/rng.hpp"

namespace kinlang {

using Vector = Eigen::VectorXd;

/// Brownian increment W, scaled bridge area H and second bridge moment K over
/// an interval of length h. For Brownian motion the three are independent
/// with per-coordinate variances h, h/12 and h/720.
struct BrownianTriple {
  double h = 0.0;
  Vector w;
  Vector hh;
  Vector kk;

  std::size_t dim() const { return static_cast<std::size_t>(w.size()); }
};

/// The raw integrals M = int W_{s,r} dr and N = int (r - s) W_{s,r} dr.
struct SpaceTimeMoments {
  double h = 0.0;
  Vector w;
  Vector m;
  Vector n;
};

/// i1 = int_s^t e^{-gamma (t - tau)} dW_tau and
/// i2 = int_s^t int_s^tau e^{-gamma (tau - r)} dW_r dtau over an interval of length h.
struct ExpIntegralPair {
  double h = 0.0;
  double gamma = 0.0;
  Vector i1;
  Vector i2;

  std::size_t dim() const { return static_cast<std::size_t>(i1.size()); }
};

BrownianTriple sample_triple(double h, std::size_t d, RandomSource& rng);

SpaceTimeMoments triple_to_moments(const BrownianTriple& t);
BrownianTriple moments_to_triple(const SpaceTimeMoments& s);

/// Triple over the concatenation [s, u] + [u, t]. Holds pathwise for any
/// integrable path.
BrownianTriple combine_triples(const BrownianTriple& left, const BrownianTriple& right);

ExpIntegralPair sample_exp_pair(double gamma, double h, std::size_t d, RandomSource& rng);

/// Pair over the concatenation [s, u] + [u, t]. Both sides must carry gamma.
ExpIntegralPair combine_exp_pairs(double gamma, const ExpIntegralPair& left,
                                  const ExpIntegralPair& right);

/// A pair over an interval of length zero.
ExpIntegralPair zero_exp_pair(double gamma, std::size_t d);

/// What a randomized-midpoint step over [s, s + h] consumes: the uniform
/// fraction alpha and the pairs over [s, s + alpha h] and [s, s + h].
struct MidpointNoise {
  double alpha = 0.0;
  ExpIntegralPair head;
  ExpIntegralPair full;
};

/// Randomized-midpoint noise for one coarse interval [s, t] with midpoint u,
/// generated so that the coarse step and both half steps see the same path.
///
/// x ~ U[s, u] and y ~ U[u, t] are the fine midpoints; the coarse midpoint z
/// is x when the Rademacher sign is +1 and y otherwise.
struct MidpointSplit {
  double h = 0.0;
  double gamma = 0.0;
  double x = 0.0;  // offsets from s
  double y = 0.0;
  double z = 0.0;
  int rademacher = 1;
  double alpha = 0.0;  // z / h

  ExpIntegralPair s_x, x_u, s_u, u_y, y_t, u_t, s_z, z_t, s_t;

  MidpointNoise coarse() const;
  MidpointNoise fine_left() const;
  MidpointNoise fine_right() const;
};

MidpointSplit split_midpoint_structure(double gamma, double h, std::size_t d, RandomSource& rng);

/// Brownian (or arbitrary) path sampled on a uniform grid and treated as
/// piecewise linear between grid points. Every integral is computed straight
/// from its definition so it can referee the combination identities.
class FinePath {
 public:
  /// Brownian path on `substeps` equal steps of [0, h]; rows are grid points.
  static FinePath sample(double h, std::size_t substeps, std::size_t d, RandomSource& rng);
  /// Path through the given grid values; row 0 is taken as the origin.
  static FinePath from_values(double h, Eigen::MatrixXd values);

  double h() const { return h_; }
  std::size_t substeps() const { return static_cast<std::size_t>(values_.rows()) - 1; }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  double step() const { return h_ / static_cast<double>(substeps()); }
  const Eigen::MatrixXd& values() const { return values_; }

  /// Inserts a Brownian-bridge midpoint in every segment.
  FinePath refine(RandomSource& rng) const;

  // The integrals below are over grid indices [i0, i1].
  Vector increment(std::size_t i0, std::size_t i1) const;
  Vector integral_m(std::size_t i0, std::size_t i1) const;
  Vector integral_n(std::size_t i0, std::size_t i1) const;
  /// int_s^t int_s^{r1} W_{s,r2} dr2 dr1.
  Vector double_integral(std::size_t i0, std::size_t i1) const;
  BrownianTriple triple(std::size_t i0, std::size_t i1) const;
  ExpIntegralPair exp_pair(double gamma, std::size_t i0, std::size_t i1) const;

 private:
  FinePath(double h, Eigen::MatrixXd values) : h_(h), values_(std::move(values)) {}
  void check_range(std::size_t i0, std::size_t i1) const;

  double h_;
  Eigen::MatrixXd values_;
};

}  // namespace kinlang
