#include "kinlang/brownian.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kinlang/coeffs.hpp"

namespace kinlang {

namespace {

Vector normal_vector(std::size_t d, double scale, RandomSource& rng) {
  Vector out(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = scale * rng.normal();
  return out;
}

void require_positive(double value, const char* what, const char* op) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must be positive and finite");
  }
}

// e^{-gamma h} and (1 - e^{-gamma h}) / gamma, safe for gamma h -> 0 and large.
void decay_terms(double gamma, double h, double& decay, double& integral) {
  const double a = gamma * h;
  if (a > coeffs::kMaxArgument) {
    decay = 0.0;
    integral = 1.0 / gamma;
    return;
  }
  decay = coeffs::phi0(a);
  integral = h * coeffs::phi1(a);
}

}  // namespace

BrownianTriple sample_triple(double h, std::size_t d, RandomSource& rng) {
  require_positive(h, "h", "sample_triple");
  if (d == 0) throw std::invalid_argument("sample_triple: dimension must be at least 1");
  BrownianTriple t;
  t.h = h;
  t.w = normal_vector(d, std::sqrt(h), rng);
  t.hh = normal_vector(d, std::sqrt(h / 12.0), rng);
  t.kk = normal_vector(d, std::sqrt(h / 720.0), rng);
  return t;
}

SpaceTimeMoments triple_to_moments(const BrownianTriple& t) {
  const double h = t.h;
  SpaceTimeMoments s;
  s.h = h;
  s.w = t.w;
  s.m = 0.5 * h * t.w + h * t.hh;
  s.n = (h * h / 3.0) * t.w + (0.5 * h * h) * t.hh - (h * h) * t.kk;
  return s;
}

BrownianTriple moments_to_triple(const SpaceTimeMoments& s) {
  require_positive(s.h, "h", "moments_to_triple");
  const double h = s.h;
  BrownianTriple t;
  t.h = h;
  t.w = s.w;
  t.hh = s.m / h - 0.5 * s.w;
  t.kk = (0.5 * h * s.m - s.n + (h * h / 12.0) * s.w) / (h * h);
  return t;
}

BrownianTriple combine_triples(const BrownianTriple& left, const BrownianTriple& right) {
  if (left.dim() != right.dim() || left.hh.size() != left.w.size() ||
      right.hh.size() != right.w.size() || left.kk.size() != left.w.size() ||
      right.kk.size() != right.w.size()) {
    throw std::invalid_argument("combine_triples: dimension mismatch");
  }
  require_positive(left.h, "left h", "combine_triples");
  require_positive(right.h, "right h", "combine_triples");

  const SpaceTimeMoments l = triple_to_moments(left);
  const SpaceTimeMoments r = triple_to_moments(right);
  const double hl = left.h;
  const double hr = right.h;

  SpaceTimeMoments out;
  out.h = hl + hr;
  out.w = l.w + r.w;
  out.m = l.m + r.m + hr * l.w;
  out.n = l.n + r.n + hl * r.m + (0.5 * hr * hr + hr * hl) * l.w;
  return moments_to_triple(out);
}

ExpIntegralPair sample_exp_pair(double gamma, double h, std::size_t d, RandomSource& rng) {
  require_positive(gamma, "gamma", "sample_exp_pair");
  require_positive(h, "h", "sample_exp_pair");
  if (d == 0) throw std::invalid_argument("sample_exp_pair: dimension must be at least 1");
  const coeffs::ExpPairMoments mom = coeffs::exp_pair_moments(gamma, h);
  ExpIntegralPair p;
  p.h = h;
  p.gamma = gamma;
  p.i1 = normal_vector(d, std::sqrt(mom.var_i1), rng);
  p.i2 = mom.beta * p.i1 + normal_vector(d, std::sqrt(mom.residual_var), rng);
  return p;
}

ExpIntegralPair combine_exp_pairs(double gamma, const ExpIntegralPair& left,
                                  const ExpIntegralPair& right) {
  const double tol = 1e-12 * std::max(1.0, std::abs(gamma));
  if (std::abs(left.gamma - gamma) > tol || std::abs(right.gamma - gamma) > tol) {
    throw std::invalid_argument("combine_exp_pairs: gamma mismatch");
  }
  if (left.dim() != right.dim() || left.i2.size() != left.i1.size() ||
      right.i2.size() != right.i1.size()) {
    throw std::invalid_argument("combine_exp_pairs: dimension mismatch");
  }
  double decay = 1.0;
  double integral = right.h;
  decay_terms(gamma, right.h, decay, integral);

  ExpIntegralPair out;
  out.h = left.h + right.h;
  out.gamma = gamma;
  out.i1 = decay * left.i1 + right.i1;
  out.i2 = left.i2 + right.i2 + integral * left.i1;
  return out;
}

ExpIntegralPair zero_exp_pair(double gamma, std::size_t d) {
  ExpIntegralPair p;
  p.h = 0.0;
  p.gamma = gamma;
  p.i1 = Vector::Zero(static_cast<Eigen::Index>(d));
  p.i2 = Vector::Zero(static_cast<Eigen::Index>(d));
  return p;
}

MidpointNoise MidpointSplit::coarse() const { return {alpha, s_z, s_t}; }

MidpointNoise MidpointSplit::fine_left() const { return {x / (0.5 * h), s_x, s_u}; }

MidpointNoise MidpointSplit::fine_right() const { return {(y - 0.5 * h) / (0.5 * h), u_y, u_t}; }

MidpointSplit split_midpoint_structure(double gamma, double h, std::size_t d, RandomSource& rng) {
  require_positive(gamma, "gamma", "split_midpoint_structure");
  require_positive(h, "h", "split_midpoint_structure");
  const double half = 0.5 * h;

  MidpointSplit sp;
  sp.h = h;
  sp.gamma = gamma;
  sp.x = half * rng.uniform();
  sp.y = half + half * rng.uniform();
  sp.rademacher = rng.rademacher();
  sp.z = sp.rademacher == 1 ? sp.x : sp.y;
  sp.alpha = sp.z / h;

  // Finest partition s < x < u < y < t, then combine upward.
  sp.s_x = sample_exp_pair(gamma, sp.x, d, rng);
  sp.x_u = sample_exp_pair(gamma, half - sp.x, d, rng);
  sp.u_y = sample_exp_pair(gamma, sp.y - half, d, rng);
  sp.y_t = sample_exp_pair(gamma, h - sp.y, d, rng);

  sp.s_u = combine_exp_pairs(gamma, sp.s_x, sp.x_u);
  sp.u_t = combine_exp_pairs(gamma, sp.u_y, sp.y_t);
  sp.s_t = combine_exp_pairs(gamma, sp.s_u, sp.u_t);
  if (sp.rademacher == 1) {
    sp.s_z = sp.s_x;
    sp.z_t = combine_exp_pairs(gamma, sp.x_u, sp.u_t);
  } else {
    sp.s_z = combine_exp_pairs(gamma, sp.s_u, sp.u_y);
    sp.z_t = sp.y_t;
  }
  return sp;
}

// ---------------------------------------------------------------------------
// FinePath

FinePath FinePath::sample(double h, std::size_t substeps, std::size_t d, RandomSource& rng) {
  require_positive(h, "h", "FinePath::sample");
  if (substeps < 2) throw std::invalid_argument("FinePath::sample: substeps must be at least 2");
  if (d == 0) throw std::invalid_argument("FinePath::sample: dimension must be at least 1");
  const double sd = std::sqrt(h / static_cast<double>(substeps));
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(substeps + 1),
                                                 static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 1; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      values(i, j) = values(i - 1, j) + sd * rng.normal();
    }
  }
  return FinePath(h, std::move(values));
}

FinePath FinePath::from_values(double h, Eigen::MatrixXd values) {
  require_positive(h, "h", "FinePath::from_values");
  if (values.rows() < 3) {
    throw std::invalid_argument("FinePath::from_values: substeps must be at least 2");
  }
  if (values.cols() < 1) throw std::invalid_argument("FinePath::from_values: empty dimension");
  return FinePath(h, std::move(values));
}

FinePath FinePath::refine(RandomSource& rng) const {
  const auto n = static_cast<Eigen::Index>(substeps());
  const double sd = std::sqrt(step() / 4.0);
  Eigen::MatrixXd out(2 * n + 1, values_.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(2 * i) = values_.row(i);
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      out(2 * i + 1, j) = 0.5 * (values_(i, j) + values_(i + 1, j)) + sd * rng.normal();
    }
  }
  out.row(2 * n) = values_.row(n);
  return FinePath(h_, std::move(out));
}

void FinePath::check_range(std::size_t i0, std::size_t i1) const {
  if (i0 >= i1 || i1 > substeps()) {
    throw std::invalid_argument("FinePath: invalid grid range");
  }
}

Vector FinePath::increment(std::size_t i0, std::size_t i1) const {
  check_range(i0, i1);
  return (values_.row(static_cast<Eigen::Index>(i1)) - values_.row(static_cast<Eigen::Index>(i0)))
      .transpose();
}

namespace {

// Simpson's rule on one segment of a piecewise-linear path: exact whenever the
// integrand weight is at most quadratic in r. `weight(q)` receives the offset
// q = r - s from the left end of the integration interval.
template <class Weight>
Vector simpson_over(const Eigen::MatrixXd& values, std::size_t i0, std::size_t i1, double dt,
                    Weight weight) {
  const Eigen::RowVectorXd origin = values.row(static_cast<Eigen::Index>(i0));
  Vector acc = Vector::Zero(values.cols());
  for (std::size_t j = i0; j < i1; ++j) {
    const Eigen::RowVectorXd a = values.row(static_cast<Eigen::Index>(j)) - origin;
    const Eigen::RowVectorXd b = values.row(static_cast<Eigen::Index>(j + 1)) - origin;
    const double q = static_cast<double>(j - i0) * dt;
    const Eigen::RowVectorXd mid = 0.5 * (a + b);
    acc += (dt / 6.0) *
           (weight(q) * a + 4.0 * weight(q + 0.5 * dt) * mid + weight(q + dt) * b).transpose();
  }
  return acc;
}

}  // namespace

Vector FinePath::integral_m(std::size_t i0, std::size_t i1) const {
  check_range(i0, i1);
  return simpson_over(values_, i0, i1, step(), [](double) { return 1.0; });
}

Vector FinePath::integral_n(std::size_t i0, std::size_t i1) const {
  check_range(i0, i1);
  return simpson_over(values_, i0, i1, step(), [](double q) { return q; });
}

Vector FinePath::double_integral(std::size_t i0, std::size_t i1) const {
  check_range(i0, i1);
  const double len = static_cast<double>(i1 - i0) * step();
  return simpson_over(values_, i0, i1, step(), [len](double q) { return len - q; });
}

BrownianTriple FinePath::triple(std::size_t i0, std::size_t i1) const {
  check_range(i0, i1);
  const double dt = step();
  const double len = static_cast<double>(i1 - i0) * dt;
  const Vector w = increment(i0, i1);

  // Bridge B_r = W_{s,r} - (r - s)/len * W_{s,t}, integrated with the
  // weights of the H and K definitions.
  const Vector plain = integral_m(i0, i1);
  const Vector weighted_half = simpson_over(values_, i0, i1, dt, [len](double q) {
    return 0.5 * len - q;
  });
  // int (r - s)/len dr = len/2 ; int (len/2 - q) q/len dq = -len^2/12
  BrownianTriple t;
  t.h = len;
  t.w = w;
  t.hh = (plain - 0.5 * len * w) / len;
  t.kk = (weighted_half + (len * len / 12.0) * w) / (len * len);
  return t;
}

ExpIntegralPair FinePath::exp_pair(double gamma, std::size_t i0, std::size_t i1) const {
  check_range(i0, i1);
  if (!(gamma > 0.0)) throw std::invalid_argument("FinePath::exp_pair: gamma must be positive");
  const double dt = step();
  const double len = static_cast<double>(i1 - i0) * dt;
  auto kernel1 = [gamma](double lag) { return std::exp(-gamma * lag); };
  auto kernel2 = [gamma](double lag) { return -std::expm1(-gamma * lag) / gamma; };

  ExpIntegralPair p;
  p.h = len;
  p.gamma = gamma;
  p.i1 = Vector::Zero(values_.cols());
  p.i2 = Vector::Zero(values_.cols());
  for (std::size_t j = i0; j < i1; ++j) {
    const Eigen::RowVectorXd slope = (values_.row(static_cast<Eigen::Index>(j + 1)) -
                                      values_.row(static_cast<Eigen::Index>(j))) /
                                     dt;
    // Lags t - r at the left end, midpoint and right end of the segment.
    const double l0 = len - static_cast<double>(j - i0) * dt;
    const double lm = l0 - 0.5 * dt;
    const double l1 = l0 - dt;
    const double w1 = dt / 6.0 * (kernel1(l0) + 4.0 * kernel1(lm) + kernel1(l1));
    const double w2 = dt / 6.0 * (kernel2(l0) + 4.0 * kernel2(lm) + kernel2(l1));
    p.i1 += w1 * slope.transpose();
    p.i2 += w2 * slope.transpose();
  }
  return p;
}

}  // namespace kinlang
