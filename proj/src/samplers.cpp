#include "kinlang/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kinlang/coeffs.hpp"

namespace kinlang {

namespace testing {
namespace {
std::atomic<bool> g_sort_fault{false};
}
void set_sort_fault(bool enabled) { g_sort_fault.store(enabled); }
bool sort_fault() { return g_sort_fault.load(); }
}  // namespace testing

DynamicsParams DynamicsParams::make(double gamma, double u) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("DynamicsParams: gamma must be finite and non-negative");
  }
  if (!(u > 0.0) || !std::isfinite(u)) {
    throw std::invalid_argument("DynamicsParams: u must be finite and positive");
  }
  return {gamma, u, std::sqrt(2.0 * gamma * u)};
}

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

void check_state(const PhaseState& s, const Potential& pot, double h, const char* op) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument(std::string(op) + ": h must be positive and finite");
  }
  if (s.x.size() != s.v.size() || static_cast<std::size_t>(s.x.size()) != pot.dim()) {
    throw std::invalid_argument(std::string(op) + ": state dimension does not match the potential");
  }
}

void check_pair(const ExpIntegralPair& z, const DynamicsParams& p, const PhaseState& s,
                double h, const char* op) {
  if (z.i1.size() != s.x.size() || z.i2.size() != s.x.size()) {
    throw std::invalid_argument(std::string(op) + ": noise dimension mismatch");
  }
  if (z.h == 0.0) return;  // zero_exp_pair
  if (!close(z.h, h)) {
    throw std::invalid_argument(std::string(op) + ": noise interval " + std::to_string(z.h) +
                                " does not match h = " + std::to_string(h));
  }
  if (!close(z.gamma, p.gamma)) {
    throw std::invalid_argument(std::string(op) + ": noise gamma does not match dynamics");
  }
}

void check_triple(const BrownianTriple& t, const PhaseState& s, double h, const char* op) {
  if (t.w.size() != s.x.size() || t.hh.size() != s.x.size() || t.kk.size() != s.x.size()) {
    throw std::invalid_argument(std::string(op) + ": noise dimension mismatch");
  }
  if (!close(t.h, h)) {
    throw std::invalid_argument(std::string(op) + ": noise interval " + std::to_string(t.h) +
                                " does not match h = " + std::to_string(h));
  }
}

Vector gradient_at_start(const PhaseState& s, const Potential& pot, const GradientCache* cache) {
  if (cache != nullptr && cache->valid) {
    if (cache->grad.size() != s.x.size()) {
      throw std::invalid_argument("gradient cache dimension mismatch");
    }
    return cache->grad;
  }
  return pot.gradient(s.x);
}

void store(GradientCache* cache, Vector grad) {
  if (cache == nullptr) return;
  cache->grad = std::move(grad);
  cache->valid = true;
}

void invalidate(GradientCache* cache) {
  if (cache != nullptr) cache->valid = false;
}

// h * phi1(gamma h), which is (1 - e^{-gamma h}) / gamma and h at gamma = 0.
double h_phi1(double gamma, double h) { return h * coeffs::phi1(gamma * h); }
double h2_phi2(double gamma, double h) { return h * h * coeffs::phi2(gamma * h); }

}  // namespace

PhaseState left_point_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                           double h, const ExpIntegralPair& z, GradientCache* cache) {
  check_state(s, pot, h, "left_point_step");
  check_pair(z, p, s, h, "left_point_step");
  const Vector g0 = gradient_at_start(s, pot, cache);
  const double a = p.gamma * h;
  const double c1 = h_phi1(p.gamma, h);
  const double c2 = h2_phi2(p.gamma, h);

  PhaseState out;
  out.x = s.x + c1 * s.v - (c2 * p.u) * g0 + p.sigma * z.i2;
  out.v = coeffs::phi0(a) * s.v - (c1 * p.u) * g0 + p.sigma * z.i1;
  invalidate(cache);
  return out;
}

PhaseState strang_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                       double h, const ExpIntegralPair& z, GradientCache* cache) {
  check_state(s, pot, h, "strang_step");
  check_pair(z, p, s, h, "strang_step");
  const Vector g0 = gradient_at_start(s, pot, cache);
  const double a = p.gamma * h;

  const Vector v1 = s.v - (0.5 * p.u * h) * g0;
  PhaseState out;
  out.x = s.x + h_phi1(p.gamma, h) * v1 + p.sigma * z.i2;
  const Vector v2 = coeffs::phi0(a) * v1 + p.sigma * z.i1;
  Vector g1 = pot.gradient(out.x);
  out.v = v2 - (0.5 * p.u * h) * g1;
  store(cache, std::move(g1));
  return out;
}

ObaboResult obabo_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                       double h, const ExpIntegralPair& z_left, const ExpIntegralPair& z_right,
                       GradientCache* cache) {
  check_state(s, pot, h, "obabo_step");
  check_pair(z_left, p, s, 0.5 * h, "obabo_step");
  check_pair(z_right, p, s, 0.5 * h, "obabo_step");
  const Vector g0 = gradient_at_start(s, pot, cache);
  const double half_decay = coeffs::phi0(0.5 * p.gamma * h);

  const Vector v0 = half_decay * s.v + p.sigma * z_left.i1;
  const Vector v1 = v0 - (0.5 * p.u * h) * g0;
  ObaboResult out;
  out.state.x = s.x + h * v1;
  Vector g1 = pot.gradient(out.state.x);
  const Vector v2 = v1 - (0.5 * p.u * h) * g1;
  out.state.v = half_decay * v2 + p.sigma * z_right.i1;
  out.midpoint_x = s.x + (0.25 * h) * (v0 + v1);
  store(cache, std::move(g1));
  return out;
}

PhaseState randomized_midpoint_step(const PhaseState& s, const DynamicsParams& p,
                                    const Potential& pot, double h, const MidpointNoise& noise,
                                    GradientCache* cache) {
  check_state(s, pot, h, "randomized_midpoint_step");
  if (!(noise.alpha >= 0.0 && noise.alpha <= 1.0)) {
    throw std::invalid_argument("randomized_midpoint_step: alpha must lie in [0, 1]");
  }
  check_pair(noise.full, p, s, h, "randomized_midpoint_step");
  if (noise.alpha > 0.0) {
    check_pair(noise.head, p, s, noise.alpha * h, "randomized_midpoint_step");
  } else if (noise.head.i1.size() != s.x.size() || noise.head.i2.size() != s.x.size()) {
    throw std::invalid_argument("randomized_midpoint_step: noise dimension mismatch");
  }
  const Vector g0 = gradient_at_start(s, pot, cache);
  const double ah = noise.alpha * h;
  const double rest = h - ah;

  const Vector x1 = s.x + h_phi1(p.gamma, ah) * s.v - (p.u * h2_phi2(p.gamma, ah)) * g0 +
                    p.sigma * noise.head.i2;
  const Vector g1 = pot.gradient(x1);
  PhaseState out;
  out.x = s.x + h_phi1(p.gamma, h) * s.v - (p.u * h * h_phi1(p.gamma, rest)) * g1 +
          p.sigma * noise.full.i2;
  out.v = coeffs::phi0(p.gamma * h) * s.v - (p.u * coeffs::phi0(p.gamma * rest) * h) * g1 +
          p.sigma * noise.full.i1;
  invalidate(cache);
  return out;
}

PhaseState sort_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot, double h,
                     const BrownianTriple& t, GradientCache* cache) {
  check_state(s, pot, h, "sort_step");
  check_triple(t, s, h, "sort_step");
  const Vector g0 = gradient_at_start(s, pot, cache);
  const double a = p.gamma * h;
  const double half = 0.5 * h;
  const Vector xi = p.sigma * (t.w - 12.0 * t.kk);

  const Vector v1 = s.v + p.sigma * (t.hh + 6.0 * t.kk);
  const double c2_half = h2_phi2(p.gamma, half);
  const Vector x1 = s.x + h_phi1(p.gamma, half) * v1 - (c2_half * p.u) * g0 + (c2_half / h) * xi;
  const Vector g1 = pot.gradient(x1);

  const double c2 = h2_phi2(p.gamma, h);
  const double w1 = testing::sort_fault() ? -2.0 / 3.0 : 2.0 / 3.0;
  PhaseState out;
  out.x = s.x + h_phi1(p.gamma, h) * v1 - c2 * p.u * (g0 / 3.0 + w1 * g1) + (c2 / h) * xi;
  Vector g2 = pot.gradient(out.x);

  const double e = coeffs::phi0(a);
  const double e_half = coeffs::phi0(0.5 * a);
  const Vector v2 = e * v1 - (e * p.u * h / 6.0) * g0 - (2.0 / 3.0 * e_half * p.u * h) * g1 -
                    (p.u * h / 6.0) * g2 + coeffs::phi1(a) * xi;
  out.v = v2 - p.sigma * (t.hh - 6.0 * t.kk);
  store(cache, std::move(g2));
  return out;
}

PhaseState sofa_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot, double h,
                     const BrownianTriple& t, GradientCache* cache) {
  check_state(s, pot, h, "sofa_step");
  check_triple(t, s, h, "sofa_step");
  const double phi = coeffs::sofa_phi();
  const Vector xi = p.sigma * (t.w - 12.0 * t.kk);

  // Velocity stage of weight tau: exact flow of v' = -gamma v + (-u g h + xi) / h.
  auto kick = [&](Vector& v, const Vector& g, double tau) {
    const double a = p.gamma * tau * h;
    v = coeffs::phi0(a) * v + (tau * coeffs::phi1(a)) * (xi - (p.u * h) * g);
  };

  Vector v = s.v + p.sigma * (t.hh + 6.0 * t.kk);
  kick(v, gradient_at_start(s, pot, cache), 0.5 + phi);
  Vector x = s.x + ((1.0 + 2.0 * phi) * h) * v;
  kick(v, pot.gradient(x), -phi);
  x -= ((1.0 + 4.0 * phi) * h) * v;
  kick(v, pot.gradient(x), -phi);
  x += ((1.0 + 2.0 * phi) * h) * v;
  Vector g = pot.gradient(x);
  kick(v, g, 0.5 + phi);

  PhaseState out;
  out.x = std::move(x);
  out.v = v - p.sigma * (t.hh - 6.0 * t.kk);
  store(cache, std::move(g));
  return out;
}

PhaseState shifted_ode_reference_step(const PhaseState& s, const DynamicsParams& p,
                                      const Potential& pot, double h, const BrownianTriple& t,
                                      std::size_t inner_steps) {
  check_state(s, pot, h, "shifted_ode_reference_step");
  check_triple(t, s, h, "shifted_ode_reference_step");
  if (inner_steps < 1) {
    throw std::invalid_argument("shifted_ode_reference_step: inner_steps must be at least 1");
  }
  const Vector drive = p.sigma * (t.w - 12.0 * t.kk) / h;
  auto accel = [&](const Vector& x, const Vector& v) -> Vector {
    return -p.gamma * v - p.u * pot.gradient(x) + drive;
  };

  Vector x = s.x;
  Vector v = s.v + p.sigma * (t.hh + 6.0 * t.kk);
  const double dt = h / static_cast<double>(inner_steps);
  for (std::size_t i = 0; i < inner_steps; ++i) {
    const Vector kx1 = v;
    const Vector kv1 = accel(x, v);
    const Vector kx2 = v + 0.5 * dt * kv1;
    const Vector kv2 = accel(x + 0.5 * dt * kx1, kx2);
    const Vector kx3 = v + 0.5 * dt * kv2;
    const Vector kv3 = accel(x + 0.5 * dt * kx2, kx3);
    const Vector kx4 = v + dt * kv3;
    const Vector kv4 = accel(x + dt * kx3, kx4);
    x += (dt / 6.0) * (kx1 + 2.0 * kx2 + 2.0 * kx3 + kx4);
    v += (dt / 6.0) * (kv1 + 2.0 * kv2 + 2.0 * kv3 + kv4);
  }
  return {std::move(x), v - p.sigma * (t.hh - 6.0 * t.kk)};
}

PhaseState log_ode_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                        double h, const BrownianTriple& t, std::size_t inner_steps) {
  BrownianTriple no_k = t;
  no_k.kk = Vector::Zero(t.kk.size());
  return shifted_ode_reference_step(s, p, pot, h, no_k, inner_steps);
}

double contraction_rate(double gamma, double u, double m, double big_m, double lambda) {
  if (!(lambda >= 0.0) || !(lambda < 0.5 * gamma)) {
    throw std::invalid_argument("contraction_rate: need 0 <= lambda < gamma / 2");
  }
  const double lhs = (gamma - lambda) * (gamma - lambda) - u * big_m;
  const double rhs = u * m - lambda * lambda;
  return std::max(lhs, rhs) / (gamma - 2.0 * lambda);
}

}  // namespace kinlang
