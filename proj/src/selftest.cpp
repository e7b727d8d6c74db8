#include "kinlang/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include "kinlang/brownian.hpp"
#include "kinlang/harness.hpp"
#include "kinlang/samplers.hpp"
#include "kinlang/targets.hpp"

namespace kinlang::selftest {

namespace {

constexpr std::uint64_t kSeed = 20240521;

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double rel_gap(const Vector& a, const Vector& b) {
  const double scale = std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
  return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

SuiteResult brownian_identities(Budget budget) {
  SuiteResult r{"brownian-identities", true, {}, {}};
  const std::size_t paths = budget == Budget::full ? 1000 : 100;
  const double gamma = 1.3;
  double worst_triple = 0.0, worst_pair = 0.0, worst_ident = 0.0;
  for (std::size_t i = 0; i < paths; ++i) {
    PhiloxStream rng(kSeed, i, 0, StreamTag::selftest);
    const double h = 0.1 + 1.9 * rng.uniform();
    const FinePath path = FinePath::sample(h, 48, 3, rng);
    const std::size_t cut = 1 + static_cast<std::size_t>(rng.uniform() * 46.0);

    const BrownianTriple whole = path.triple(0, 48);
    const BrownianTriple joined = combine_triples(path.triple(0, cut), path.triple(cut, 48));
    worst_triple = std::max({worst_triple, rel_gap(joined.w, whole.w),
                             rel_gap(joined.hh, whole.hh), rel_gap(joined.kk, whole.kk)});

    const ExpIntegralPair pw = path.exp_pair(gamma, 0, 48);
    const ExpIntegralPair pj =
        combine_exp_pairs(gamma, path.exp_pair(gamma, 0, cut), path.exp_pair(gamma, cut, 48));
    worst_pair = std::max({worst_pair, rel_gap(pj.i1, pw.i1), rel_gap(pj.i2, pw.i2)});

    const Vector lhs = path.double_integral(0, 48);
    const Vector rhs = h * h * (whole.w / 6.0 + whole.hh / 2.0 + whole.kk);
    worst_ident = std::max(worst_ident, rel_gap(rhs, lhs));
  }
  if (worst_triple > 1e-8) {
    r.failures.push_back(fmt("combine-triples: relative gap %.3g > 1e-8", worst_triple));
  }
  if (worst_pair > 1e-8) {
    r.failures.push_back(fmt("combine-exp-pairs: relative gap %.3g > 1e-8", worst_pair));
  }
  if (worst_ident > 1e-8) {
    r.failures.push_back(fmt("double-integral-identity: relative gap %.3g > 1e-8", worst_ident));
  }
  r.passed = r.failures.empty();
  r.summary = fmt("%.0f paths, worst relative gaps %.2g (triples) %.2g (pairs)",
                  static_cast<double>(paths), worst_triple, worst_pair);
  return r;
}

struct Moments2 {
  double var_a, var_b, cov;
};

// Sample (co)variances of columns a, b around a known zero mean.
Moments2 second_moments(const Eigen::MatrixXd& s, int a, int b) {
  const double n = static_cast<double>(s.rows());
  return {s.col(a).squaredNorm() / n, s.col(b).squaredNorm() / n, s.col(a).dot(s.col(b)) / n};
}

SuiteResult brownian_distribution(Budget budget) {
  SuiteResult r{"brownian-distribution", true, {}, {}};
  const std::size_t n = budget == Budget::full ? 100000 : 20000;
  PhiloxStream rng(kSeed, 1, 0, StreamTag::selftest);
  Eigen::MatrixXd s(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const BrownianTriple t = sample_triple(1.0, 1, rng);
    s(i, 0) = t.w[0];
    s(i, 1) = t.hh[0];
    s(i, 2) = t.kk[0];
  }
  const double expected[3] = {1.0, 1.0 / 12.0, 1.0 / 720.0};
  const char* names[3] = {"W", "H", "K"};
  const double nd = static_cast<double>(n);
  for (int c = 0; c < 3; ++c) {
    const double var = s.col(c).squaredNorm() / nd;
    const double se = expected[c] * std::sqrt(2.0 / nd);
    if (std::abs(var - expected[c]) > 4.0 * se) {
      r.failures.push_back(std::string("triple-variance[") + names[c] + "]: " +
                           fmt("%.6g vs %.6g", var, expected[c]));
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      const Moments2 m = second_moments(s, a, b);
      const double rho = m.cov / std::sqrt(m.var_a * m.var_b);
      if (std::abs(rho) >= 4.0 / std::sqrt(nd)) {
        r.failures.push_back(std::string("triple-independence[") + names[a] + names[b] +
                             "]: " + fmt("correlation %.4g", rho));
      }
    }
  }
  r.passed = r.failures.empty();
  r.summary = fmt("%.0f triples at h = 1", nd);
  return r;
}

// Composite Simpson on [0, h] in the lag variable.
double integrate(const std::function<double(double)>& f, double h) {
  const int n = 4000;
  const double dt = h / n;
  double acc = f(0.0) + f(h);
  for (int i = 1; i < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(i * dt);
  return acc * dt / 3.0;
}

SuiteResult exp_pair_covariance(Budget budget) {
  SuiteResult r{"exp-pair-covariance", true, {}, {}};
  const std::size_t n = budget == Budget::full ? 100000 : 20000;
  const double cases[3][2] = {{2.0, 1.0}, {0.5, 1.0}, {2.0, 0.01}};
  for (int k = 0; k < 3; ++k) {
    const double gamma = cases[k][0];
    const double h = cases[k][1];
    auto k1 = [gamma](double lag) { return std::exp(-gamma * lag); };
    auto k2 = [gamma](double lag) { return -std::expm1(-gamma * lag) / gamma; };
    const double v1 = integrate([&](double l) { return k1(l) * k1(l); }, h);
    const double c12 = integrate([&](double l) { return k1(l) * k2(l); }, h);
    const double v2 = integrate([&](double l) { return k2(l) * k2(l); }, h);

    PhiloxStream rng(kSeed, 2 + static_cast<std::uint64_t>(k), 0, StreamTag::selftest);
    Eigen::MatrixXd s(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const ExpIntegralPair p = sample_exp_pair(gamma, h, 1, rng);
      s(i, 0) = p.i1[0];
      s(i, 1) = p.i2[0];
    }
    const Moments2 m = second_moments(s, 0, 1);
    const double nd = static_cast<double>(n);
    const double se1 = v1 * std::sqrt(2.0 / nd);
    const double se2 = v2 * std::sqrt(2.0 / nd);
    const double se12 = std::sqrt((v1 * v2 + c12 * c12) / nd);
    const std::string tag = fmt("(%g, %g)", gamma, h);
    if (std::abs(m.var_a - v1) > 4.0 * se1) {
      r.failures.push_back("exp-pair-var-i1" + tag + fmt(": %.6g vs %.6g", m.var_a, v1));
    }
    if (std::abs(m.var_b - v2) > 4.0 * se2) {
      r.failures.push_back("exp-pair-var-i2" + tag + fmt(": %.6g vs %.6g", m.var_b, v2));
    }
    if (std::abs(m.cov - c12) > 4.0 * se12) {
      r.failures.push_back("exp-pair-cov" + tag + fmt(": %.6g vs %.6g", m.cov, c12));
    }
  }
  r.passed = r.failures.empty();
  r.summary = fmt("%.0f draws per (gamma, h)", static_cast<double>(n));
  return r;
}

struct OrderCase {
  Method method;
  double gamma;
  int power;
};

// One noise-free step from a fixed state against the exact linear flow.
double local_error(Method m, double gamma, double h) {
  Vector diag(2);
  diag << 1.0, 4.0;
  const QuadraticPotential pot(diag);
  const double u = 1.0;
  DynamicsParams p{gamma, u, 0.0};

  PhaseState s{Vector(2), Vector(2)};
  s.x << 1.0, -0.5;
  s.v << 0.3, 0.8;

  StepNoise noise;
  noise.triple = {h, Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)};
  noise.pair = zero_exp_pair(gamma, 2);
  noise.pair_right = zero_exp_pair(gamma, 2);
  const PhaseState out = advance(m, s, p, pot, h, noise, nullptr);

  Eigen::Matrix4d gen = Eigen::Matrix4d::Zero();
  gen.block<2, 2>(0, 2) = Eigen::Matrix2d::Identity();
  gen.block<2, 2>(2, 0) = -u * diag.asDiagonal().toDenseMatrix();
  gen.block<2, 2>(2, 2) = -gamma * Eigen::Matrix2d::Identity();
  const Eigen::Matrix4d flow = (h * gen).exp();
  Eigen::Vector4d z;
  z << s.x, s.v;
  const Eigen::Vector4d exact = flow * z;
  Eigen::Vector4d got;
  got << out.x, out.v;
  return (got - exact).norm();
}

SuiteResult order(Budget) {
  SuiteResult r{"order", true, {}, {}};
  const OrderCase cases[] = {
      {Method::left_point, 2.0, 2}, {Method::strang, 2.0, 3}, {Method::obabo, 2.0, 3},
      {Method::sort, 2.0, 4},       {Method::sofa, 0.0, 5},
  };
  const double hs[] = {0.2, 0.1, 0.05, 0.025};
  std::string summary;
  for (const auto& c : cases) {
    const double target = std::pow(2.0, c.power);
    double prev = local_error(c.method, c.gamma, hs[0]);
    bool ok = true;
    std::string ratios;
    for (int i = 1; i < 4; ++i) {
      const double cur = local_error(c.method, c.gamma, hs[i]);
      const double ratio = prev / cur;
      ratios += fmt(i == 1 ? "%.2f" : " %.2f", ratio);
      if (!(std::abs(ratio - target) <= 0.25 * target)) ok = false;
      prev = cur;
    }
    if (!ok) {
      r.failures.push_back("deterministic-order[" + std::string(method_name(c.method)) +
                           "]: halving ratios " + ratios + fmt(", expected %.0f", target));
    }
    summary += (summary.empty() ? "" : "; ") + std::string(method_name(c.method)) + " " + ratios;
  }
  r.passed = r.failures.empty();
  r.summary = summary;
  return r;
}

SuiteResult phase_volume(Budget budget) {
  SuiteResult r{"phase-volume", true, {}, {}};
  const Dataset ds = make_synthetic_dataset(20, 2, kSeed);
  const LogisticPotential pot(ds.features, ds.labels, 0.1);
  const std::size_t states = budget == Budget::full ? 20 : 8;
  const double cases[2][2] = {{2.0, 0.1}, {1.0, 0.5}};
  double worst = 0.0;
  for (const auto& c : cases) {
    const DynamicsParams p = DynamicsParams::make(c[0], 1.0);
    const double h = c[1];
    const double expected = std::exp(-c[0] * h);
    for (std::size_t k = 0; k < states; ++k) {
      PhiloxStream rng(kSeed, 10 + k, 0, StreamTag::selftest);
      PhaseState s{Vector(2), Vector(2)};
      for (int i = 0; i < 2; ++i) s.x[i] = rng.normal();
      for (int i = 0; i < 2; ++i) s.v[i] = rng.normal();
      const BrownianTriple t = sample_triple(h, 2, rng);

      auto map = [&](const Eigen::Vector4d& z) {
        const PhaseState in{z.head<2>(), z.tail<2>()};
        const PhaseState out = sofa_step(in, p, pot, h, t);
        Eigen::Vector4d o;
        o << out.x, out.v;
        return o;
      };
      Eigen::Vector4d z;
      z << s.x, s.v;
      const double eps = 1e-5;
      Eigen::Matrix4d jac;
      for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d dz = Eigen::Vector4d::Zero();
        dz[j] = eps;
        jac.col(j) = (map(z + dz) - map(z - dz)) / (2.0 * eps);
      }
      // Each velocity stage scales all d components, so det J = e^{-d gamma h}.
      const double per_dof = std::pow(jac.determinant(), 0.5);
      worst = std::max(worst, std::abs(per_dof / expected - 1.0));
    }
  }
  if (worst > 1e-5) {
    r.failures.push_back(fmt("sofa-phase-volume: relative deviation %.3g > 1e-5", worst));
  }
  r.passed = r.failures.empty();
  r.summary = fmt("worst relative deviation of det^(1/d) from exp(-gamma h): %.2g", worst);
  return r;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "brownian-identities", "brownian-distribution", "exp-pair-covariance", "order",
      "phase-volume"};
  return names;
}

SuiteResult run_suite(std::string_view name, Budget budget) {
  if (name == "brownian-identities") return brownian_identities(budget);
  if (name == "brownian-distribution") return brownian_distribution(budget);
  if (name == "exp-pair-covariance") return exp_pair_covariance(budget);
  if (name == "order") return order(budget);
  if (name == "phase-volume") return phase_volume(budget);
  throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
}

std::vector<SuiteResult> run(std::string_view only, Budget budget) {
  std::vector<SuiteResult> out;
  if (!only.empty()) {
    out.push_back(run_suite(only, budget));
    return out;
  }
  for (const auto& name : suite_names()) out.push_back(run_suite(name, budget));
  return out;
}

}  // namespace kinlang::selftest
