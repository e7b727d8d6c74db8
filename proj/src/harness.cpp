#include "kinlang/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace kinlang {

namespace {

struct MethodInfo {
  Method method;
  std::string_view name;
  NoiseFamily family;
};

constexpr MethodInfo kMethods[] = {
    {Method::left_point, "left-point", NoiseFamily::exp_pair},
    {Method::strang, "strang", NoiseFamily::exp_pair},
    {Method::obabo, "obabo", NoiseFamily::half_exp_pairs},
    {Method::randomized_midpoint, "randomized-midpoint", NoiseFamily::midpoint},
    {Method::log_ode, "log-ode", NoiseFamily::triple},
    {Method::sort, "sort", NoiseFamily::triple},
    {Method::sofa, "sofa", NoiseFamily::triple},
};

const MethodInfo& info(Method m) {
  for (const auto& i : kMethods) {
    if (i.method == m) return i;
  }
  throw std::invalid_argument("unknown method");
}

StreamTag tag_for(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::exp_pair: return StreamTag::exp_pair;
    case NoiseFamily::half_exp_pairs: return StreamTag::half_exp_pairs;
    case NoiseFamily::midpoint: return StreamTag::midpoint;
    case NoiseFamily::triple: return StreamTag::triple;
  }
  throw std::invalid_argument("unknown noise family");
}

// Key of the initial-state stream; no step index reaches it.
constexpr std::uint64_t kInitialStep = std::numeric_limits<std::uint64_t>::max();

void check_finite(const PhaseState& s, Method m, std::uint64_t step, std::uint64_t chain) {
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    if (!(std::abs(s.x[i]) <= kDivergenceThreshold)) {
      throw DivergenceError(std::string(method_name(m)) + " diverged at step " +
                                std::to_string(step) + " of chain " + std::to_string(chain) +
                                " (|x| > 1e8)",
                            step);
    }
  }
}

// Runs body(i) for i in [0, n) on `threads` workers. The exception from the
// lowest failing index is rethrown, so the outcome does not depend on timing.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) return;
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = sum_ + y;
    c_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

bool near_vec(const Vector& a, const Vector& b) {
  const double scale = 1.0 + std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>());
  return (a - b).lpNorm<Eigen::Infinity>() <= 1e-9 * scale;
}

[[noreturn]] void sync_failure(Method m, std::uint64_t step) {
  throw std::logic_error(std::string(method_name(m)) +
                         ": coarse noise is not the combination of its fine noise at step " +
                         std::to_string(step));
}

// Fine noise for steps 2j and 2j + 1 (size h / 2) and the coarse noise for
// step j (size h), all read off the same Brownian path.
void coupled_noise(Method m, double gamma, double h, std::size_t d, std::uint64_t seed,
                   std::uint64_t chain, std::uint64_t j, StepNoise& f0, StepNoise& f1,
                   StepNoise& c) {
  const double hf = 0.5 * h;
  const NoiseFamily family = noise_family(m);
  const StreamTag tag = tag_for(family);
  switch (family) {
    case NoiseFamily::triple: {
      PhiloxStream r0(seed, chain, 2 * j, tag);
      PhiloxStream r1(seed, chain, 2 * j + 1, tag);
      f0.triple = sample_triple(hf, d, r0);
      f1.triple = sample_triple(hf, d, r1);
      c.triple = combine_triples(f0.triple, f1.triple);
      if (!near_vec(c.triple.w, f0.triple.w + f1.triple.w)) sync_failure(m, j);
      break;
    }
    case NoiseFamily::exp_pair: {
      PhiloxStream r0(seed, chain, 2 * j, tag);
      PhiloxStream r1(seed, chain, 2 * j + 1, tag);
      f0.pair = sample_exp_pair(gamma, hf, d, r0);
      f1.pair = sample_exp_pair(gamma, hf, d, r1);
      c.pair = combine_exp_pairs(gamma, f0.pair, f1.pair);
      if (std::abs(c.pair.h - h) > 1e-12 * h) sync_failure(m, j);
      break;
    }
    case NoiseFamily::half_exp_pairs: {
      PhiloxStream r0(seed, chain, 2 * j, tag);
      PhiloxStream r1(seed, chain, 2 * j + 1, tag);
      f0.pair = sample_exp_pair(gamma, 0.5 * hf, d, r0);
      f0.pair_right = sample_exp_pair(gamma, 0.5 * hf, d, r0);
      f1.pair = sample_exp_pair(gamma, 0.5 * hf, d, r1);
      f1.pair_right = sample_exp_pair(gamma, 0.5 * hf, d, r1);
      c.pair = combine_exp_pairs(gamma, f0.pair, f0.pair_right);
      c.pair_right = combine_exp_pairs(gamma, f1.pair, f1.pair_right);
      if (std::abs(c.pair.h - hf) > 1e-12 * h || std::abs(c.pair_right.h - hf) > 1e-12 * h) {
        sync_failure(m, j);
      }
      break;
    }
    case NoiseFamily::midpoint: {
      PhiloxStream r(seed, chain, j, tag);
      const MidpointSplit split = split_midpoint_structure(gamma, h, d, r);
      c.midpoint = split.coarse();
      f0.midpoint = split.fine_left();
      f1.midpoint = split.fine_right();
      const ExpIntegralPair rejoined = combine_exp_pairs(gamma, split.s_z, split.z_t);
      if (!near_vec(rejoined.i1, split.s_t.i1) || !near_vec(rejoined.i2, split.s_t.i2)) {
        sync_failure(m, j);
      }
      break;
    }
  }
}

double coupled_distance(Method m, const Potential& pot, const DynamicsParams& p, double h,
                        std::size_t N, std::uint64_t seed, std::uint64_t chain,
                        const RunOptions& opts) {
  const std::size_t d = pot.dim();
  PhaseState coarse = initial_state(d, p, seed, chain, opts);
  PhaseState fine = coarse;
  GradientCache coarse_cache;
  GradientCache fine_cache;
  StepNoise f0, f1, c;
  for (std::uint64_t j = 0; j < N; ++j) {
    coupled_noise(m, p.gamma, h, d, seed, chain, j, f0, f1, c);
    fine = advance(m, fine, p, pot, 0.5 * h, f0, &fine_cache, opts.inner_steps);
    check_finite(fine, m, 2 * j, chain);
    fine = advance(m, fine, p, pot, 0.5 * h, f1, &fine_cache, opts.inner_steps);
    check_finite(fine, m, 2 * j + 1, chain);
    coarse = advance(m, coarse, p, pot, h, c, &coarse_cache, opts.inner_steps);
    check_finite(coarse, m, j, chain);
  }
  double dist = (coarse.x - fine.x).squaredNorm();
  if (opts.phase_norm) dist += (coarse.v - fine.v).squaredNorm();
  return dist;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string_view method_name(Method m) { return info(m).name; }

Method parse_method(std::string_view name) {
  for (const auto& i : kMethods) {
    if (i.name == name) return i.method;
  }
  std::string known;
  for (const auto& i : kMethods) known += (known.empty() ? "" : ", ") + std::string(i.name);
  throw std::invalid_argument("unknown method '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<Method> parse_method_list(std::string_view list) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t comma = list.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? list.size() : comma;
    out.push_back(parse_method(list.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& i : kMethods) v.push_back(i.method);
    return v;
  }();
  return methods;
}

NoiseFamily noise_family(Method m) { return info(m).family; }

StepNoise draw_step_noise(Method m, double gamma, double h, std::size_t d, RandomSource& rng) {
  StepNoise n;
  switch (noise_family(m)) {
    case NoiseFamily::triple:
      n.triple = sample_triple(h, d, rng);
      break;
    case NoiseFamily::exp_pair:
      n.pair = sample_exp_pair(gamma, h, d, rng);
      break;
    case NoiseFamily::half_exp_pairs:
      n.pair = sample_exp_pair(gamma, 0.5 * h, d, rng);
      n.pair_right = sample_exp_pair(gamma, 0.5 * h, d, rng);
      break;
    case NoiseFamily::midpoint: {
      const double alpha = rng.uniform();
      const ExpIntegralPair head = sample_exp_pair(gamma, alpha * h, d, rng);
      const ExpIntegralPair tail = sample_exp_pair(gamma, h - alpha * h, d, rng);
      n.midpoint = {alpha, head, combine_exp_pairs(gamma, head, tail)};
      break;
    }
  }
  return n;
}

PhaseState advance(Method m, const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                   double h, const StepNoise& noise, GradientCache* cache,
                   std::size_t inner_steps) {
  switch (m) {
    case Method::left_point: return left_point_step(s, p, pot, h, noise.pair, cache);
    case Method::strang: return strang_step(s, p, pot, h, noise.pair, cache);
    case Method::obabo: return obabo_step(s, p, pot, h, noise.pair, noise.pair_right, cache).state;
    case Method::randomized_midpoint:
      return randomized_midpoint_step(s, p, pot, h, noise.midpoint, cache);
    case Method::log_ode: {
      if (cache != nullptr) cache->valid = false;
      return log_ode_step(s, p, pot, h, noise.triple, inner_steps);
    }
    case Method::sort: return sort_step(s, p, pot, h, noise.triple, cache);
    case Method::sofa: return sofa_step(s, p, pot, h, noise.triple, cache);
  }
  throw std::invalid_argument("advance: unknown method");
}

PhaseState initial_state(std::size_t d, const DynamicsParams& p, std::uint64_t seed,
                         std::uint64_t chain, const RunOptions& opts) {
  if (!(opts.x0_var >= 0.0)) throw std::invalid_argument("initial_state: x0_var must be >= 0");
  PhiloxStream rng(seed, chain, kInitialStep, StreamTag::initial_state);
  const double sx = std::sqrt(opts.x0_var);
  const double sv = std::sqrt(opts.v0_var < 0.0 ? p.u : opts.v0_var);
  PhaseState s{Vector(static_cast<Eigen::Index>(d)), Vector(static_cast<Eigen::Index>(d))};
  for (Eigen::Index i = 0; i < s.x.size(); ++i) s.x[i] = sx * rng.normal();
  for (Eigen::Index i = 0; i < s.v.size(); ++i) s.v[i] = sv * rng.normal();
  return s;
}

std::size_t step_count(double T, double h) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("T must be positive");
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument("h must be positive");
  const double ratio = std::round(T / h);
  if (ratio < 1.0 || std::abs(ratio * h - T) > 1e-9 * std::max(1.0, T)) {
    throw std::invalid_argument("h = " + format_double(h) + " does not divide T = " +
                                format_double(T));
  }
  return static_cast<std::size_t>(ratio);
}

ErrorRow strong_error(Method m, const Potential& pot, const DynamicsParams& p, double T, double h,
                      std::size_t n, std::uint64_t seed, const RunOptions& opts) {
  if (n < 2) throw std::invalid_argument("strong_error: need at least 2 samples");
  const std::size_t N = step_count(T, h);
  if (noise_family(m) != NoiseFamily::triple && !(p.gamma > 0.0)) {
    throw std::invalid_argument(std::string(method_name(m)) + " needs gamma > 0");
  }
  const auto start = std::chrono::steady_clock::now();

  std::vector<double> dist(n);
  parallel_for(n, opts.threads, [&](std::size_t i) {
    dist[i] = coupled_distance(m, pot, p, h, N, seed, i, opts);
  });

  KahanSum total;
  for (double e : dist) total.add(e);
  const double mean = total.value() / static_cast<double>(n);
  KahanSum spread;
  for (double e : dist) spread.add((e - mean) * (e - mean));
  const double var = spread.value() / static_cast<double>(n - 1);
  const double se_sq = std::sqrt(var / static_cast<double>(n));

  ErrorRow row;
  row.method = m;
  row.h = h;
  row.N = N;
  row.samples = n;
  row.s_value = std::sqrt(mean);
  row.std_err = row.s_value > 0.0 ? se_sq / (2.0 * row.s_value) : 0.0;
  row.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

OrderFit fit_order(const std::vector<ErrorRow>& rows) {
  OrderFit fit;
  std::vector<double> lx, ly;
  for (const auto& r : rows) {
    if (r.s_value > 0.0 && r.h > 0.0) {
      lx.push_back(std::log(r.h));
      ly.push_back(std::log(r.s_value));
    } else {
      ++fit.excluded;
    }
  }
  fit.used = lx.size();
  if (fit.used < 3) {
    throw std::invalid_argument("fit_order: need at least 3 rows with positive S, have " +
                                std::to_string(fit.used));
  }
  const double k = static_cast<double>(fit.used);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_order: step sizes must differ");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

MomentReport stationary_moments(Method m, const Potential& pot, const DynamicsParams& p, double h,
                                std::size_t burn_in, std::size_t n_steps, std::uint64_t seed,
                                const RunOptions& opts, std::size_t batches) {
  if (batches < 2 || n_steps < batches) {
    throw std::invalid_argument("stationary_moments: need n_steps >= batches >= 2");
  }
  const std::size_t d = pot.dim();
  const auto di = static_cast<Eigen::Index>(d);
  const StreamTag tag = tag_for(noise_family(m));
  PhaseState s = initial_state(d, p, seed, 0, opts);
  GradientCache cache;

  auto step = [&](std::uint64_t k) {
    PhiloxStream rng(seed, 0, k, tag);
    const StepNoise noise = draw_step_noise(m, p.gamma, h, d, rng);
    s = advance(m, s, p, pot, h, noise, &cache, opts.inner_steps);
    check_finite(s, m, k, 0);
  };
  for (std::uint64_t k = 0; k < burn_in; ++k) step(k);

  const std::size_t per_batch = n_steps / batches;
  Eigen::MatrixXd bx(di, batches), bxx(di, batches), bv(di, batches), bvv(di, batches);
  std::uint64_t k = burn_in;
  for (std::size_t b = 0; b < batches; ++b) {
    Vector sx = Vector::Zero(di), sxx = Vector::Zero(di);
    Vector sv = Vector::Zero(di), svv = Vector::Zero(di);
    for (std::size_t i = 0; i < per_batch; ++i, ++k) {
      step(k);
      sx += s.x;
      sxx += s.x.cwiseAbs2();
      sv += s.v;
      svv += s.v.cwiseAbs2();
    }
    const double inv = 1.0 / static_cast<double>(per_batch);
    bx.col(static_cast<Eigen::Index>(b)) = sx * inv;
    bxx.col(static_cast<Eigen::Index>(b)) = sxx * inv;
    bv.col(static_cast<Eigen::Index>(b)) = sv * inv;
    bvv.col(static_cast<Eigen::Index>(b)) = svv * inv;
  }

  const double nb = static_cast<double>(batches);
  auto summarize = [&](const Eigen::MatrixXd& first, const Eigen::MatrixXd& second, Vector& mean,
                       Vector& var, Vector& err) {
    mean = first.rowwise().mean();
    var = second.rowwise().mean() - mean.cwiseAbs2();
    const Eigen::MatrixXd per_batch_var = second - first.cwiseAbs2();
    const Vector centre = per_batch_var.rowwise().mean();
    err = ((per_batch_var.colwise() - centre).cwiseAbs2().rowwise().sum() / (nb - 1.0) / nb)
              .cwiseSqrt();
  };
  MomentReport r;
  r.batches = batches;
  summarize(bx, bxx, r.mean_x, r.var_x, r.var_x_err);
  summarize(bv, bvv, r.mean_v, r.var_v, r.var_v_err);
  return r;
}

std::vector<PhaseState> sample_chains(Method m, const Potential& pot, const DynamicsParams& p,
                                      double h, std::size_t steps, std::size_t n,
                                      std::uint64_t seed, const RunOptions& opts) {
  const std::size_t d = pot.dim();
  const StreamTag tag = tag_for(noise_family(m));
  std::vector<PhaseState> out(n);
  parallel_for(n, opts.threads, [&](std::size_t c) {
    PhaseState s = initial_state(d, p, seed, c, opts);
    GradientCache cache;
    for (std::uint64_t k = 0; k < steps; ++k) {
      PhiloxStream rng(seed, c, k, tag);
      const StepNoise noise = draw_step_noise(m, p.gamma, h, d, rng);
      s = advance(m, s, p, pot, h, noise, &cache, opts.inner_steps);
      check_finite(s, m, k, c);
    }
    out[c] = std::move(s);
  });
  return out;
}

void validate(const StudyConfig& cfg) {
  if (cfg.methods.empty()) throw std::invalid_argument("study: no methods given");
  if (cfg.h_grid.empty()) throw std::invalid_argument("study: no step sizes given");
  if (cfg.n < 2) throw std::invalid_argument("study: need at least 2 samples");
  for (std::size_t i = 0; i < cfg.h_grid.size(); ++i) {
    step_count(cfg.T, cfg.h_grid[i]);
    if (i > 0 && !(cfg.h_grid[i] < cfg.h_grid[i - 1])) {
      throw std::invalid_argument("study: step sizes must be strictly decreasing");
    }
  }
  if (!(cfg.gamma > 0.0)) throw std::invalid_argument("study: gamma must be positive");
  DynamicsParams::make(cfg.gamma, cfg.u);
  if (cfg.run.inner_steps < 1) throw std::invalid_argument("study: inner steps must be >= 1");
}

StudyResult run_study(const StudyConfig& cfg, const Potential& pot, const RowSink& sink) {
  validate(cfg);
  const DynamicsParams p = DynamicsParams::make(cfg.gamma, cfg.u);
  StudyResult result;
  for (Method m : cfg.methods) {
    std::vector<ErrorRow> rows;
    for (double h : cfg.h_grid) {
      ErrorRow row = strong_error(m, pot, p, cfg.T, h, cfg.n, cfg.seed, cfg.run);
      if (sink) sink(row);
      rows.push_back(row);
      result.rows.push_back(row);
    }
    MethodFit mf;
    mf.method = m;
    try {
      mf.fit = fit_order(rows);
      mf.ok = true;
    } catch (const std::invalid_argument& e) {
      mf.error = e.what();
    }
    result.fits.push_back(mf);
  }
  return result;
}

void write_csv_header(std::ostream& out) {
  out << "method,h,N,samples,s_value,std_err,wall_time_s\n";
}

void write_csv_row(std::ostream& out, const ErrorRow& row) {
  out << method_name(row.method) << ',' << format_double(row.h) << ',' << row.N << ','
      << row.samples << ',' << format_double(row.s_value) << ',' << format_double(row.std_err)
      << ',' << format_double(row.wall_time_s) << '\n';
}

}  // namespace kinlang
