#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kinlang/brownian.hpp"
#include "kinlang/samplers.hpp"
#include "kinlang/targets.hpp"

namespace kinlang {

enum class Method { left_point, strang, obabo, randomized_midpoint, log_ode, sort, sofa };

/// Which random variables a method consumes each step.
enum class NoiseFamily {
  exp_pair,        // one (i1, i2) pair over the step
  half_exp_pairs,  // two pairs, one per half step
  midpoint,        // uniform alpha plus pairs over [0, alpha h] and [0, h]
  triple,          // (W, H, K)
};

std::string_view method_name(Method m);
/// Accepts the names printed by method_name; throws std::invalid_argument.
Method parse_method(std::string_view name);
std::vector<Method> parse_method_list(std::string_view comma_separated);
const std::vector<Method>& all_methods();
NoiseFamily noise_family(Method m);

/// Raised when a trajectory leaves |x_i| <= 1e8.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::uint64_t step)
      : std::runtime_error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

inline constexpr double kDivergenceThreshold = 1e8;

/// Noise for one step of any method; only the fields of its family are set.
struct StepNoise {
  BrownianTriple triple;
  ExpIntegralPair pair;
  ExpIntegralPair pair_right;  // second half step, half_exp_pairs only
  MidpointNoise midpoint;
};

StepNoise draw_step_noise(Method m, double gamma, double h, std::size_t d, RandomSource& rng);

PhaseState advance(Method m, const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                   double h, const StepNoise& noise, GradientCache* cache,
                   std::size_t inner_steps = kDefaultInnerSteps);

struct RunOptions {
  std::size_t threads = 1;
  std::size_t inner_steps = kDefaultInnerSteps;
  /// Measure the distance on (x, v) instead of x alone.
  bool phase_norm = false;
  double x0_var = 10.0;
  /// Negative means u, the stationary velocity variance.
  double v0_var = -1.0;
};

/// Initial state of chain `chain`: x0 ~ N(0, x0_var I), v0 ~ N(0, v0_var I).
PhaseState initial_state(std::size_t d, const DynamicsParams& p, std::uint64_t seed,
                         std::uint64_t chain, const RunOptions& opts);

struct ErrorRow {
  Method method{};
  double h = 0.0;
  std::size_t N = 0;
  std::size_t samples = 0;
  double s_value = 0.0;
  double std_err = 0.0;  // of s_value, mapped from that of S^2
  double wall_time_s = 0.0;
};

/// Number of steps of size h in [0, T]; throws unless N h = T within 1e-9.
std::size_t step_count(double T, double h);

/// Coarse chain at step h against fine chain at h / 2 on the same Brownian
/// path, n independent paths, root-mean-square distance at time T.
ErrorRow strong_error(Method m, const Potential& pot, const DynamicsParams& p, double T, double h,
                      std::size_t n, std::uint64_t seed, const RunOptions& opts = {});

struct OrderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // rows with s_value = 0
};

/// Least squares of log S on log h. Throws with fewer than 3 usable rows.
OrderFit fit_order(const std::vector<ErrorRow>& rows);

struct MomentReport {
  Vector mean_x, mean_v;
  Vector var_x, var_v;
  Vector var_x_err, var_v_err;  // batch-means standard errors
  std::size_t batches = 0;
};

MomentReport stationary_moments(Method m, const Potential& pot, const DynamicsParams& p, double h,
                                std::size_t burn_in, std::size_t n_steps, std::uint64_t seed,
                                const RunOptions& opts = {}, std::size_t batches = 20);

/// Final states of n independent chains after `steps` steps of size h.
std::vector<PhaseState> sample_chains(Method m, const Potential& pot, const DynamicsParams& p,
                                      double h, std::size_t steps, std::size_t n,
                                      std::uint64_t seed, const RunOptions& opts = {});

struct StudyConfig {
  double T = 0.0;
  std::vector<double> h_grid;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::vector<Method> methods;
  double gamma = 2.0;
  double u = 1.0;
  RunOptions run;
};

void validate(const StudyConfig& cfg);

struct MethodFit {
  Method method{};
  bool ok = false;
  OrderFit fit;
  std::string error;  // why no fit was possible
};

struct StudyResult {
  std::vector<ErrorRow> rows;
  std::vector<MethodFit> fits;
};

using RowSink = std::function<void(const ErrorRow&)>;

/// Method-major, h-descending sweep. Each row is passed to `sink` as soon as
/// it is complete.
StudyResult run_study(const StudyConfig& cfg, const Potential& pot, const RowSink& sink = {});

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const ErrorRow& row);

}  // namespace kinlang
