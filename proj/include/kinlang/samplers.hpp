#pragma once

#include <cstddef>

#include "kinlang/brownian.hpp"
#include "kinlang/targets.hpp"

namespace kinlang {

struct PhaseState {
  Vector x;
  Vector v;
};

/// Friction gamma, inverse mass u and the derived noise scale sqrt(2 gamma u).
struct DynamicsParams {
  double gamma = 0.0;
  double u = 0.0;
  double sigma = 0.0;

  /// gamma >= 0 (zero gives Hamiltonian dynamics) and u > 0.
  static DynamicsParams make(double gamma, double u);
};

/// Gradient at the current position, carried between steps so methods that
/// end on a gradient evaluation do not repeat it.
struct GradientCache {
  Vector grad;
  bool valid = false;
};

// Every step below is a pure function of its arguments. An exp-integral pair
// built by zero_exp_pair (length zero) is accepted as "no noise" for any h.
// When `cache` is given and valid it must hold the gradient at s.x; on return
// it holds the gradient at the new position, or is invalidated.

PhaseState left_point_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                           double h, const ExpIntegralPair& z, GradientCache* cache = nullptr);

PhaseState strang_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                       double h, const ExpIntegralPair& z, GradientCache* cache = nullptr);

struct ObaboResult {
  PhaseState state;
  /// x_n + (v0 + v1) h / 4.
  Vector midpoint_x;
};

/// z_left and z_right cover the two halves of the step.
ObaboResult obabo_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                       double h, const ExpIntegralPair& z_left, const ExpIntegralPair& z_right,
                       GradientCache* cache = nullptr);

PhaseState randomized_midpoint_step(const PhaseState& s, const DynamicsParams& p,
                                    const Potential& pot, double h, const MidpointNoise& noise,
                                    GradientCache* cache = nullptr);

PhaseState sort_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot, double h,
                     const BrownianTriple& t, GradientCache* cache = nullptr);

PhaseState sofa_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot, double h,
                     const BrownianTriple& t, GradientCache* cache = nullptr);

inline constexpr std::size_t kDefaultInnerSteps = 16;

/// The shifted ODE integrated with classical RK4 on `inner_steps` uniform
/// sub-steps, between the entry shift +sigma (H + 6K) and exit shift
/// -sigma (H - 6K) of the velocity.
PhaseState shifted_ode_reference_step(const PhaseState& s, const DynamicsParams& p,
                                      const Potential& pot, double h, const BrownianTriple& t,
                                      std::size_t inner_steps = kDefaultInnerSteps);

/// shifted_ode_reference_step with K set to zero.
PhaseState log_ode_step(const PhaseState& s, const DynamicsParams& p, const Potential& pot,
                        double h, const BrownianTriple& t,
                        std::size_t inner_steps = kDefaultInnerSteps);

/// ((gamma - lambda)^2 - u M) max (u m - lambda^2), divided by gamma - 2 lambda.
double contraction_rate(double gamma, double u, double m, double big_m, double lambda);

namespace testing {
/// Flips the sign of one SORT coefficient while set. Only the self-test's
/// mutation check touches this.
void set_sort_fault(bool enabled);
bool sort_fault();
}  // namespace testing

}  // namespace kinlang
