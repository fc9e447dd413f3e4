#pragma once

#include <cstdint>

#include "hjb/grid_function.hpp"
#include "hjb/hamiltonian.hpp"
#include "hjb/spectral_model.hpp"

namespace hjb {

// Admissible control policies: zero, a constant point of U, or the feedback
// u(x) = argmin H_cv(grad_B v(x_proj), .) synthesized from a solved value
// function carrying its gradient grid.
struct Policy {
  enum class Kind { Zero, Constant, Feedback };
  Kind kind = Kind::Zero;
  Vector constant;
  const GridFunction* value = nullptr;
  const HamiltonianSpec* ham = nullptr;

  Vector control(const SpectralModel& model, const Vector& x) const;

  static Policy zero(int d_u);
  static Policy constant_control(Vector u);
  static Policy feedback(const GridFunction& v, const HamiltonianSpec& ham);
};

struct PathEnsemble {
  Matrix final_states;                 // n_paths x n_total
  std::vector<Matrix> trajectories;    // per path (steps+1) x n_total, if stored
  int steps = 0;
  double dt = 0.0;
};

// Exact Ornstein-Uhlenbeck stepping with piecewise-constant controls:
//   x_{k+1} = e^{dt A} x_k + (int_0^dt e^{sA} B ds) u_k + N(0, Q_dt).
// Per-path keyed noise streams make the ensemble independent of scheduling.
PathEnsemble simulate_paths(const SpectralModel& model, const Vector& x0,
                            const Policy& policy, double dt, double horizon,
                            Eigen::Index n_paths, std::uint64_t seed,
                            bool store_trajectories = false);

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  Eigen::Index paths = 0;
  double horizon = 0.0;
  double tail_bound = 0.0;

  double ci_half_width() const { return 1.96 * std_error + tail_bound; }
};

struct SimulationConfig {
  double dt = 5e-3;
  double horizon = -1.0;  // <= 0: derived from the discount tail rule
  Eigen::Index n_paths = 10000;
  std::uint64_t seed = 1;
};

// Discounted running-cost estimate of a policy from x0: per-step exact
// discount weights with trapezoidal state cost along each path.
CostEstimate evaluate_policy_cost(const SpectralModel& model, const HamiltonianSpec& ham,
                                  const CostSpec& cost, const Vector& x0,
                                  const Policy& policy, double lambda,
                                  const SimulationConfig& sim);

}  // namespace hjb
