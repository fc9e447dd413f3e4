#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hjb/gaussian_semigroup.hpp"
#include "hjb/grid_function.hpp"
#include "hjb/hamiltonian.hpp"
#include "hjb/lifted.hpp"
#include "hjb/quadrature.hpp"
#include "hjb/spectral_model.hpp"

namespace hjb {

struct SolverConfig {
  double lambda = 1.0;

  // time quadrature: substituted panels near zero plus a geometric tail
  double t_max = -1.0;       // <= 0 derives it from the discount tail rule
  int panels_singular = 48;
  int panels_tail = 32;
  int panel_order = 4;       // 1 = composite midpoint, else Gauss-Legendre

  // spatial grid over the projected coordinates
  std::vector<double> box_extents;  // explicit per-axis half widths; empty derives
  int nodes_per_axis = 1201;
  double box_sigma_mult = 6.0;

  QuadratureRule quad = QuadratureRule::gauss_hermite(32);

  double tol_picard = 1e-6;
  int max_iterations = 300;
  double damping = 1.0;  // theta in (0, 1]

  double nu_anchor = -1.0;  // <= 0 uses 1.5 * lambda0
  double tol_outer = 1e-5;
  int max_outer_iterations = 400;

  double theta_contraction = 0.9;
  std::optional<SmoothingFit> smoothing;  // (kappa0, gamma) feeding the mesh and lambda0

  void validate() const;
  double fitted_gamma() const;   // clamped into (0.05, 0.95); 0.5 without a fit
  double fitted_kappa0() const;  // 1.0 without a fit
};

struct ConvergenceTrace {
  std::vector<double> deltas;      // sup-norm iterate changes
  std::vector<double> ratios;      // delta ratios, reported from iteration 2
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
  double residual_bound = 0.0;     // reported a-posteriori bound
  double error_budget = 0.0;       // tail + interpolation margin of the last apply
  double wall_seconds = 0.0;

  std::vector<double> outer_deltas;
  std::vector<double> outer_ratios;
  int outer_iterations = 0;

  // Largest delta ratio over iterations whose predecessor delta exceeds
  // `floor`, the empirical contraction estimate away from the noise level.
  double empirical_ratio(double floor) const;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, ConvergenceTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  ConvergenceTrace trace;
};

// Graded discount quadrature: t = s^{1/(1 - gamma)} substitution on [0, 1]
// and geometric Gauss-Legendre panels on [1, t_max].
struct TimeMesh {
  std::vector<double> nodes;
  std::vector<double> weights;  // Lebesgue weights; discount applied by the caller
  double t_max = 0.0;

  static TimeMesh build(double lambda, const SolverConfig& cfg);
};

// T_lambda as a pair of dense grid operators (values and B-gradients),
// assembled once per (model, axes, lambda) and applied as matrix products.
// Row g of the value operator integrates the multilinear interpolation
// weights of flow(t, x_g) + noise over the discounted time mesh, so the
// operator inherits positivity and the 1/lambda row-sum bound.
class ResolventOperator {
 public:
  ResolventOperator(const SpectralModel& model, std::vector<std::vector<double>> axes,
                    double lambda, const SolverConfig& cfg);

  // source: node values of psi.  Output carries values and gradient grids;
  // throws when the requested tolerance cannot be met by the mesh.
  GridFunction apply(const Vector& source) const;

  double lambda() const { return lambda_; }
  const std::vector<std::vector<double>>& axes() const { return axes_; }
  const TimeMesh& mesh() const { return mesh_; }
  Eigen::Index grid_size() const { return op_value_.rows(); }
  double tail_factor() const { return tail_factor_; }  // e^{-lambda t_max}/lambda
  // quadrature value of int e^{-lambda t} kappa0 (1 v t^-gamma) dt on this mesh
  double gradient_constant() const { return c_lambda_gamma_; }

  // Discounted mass each row picked up from clamped (outside-the-box)
  // stencil points.  Rows with mass about 1/lambda * 1e-9 or more see the
  // boundary extension rather than the true field; sup-norm checks restrict
  // to the complement.
  const Vector& boundary_mass() const { return boundary_mass_; }
  std::vector<bool> faithful_nodes(double rel_threshold = 1e-9) const;

 private:
  std::vector<std::vector<double>> axes_;
  double lambda_;
  TimeMesh mesh_;
  double tail_factor_ = 0.0;
  double c_lambda_gamma_ = 0.0;
  double requested_tol_ = 1e-6;
  Matrix op_value_;               // n x n
  std::vector<Matrix> op_grad_;   // d_U dense operators
  Vector boundary_mass_;
};

// Sup-norm of (a - b) over the nodes both operators represent faithfully.
double faithful_sup_diff(const Vector& a, const Vector& b,
                         const std::vector<bool>& faithful);

// One-off T_lambda psi on the configured grid (values plus B-gradients);
// psi is node-sampled.  Solver loops use a shared ResolventOperator instead.
GridFunction resolvent_apply(const SpectralModel& model, const ScalarField& psi,
                             double lambda, const SolverConfig& cfg);
GridFunction resolvent_apply(const SpectralModel& model, const GridFunction& psi,
                             double lambda, const SolverConfig& cfg);

// Closed-form C_{lambda, gamma} = kappa0 int_0^inf e^{-lambda t}(1 v t^-gamma) dt
// via the lower incomplete gamma function.
double contraction_constant(double lambda, double kappa0, double gamma);

// Smallest lambda with Lip(H_min) * C_{lambda, gamma} <= theta, by bisection.
// Requires cfg.smoothing.
double estimate_lambda0(const SpectralModel& model, const HamiltonianSpec& ham,
                        const SolverConfig& cfg);

// Spatial axes derived from the config (explicit extents or sigma multiples).
std::vector<std::vector<double>> solver_axes(const SpectralModel& model,
                                             const SolverConfig& cfg);

struct SolveResult {
  GridFunction v;
  ConvergenceTrace trace;
  double lambda = 0.0;
  double lambda0 = 0.0;
  double nu = 0.0;  // continuation anchor; equals lambda for direct solves
};

// Picard iteration v <- T_lambda[ell0 + H_min(grad v)] from v = 0.
SolveResult picard_solve(const SpectralModel& model, const ScalarField& ell0,
                         const HamiltonianSpec& ham, double lambda,
                         const SolverConfig& cfg);

// Reusable core: shared operator, optional warm start and extra source nodes.
SolveResult picard_solve_with(const ResolventOperator& op, const Vector& ell0_nodes,
                              const HamiltonianSpec& ham, const SolverConfig& cfg,
                              const GridFunction* warm_start = nullptr,
                              const Vector* extra_source = nullptr,
                              double lambda0_hint = -1.0);

// Resolvent-identity continuation to discounts below lambda0: outer iteration
// u <- R(nu)[ell0 + (nu - mu) u] with anchor nu >= max(lambda0, mu).
SolveResult continuation_solve(const SpectralModel& model, const ScalarField& ell0,
                               const HamiltonianSpec& ham, double mu,
                               const SolverConfig& cfg);

// Core with a shared anchor operator; appends the fixed-point defect at mu
// to the trace when op_mu_residual is supplied.  outer_start seeds the outer
// iteration (zero by default).
SolveResult continuation_solve_with(const ResolventOperator& op_nu,
                                    const Vector& ell0_nodes, const HamiltonianSpec& ham,
                                    double mu, const SolverConfig& cfg, double lambda0,
                                    const ResolventOperator* op_mu_residual = nullptr,
                                    const GridFunction* outer_start = nullptr);

// Fixed-point defect |v - T_lambda[ell0 + H_min(grad v)]| over the grid.
double solution_residual(const SpectralModel& model, const GridFunction& v,
                         const ScalarField& ell0, const HamiltonianSpec& ham,
                         double lambda, const SolverConfig& cfg);
double solution_residual_with(const ResolventOperator& op, const GridFunction& v,
                              const Vector& ell0_nodes, const HamiltonianSpec& ham);

// Node samples of a scalar field on tensor axes.
Vector sample_nodes(const std::vector<std::vector<double>>& axes, const ScalarField& f);

}  // namespace hjb
