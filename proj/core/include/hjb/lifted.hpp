#pragma once

#include <functional>
#include <vector>

#include "hjb/spectral_model.hpp"

namespace hjb {

// Quadrature discretization of the weighted trajectory space
// L^2_rho(0, infinity; H) restricted to lifted trajectories s -> P e^{sA} x.
// Row block i of `upsilon` is sqrt(w_i e^{-rho t_i}) P e^{t_i A}, so
// |upsilon x|^2 approximates the weighted trajectory norm.  `traj` holds the
// same row blocks acting on the projected coordinates only; all lifted
// trajectories factor through it in the commuting models built here.
struct LiftedOps {
  double rho = 1.0;
  std::vector<double> t_nodes;
  std::vector<double> weights;  // positive Lebesgue weights of the node rule
  Matrix upsilon;               // (m k) x n_total
  Matrix traj;                  // (m k) x k
  Matrix traj_q;                // thin QR of traj: traj = traj_q traj_r
  Matrix traj_r;
  double eps_reg = 1e-12;

  int node_count() const { return static_cast<int>(t_nodes.size()); }
  int proj_dim() const { return static_cast<int>(traj.cols()); }

  Vector apply(const Vector& x) const { return upsilon * x; }

  // Adjoint of the lifting on a sampled trajectory z: (0,inf) -> R^k,
  // evaluated by the node rule: sum_i w_i e^{-rho t_i} (P e^{t_i A})^T z(t_i).
  Vector adjoint_apply(const SpectralModel& model,
                       const std::function<Vector(double)>& z) const;
};

// Graded node set t_i = t_max ((i - 1/2)/m)^grading clustered near zero.
LiftedOps build_lifted(const SpectralModel& model, double rho, int m_nodes,
                       double t_max, double grading = 2.0);

// Sigma_t = Upsilon Q_t Upsilon^T assembled on demand.
Matrix lifted_sigma(const LiftedOps& ops, const SpectralModel& model, double t);

// Lifted smoothing operator Sigma_t^{-1/2} Upsilon e^{tA} B, in the
// discretized trajectory coordinates.  Spectral regularization as in
// lambda_finite; throws the same range error when the smoothing hypothesis
// fails numerically.
Matrix lifted_lambda(const LiftedOps& ops, const SpectralModel& model, double t);
double lifted_lambda_norm(const LiftedOps& ops, const SpectralModel& model, double t);

// Operator norm of the time shift restricted to lifted trajectories,
// sup_x |Upsilon e^{tA} x| / |Upsilon x|; bounded by e^{rho t / 2} in the
// continuum, and a fortiori by the e^{rho t} bound of the shift on all of
// L^2_rho.
double shift_norm_on_trajectories(const LiftedOps& ops, const SpectralModel& model, double t);

// Least-squares fit log|Lambda(t)| = log kappa0 - gamma log t.
struct SmoothingFit {
  double kappa0 = 0.0;
  double gamma = 0.0;
  double residual = 0.0;  // max |log norm - fit|
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool residual_warning = false;
};

// Requires at least 8 positive times spanning two decades and positive
// norms; rejects degenerate inputs (all-zero norms of a control-free model).
SmoothingFit fit_smoothing_exponent(const std::vector<double>& times,
                                    const std::vector<double>& norms,
                                    double warn_threshold = 0.25);

}  // namespace hjb
