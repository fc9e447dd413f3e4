#pragma once

#include <functional>

#include "hjb/grid_function.hpp"
#include "hjb/psd.hpp"
#include "hjb/quadrature.hpp"
#include "hjb/spectral_model.hpp"

namespace hjb {

// Law of the projected uncontrolled state at time t started from x_proj:
// N(flow_proj(t) x_proj, P Q_t P*).
struct GaussianLaw {
  Vector mean;
  Matrix cov;

  void check_invariants() const;
};

GaussianLaw projected_law(const SpectralModel& model, double t, const Vector& x_proj);

using ScalarField = std::function<double(const Vector&)>;

// Evaluation kernel of P_t on the projected coordinates for one fixed t.
// Shared by the pointwise operations below and by the resolvent sweep:
//   value    = sum_j w_j  phi(flow_proj x + sqrt_cov z_j)
//   gradient = sum_j w_j  phi(...) * (bel z_j)
// where z_j are standard-normal nodes.  `bel` carries the
// Bismut-Elworthy-Li weights (P e^{tA} B)^T V D^{-1/2} of the commuting
// finite reduction; directions of the covariance below the cutoff are
// treated as exact zeros.
struct SemigroupKernel {
  Matrix flow_proj;  // k x k
  Matrix sqrt_cov;   // k x r  (maps standard normals into the law)
  Matrix bel;        // d_U x r

  int noise_rank() const { return static_cast<int>(sqrt_cov.cols()); }
};

// Builds the kernel at time t.  A ridge of 1e-14 * max(1, diag) keeps the
// law usable when Q_t is numerically singular; if even the ridged
// covariance has no usable direction the law is degenerate and an error is
// thrown.
SemigroupKernel make_kernel(const SpectralModel& model, double t);

// P_t[phi](x) = E[ phi(flow(t, x)_proj + Y) ], Y ~ N(0, P Q_t P*).
double apply_Pt(const SpectralModel& model, const ScalarField& phi, double t,
                const Vector& x_proj, const QuadratureRule& quad);
double apply_Pt(const SpectralModel& model, const GridFunction& phi, double t,
                const Vector& x_proj, const QuadratureRule& quad);

// B-directional gradient of P_t[phi] at x via the Bismut-Elworthy-Li weight:
// component j is E[ phi(state) <Lambda(t) e_j, Q^{-1/2} Y> ].
Vector grad_B_Pt(const SpectralModel& model, const ScalarField& phi, double t,
                 const Vector& x_proj, const QuadratureRule& quad);
Vector grad_B_Pt(const SpectralModel& model, const GridFunction& phi, double t,
                 const Vector& x_proj, const QuadratureRule& quad);

// Lambda(t) = (P Q_t P*)^{-1/2} P e^{tA} B with spectral regularization:
// eigenvalues below eps_reg * max are exact zeros.  Throws
// "smoothing hypothesis violated numerically" when P e^{tA} B has a
// component of relative size > 1e-8 outside the retained eigenspace.
Matrix lambda_finite(const SpectralModel& model, double t, double eps_reg = 1e-12);

// Operator 2-norm of lambda_finite.
double lambda_finite_norm(const SpectralModel& model, double t, double eps_reg = 1e-12);

// P e^{tA} B, the control directions pushed through the flow and projected.
Matrix projected_flow_control(const SpectralModel& model, double t);

}  // namespace hjb
