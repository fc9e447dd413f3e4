#pragma once

#include <string>
#include <vector>

#include "hjb/types.hpp"

namespace hjb {

// One diagonal block of the drift operator A: either a scalar decay (the
// block is -a with a > 0) or a 2x2 skew pair rate*[[0,1],[-1,0]], whose
// exponential is the clockwise rotation R(rate*t).
struct DriftBlock {
  enum class Kind { Scalar, SkewPair };
  Kind kind = Kind::Scalar;
  double rate = 1.0;  // decay a for Scalar, rotation rate for SkewPair
  int offset = 0;     // first coordinate index

  int dim() const { return kind == Kind::Scalar ? 1 : 2; }
};

// Finite spectral truncation of (A, B, G, P).  A is block diagonal, G maps
// noise directions into the state, B maps control directions into the state
// (entries may grow with the mode index; boundary control is encoded this
// way), and `projection` lists the coordinates spanning the image of P.
struct SpectralModel {
  std::vector<DriftBlock> blocks;
  Matrix noise;                 // G: n_total x d_noise
  Matrix control;               // B: n_total x d_control
  std::vector<int> projection;  // ordered coordinate indices, block aligned
  double growth_scale = 1.0;    // M_sg in  |e^{tA}| <= M_sg e^{omega t}
  double growth_rate = 0.0;     // omega
  std::string kind = "custom";

  int n_total() const;
  int dim_noise() const { return static_cast<int>(noise.cols()); }
  int dim_control() const { return static_cast<int>(control.cols()); }
  int dim_projected() const { return static_cast<int>(projection.size()); }

  // Throws std::invalid_argument on violated structural invariants
  // (block signs, projection range, block alignment of the projection).
  void validate() const;

  Vector flow(double t, const Vector& x) const;  // e^{tA} x, blockwise
  Matrix flow_matrix(double t) const;            // dense e^{tA}
  Matrix projected_flow(double t) const;         // P e^{tA} P* as k x k
  Matrix projected_control() const;              // P B: k x d_control
  Vector project(const Vector& x) const;         // P x as k-vector

  // Q_t = int_0^t e^{sA} G G* e^{sA*} ds by closed-form block integrals.
  // Returns P Q_t P* when projected_only is set.  Requires t > 0.
  Matrix covariance(double t, bool projected_only) const;

  // int_0^t e^{sA} B ds, the exact control response over one step.
  Matrix control_flow_integral(double t) const;
};

// Spectral coefficient <D(left boundary unit datum), e_n> of the Dirichlet
// map on the interval (0, length).  The harmonic extension of the unit datum
// at the left endpoint is f(xi) = 1 - xi/length.
double dirichlet_coefficient(int n, double length);

// Dirichlet Laplacian on (0, length) with eigenvalues (n pi / length)^2,
// diagonal noise g_n = lambda_n^{-beta}, and scalar boundary control
// B_n = lambda_n * dirichlet_coefficient(n).  Projection on the first
// n_proj modes, so P commutes with A.
SpectralModel build_heat_model(int n_modes, double length, double beta, int n_proj);

// Wave pairs with rotation rates c*n*pi/length.  Control acts on the
// velocity coordinate of each pair; the noise matrix sigma (rows indexed by
// projected pairs) feeds the velocity coordinates of the first n_proj_pairs
// pairs.  Rejects sigma with rank-deficient sigma*sigma^T.
SpectralModel build_wave_model(int n_pairs, double c, const Matrix& sigma,
                               int n_proj_pairs, double length = -1.0);

// Bounded running cost on the projected coordinates.
struct CostSpec {
  enum class Base { CosLinear, LogisticQuadratic };
  Base base = Base::CosLinear;
  Vector weights;          // one entry per projected coordinate
  double amplitude = 1.0;
  double offset = 0.0;

  double bound() const { return std::abs(amplitude); }
  double eval_projected(const Vector& x_proj) const;
  double eval_full(const SpectralModel& model, const Vector& x) const;
};

}  // namespace hjb
