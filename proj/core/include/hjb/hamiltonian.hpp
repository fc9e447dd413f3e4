#pragma once

#include <cstdint>
#include <vector>

#include "hjb/grid_function.hpp"
#include "hjb/spectral_model.hpp"

namespace hjb {

// Control set U, control cost l1, and the constants driving the minimized
// Hamiltonian H_min(p) = inf_{u in U} { <p, u> + l1(u) }.
struct HamiltonianSpec {
  enum class ControlSet { Ball, Box, Finite };
  enum class L1Kind { Quadratic, Table };

  ControlSet control_set = ControlSet::Ball;
  int dim = 1;                    // d_U
  double radius = 1.0;            // Ball
  Vector box_lo, box_hi;          // Box
  std::vector<Vector> points;     // Finite

  L1Kind l1_kind = L1Kind::Quadratic;
  double l1_coeff = 0.5;          // quadratic c |u|^2, c >= 0
  std::vector<double> l1_table;   // per finite point

  double nisio_bound = 2.0;       // M >= max(Lip(H_min), |grad| in play)
  int search_resolution = 201;    // per-axis nodes of the generic searches

  double l1(const Vector& u) const;
  double l1_sup() const;          // sup_U |l1|
  double lipschitz() const;       // Lip(H_min) = sup_{u in U} |u|
  void validate() const;
};

double h_min(const HamiltonianSpec& spec, const Vector& p);

// A minimizer realizing h_min; ties resolved to the lexicographically
// smallest coordinate vector.
Vector feedback_control(const HamiltonianSpec& spec, const Vector& p);

// Running cost of the auxiliary drift problem,
// g(alpha) = sup_{|p| <= M} { H_min(p) - <alpha, p> }, by grid search over
// the ball with one refinement pass.
double nisio_g(const HamiltonianSpec& spec, const Vector& alpha);

// One discrete Nisio operator step,
//   N_eps u(x) = min_{|a| <= M} { eps g(a) + u(x + eps (P B) a) },
// the auxiliary drift acting along the control embedding.  substeps > 1
// composes N_{eps/substeps}.
GridFunction nisio_step(const HamiltonianSpec& spec, const SpectralModel& model,
                        const GridFunction& u, double eps, int substeps = 1);

struct ConcavityReport {
  bool pass = false;
  double worst_violation = 0.0;
  int samples = 0;
};

// Midpoint concavity of H_min on random pairs.
ConcavityReport check_concavity(const HamiltonianSpec& spec, int n_samples,
                                std::uint64_t seed = 42);

}  // namespace hjb
