#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hjb/hjb_solver.hpp"

namespace hjb {

struct CheckReport {
  std::string name;
  std::string inputs_digest;
  double defect = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<std::string> artifacts;
  std::string note;

  void finalize() { pass = defect <= tolerance; }
};

// Everything a verification run needs; `checks` empty means all.
struct VerifySetup {
  SpectralModel model;
  CostSpec cost;
  HamiltonianSpec ham;
  SolverConfig solver;
  std::uint64_t seed = 42;
  std::vector<std::string> checks;
  std::string out_prefix;

  int lipschitz_pairs = 20;
  double lipschitz_tol_direct = 1.02;
  double lipschitz_tol_continuation = 1.05;
  double linear_identity_tol = 1e-5;
  double injectivity_detect = 1e-4;
};

// |T_mu psi - T_nu[psi + (nu - mu) T_mu psi]| over the grid.
CheckReport check_linear_resolvent_identity(const SpectralModel& model,
                                            const ScalarField& psi, double mu, double nu,
                                            const SolverConfig& cfg, double tol);

// Same identity for the nonlinear solution map R, both sides by Picard.
CheckReport check_nonlinear_resolvent_identity(const SpectralModel& model,
                                               const ScalarField& psi,
                                               const HamiltonianSpec& ham, double mu,
                                               double nu, const SolverConfig& cfg);

// max over random LUC_b pairs of mu |R(mu)phi - R(mu)psi| / |phi - psi|.
CheckReport check_lipschitz_bound(const SpectralModel& model, const HamiltonianSpec& ham,
                                  double mu, int n_pairs, const SolverConfig& cfg,
                                  std::uint64_t seed, bool via_continuation, double tol);

// (a) contraction of the Nisio step on random pairs, (b) monotone decay of
// the generator residual (N_eps u - u)/eps - H_min(grad u) over eps_list.
CheckReport check_nisio(const SpectralModel& model, const HamiltonianSpec& ham,
                        const SolverConfig& cfg, const std::vector<double>& t_list,
                        const std::vector<double>& eps_list, std::uint64_t seed);

// Contrapositive injectivity probe: sources 0.1 apart in sup norm must map
// to solutions at least tau_detect apart.
CheckReport check_injectivity(const SpectralModel& model, const HamiltonianSpec& ham,
                              double mu, const SolverConfig& cfg, std::uint64_t seed,
                              double tau_detect);

// Orchestrates the suite; reports are ordered deterministically by name.
std::vector<CheckReport> run_all(const VerifySetup& setup);

// Random bounded uniformly-continuous test field: finite cosine mixture
// with |coefficients|_1 <= 1.
ScalarField random_cosine_mixture(int dim, std::uint64_t seed, std::uint64_t stream);

}  // namespace hjb
