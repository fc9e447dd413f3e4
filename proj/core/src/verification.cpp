#include "hjb/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "hjb/rng.hpp"

namespace hjb {

namespace {

std::string digest_of(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_artifact(CheckReport& report, const std::string& prefix,
                    const std::vector<std::pair<std::string, double>>& rows) {
  if (prefix.empty()) return;
  const std::string path = prefix + "_" + report.name + ".csv";
  std::ofstream out(path);
  out << "quantity,value\n";
  char buf[64];
  for (const auto& [key, value] : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
    out << key << "," << buf << "\n";
  }
  report.artifacts.push_back(path);
}

}  // namespace

ScalarField random_cosine_mixture(int dim, std::uint64_t seed, std::uint64_t stream) {
  KeyedStream rng(seed, stream);
  const int terms = 4;
  std::vector<double> amps(terms);
  std::vector<double> phases(terms);
  std::vector<Vector> freqs(terms, Vector(dim));
  double total = 0.0;
  for (int j = 0; j < terms; ++j) {
    amps[j] = 2.0 * rng.next_uniform() - 1.0;
    total += std::abs(amps[j]);
    phases[j] = 6.283185307179586 * rng.next_uniform();
    for (int d = 0; d < dim; ++d) freqs[j](d) = 4.0 * rng.next_uniform() - 2.0;
  }
  for (double& a : amps) a /= std::max(total, 1e-12);
  return [amps, phases, freqs](const Vector& x) {
    double v = 0.0;
    for (std::size_t j = 0; j < amps.size(); ++j)
      v += amps[j] * std::cos(freqs[j].dot(x) + phases[j]);
    return v;
  };
}

CheckReport check_linear_resolvent_identity(const SpectralModel& model,
                                            const ScalarField& psi, double mu, double nu,
                                            const SolverConfig& cfg, double tol) {
  if (!(mu > 0.0) || !(nu > 0.0) || mu == nu)
    throw std::invalid_argument("linear identity needs mu, nu > 0 and mu != nu");
  CheckReport report;
  report.name = "linear_resolvent_identity";
  report.tolerance = tol;
  report.inputs_digest =
      digest_of("linres:" + std::to_string(mu) + ":" + std::to_string(nu));

  SolverConfig local = cfg;
  local.lambda = std::min(mu, nu);
  const auto axes = solver_axes(model, local);
  const ResolventOperator op_mu(model, axes, mu, local);
  const ResolventOperator op_nu(model, axes, nu, local);
  const Vector psi_nodes = sample_nodes(axes, psi);

  const GridFunction t_mu = op_mu.apply(psi_nodes);
  const Vector inner = psi_nodes + (nu - mu) * t_mu.values();
  const GridFunction rhs = op_nu.apply(inner);
  // restrict to nodes whose stencils never leave the box: the clamped
  // extension is not the operator being checked
  auto faithful = op_mu.faithful_nodes();
  const auto f_nu = op_nu.faithful_nodes();
  for (std::size_t i = 0; i < faithful.size(); ++i)
    faithful[i] = faithful[i] && f_nu[i];
  report.defect = faithful_sup_diff(t_mu.values(), rhs.values(), faithful);
  report.finalize();
  return report;
}

CheckReport check_nonlinear_resolvent_identity(const SpectralModel& model,
                                               const ScalarField& psi,
                                               const HamiltonianSpec& ham, double mu,
                                               double nu, const SolverConfig& cfg) {
  CheckReport report;
  report.name = "nonlinear_resolvent_identity";
  report.inputs_digest =
      digest_of("nonlinres:" + std::to_string(mu) + ":" + std::to_string(nu));

  SolverConfig local = cfg;
  local.lambda = std::min(mu, nu);
  const auto axes = solver_axes(model, local);
  const ResolventOperator op_mu(model, axes, mu, local);
  const Vector psi_nodes = sample_nodes(axes, psi);

  const SolveResult r_mu = picard_solve_with(op_mu, psi_nodes, ham, local);
  double budget = r_mu.trace.error_budget;
  double defect = 0.0;
  if (mu == nu) {
    const SolveResult again = picard_solve_with(op_mu, psi_nodes, ham, local);
    defect = (r_mu.v.values() - again.v.values()).cwiseAbs().maxCoeff();
  } else {
    const ResolventOperator op_nu(model, axes, nu, local);
    const Vector shifted = psi_nodes + (nu - mu) * r_mu.v.values();
    const SolveResult r_nu = picard_solve_with(op_nu, shifted, ham, local);
    budget = std::max(budget, r_nu.trace.error_budget);
    auto faithful = op_mu.faithful_nodes();
    const auto f_nu = op_nu.faithful_nodes();
    for (std::size_t i = 0; i < faithful.size(); ++i)
      faithful[i] = faithful[i] && f_nu[i];
    defect = faithful_sup_diff(r_mu.v.values(), r_nu.v.values(), faithful);
  }
  report.defect = defect;
  report.tolerance = 5.0 * (local.tol_picard + budget);
  report.finalize();
  return report;
}

CheckReport check_lipschitz_bound(const SpectralModel& model, const HamiltonianSpec& ham,
                                  double mu, int n_pairs, const SolverConfig& cfg,
                                  std::uint64_t seed, bool via_continuation, double tol) {
  CheckReport report;
  report.name = via_continuation ? "lipschitz_bound_continuation" : "lipschitz_bound";
  report.tolerance = tol;
  report.inputs_digest = digest_of("lip:" + std::to_string(mu) + ":" +
                                   std::to_string(n_pairs) + ":" + std::to_string(seed));

  SolverConfig local = cfg;
  local.lambda = mu;
  const auto axes = solver_axes(model, local);
  const Vector zeros = Vector::Zero(static_cast<Eigen::Index>(1));
  double lambda0 = local.smoothing ? estimate_lambda0(model, ham, local) : mu;
  const double nu = via_continuation
                        ? (local.nu_anchor > 0.0 ? local.nu_anchor : 1.5 * lambda0)
                        : mu;
  const ResolventOperator op(model, axes, via_continuation ? nu : mu, local);
  const auto faithful = op.faithful_nodes();

  auto solve_one = [&](const Vector& source_nodes) {
    if (!via_continuation) return picard_solve_with(op, source_nodes, ham, local);
    return continuation_solve_with(op, source_nodes, ham, mu, local, lambda0);
  };

  const int k = model.dim_projected();
  double worst = 0.0;
  for (int pair = 0; pair < n_pairs; ++pair) {
    Vector phi_nodes, psi_nodes;
    double gap = 0.0;
    for (std::uint64_t attempt = 0;; ++attempt) {
      const auto phi = random_cosine_mixture(k, seed, 2 * pair + 1000 * attempt);
      const auto psi = random_cosine_mixture(k, seed, 2 * pair + 1000 * attempt + 1);
      phi_nodes = sample_nodes(axes, phi);
      psi_nodes = sample_nodes(axes, psi);
      gap = (phi_nodes - psi_nodes).cwiseAbs().maxCoeff();
      if (gap >= 0.05) break;
      if (attempt > 20) throw std::runtime_error("failed to draw separated test pair");
    }
    const SolveResult a = solve_one(phi_nodes);
    const SolveResult b = solve_one(psi_nodes);
    const double diff = faithful_sup_diff(a.v.values(), b.v.values(), faithful);
    worst = std::max(worst, mu * diff / gap);
  }
  report.defect = worst;
  report.finalize();
  return report;
}

CheckReport check_nisio(const SpectralModel& model, const HamiltonianSpec& ham,
                        const SolverConfig& cfg, const std::vector<double>& t_list,
                        const std::vector<double>& eps_list, std::uint64_t seed) {
  CheckReport report;
  report.name = "nisio_family";
  report.inputs_digest = digest_of("nisio:" + std::to_string(seed));

  SolverConfig local = cfg;
  const auto axes = solver_axes(model, local);
  const int k = model.dim_projected();
  const Matrix embed = model.projected_control();

  // (a) contraction
  double contraction_defect = 0.0;
  const int n_pairs = 10;
  for (int pair = 0; pair < n_pairs; ++pair) {
    const auto fu = random_cosine_mixture(k, seed, 2 * pair);
    const auto fv = random_cosine_mixture(k, seed, 2 * pair + 1);
    const GridFunction u = GridFunction::from_callable(axes, fu);
    const GridFunction v = GridFunction::from_callable(axes, fv);
    const double base_gap = (u.values() - v.values()).cwiseAbs().maxCoeff();
    for (double t : t_list) {
      const GridFunction nu_t = nisio_step(ham, model, u, t);
      const GridFunction nv_t = nisio_step(ham, model, v, t);
      const double gap = (nu_t.values() - nv_t.values()).cwiseAbs().maxCoeff();
      contraction_defect = std::max(contraction_defect, gap - base_gap * (1.0 + 1e-8));
    }
  }

  // (b) generator residual on a smooth grid with an analytic gradient,
  // measured away from the boundary margin swept by eps * M * |P B|.
  Vector freq = Vector::Zero(k);
  freq(0) = 1.0;
  GridFunction u = GridFunction::from_callable(
      axes, [&](const Vector& x) { return std::cos(freq.dot(x)); });
  Matrix grads(u.size(), ham.dim);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Vector x = u.node_coords(i);
    grads.row(i) = -std::sin(freq.dot(x)) * (freq.transpose() * embed);
  }
  u.set_gradient(std::move(grads));

  const double eps_max = *std::max_element(eps_list.begin(), eps_list.end());
  const double margin = eps_max * ham.nisio_bound * embed.cwiseAbs().rowwise().sum().maxCoeff();
  std::vector<double> residuals;
  for (double eps : eps_list) {
    const GridFunction stepped = nisio_step(ham, model, u, eps);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const Vector x = u.node_coords(i);
      bool interior = true;
      for (int d = 0; d < k; ++d) {
        const auto& ax = u.axes()[static_cast<std::size_t>(d)];
        if (x(d) < ax.front() + margin || x(d) > ax.back() - margin) interior = false;
      }
      if (!interior) continue;
      const double gen = (stepped.values()(i) - u.values()(i)) / eps;
      const double target = h_min(ham, u.gradient().row(i).transpose());
      worst = std::max(worst, std::abs(gen - target));
    }
    residuals.push_back(worst);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < residuals.size(); ++i)
    if (residuals[i] > residuals[i - 1]) monotone = false;
  const double decrease =
      residuals.empty() ? 0.0 : residuals.front() / std::max(residuals.back(), 1e-300);

  report.defect = std::max(contraction_defect, 0.0);
  report.tolerance = 1e-8;
  report.pass = report.defect <= report.tolerance && monotone && decrease >= 2.0;
  report.note = monotone ? "generator residual decreasing" : "generator residual not monotone";
  std::vector<std::pair<std::string, double>> rows{{"contraction_defect", report.defect},
                                                   {"decrease_factor", decrease}};
  for (std::size_t i = 0; i < residuals.size(); ++i)
    rows.emplace_back("generator_residual_" + std::to_string(i), residuals[i]);
  write_artifact(report, "", rows);
  return report;
}

CheckReport check_injectivity(const SpectralModel& model, const HamiltonianSpec& ham,
                              double mu, const SolverConfig& cfg, std::uint64_t seed,
                              double tau_detect) {
  CheckReport report;
  report.name = "injectivity_probe";
  report.inputs_digest = digest_of("inj:" + std::to_string(mu) + ":" + std::to_string(seed));
  SolverConfig local = cfg;
  local.lambda = mu;
  const auto axes = solver_axes(model, local);
  const ResolventOperator op(model, axes, mu, local);
  const int k = model.dim_projected();

  double min_gap = std::numeric_limits<double>::infinity();
  for (int pair = 0; pair < 5; ++pair) {
    const auto phi = random_cosine_mixture(k, seed, 100 + 2 * pair);
    Vector phi_nodes = sample_nodes(axes, phi);
    Vector psi_nodes = phi_nodes;
    // separated in sup norm by construction
    const auto bump = random_cosine_mixture(k, seed, 100 + 2 * pair + 1);
    Vector bump_nodes = sample_nodes(axes, bump);
    bump_nodes *= 0.1 / std::max(bump_nodes.cwiseAbs().maxCoeff(), 1e-12);
    psi_nodes += bump_nodes;
    const SolveResult a = picard_solve_with(op, phi_nodes, ham, local);
    const SolveResult b = picard_solve_with(op, psi_nodes, ham, local);
    min_gap = std::min(min_gap,
                       faithful_sup_diff(a.v.values(), b.v.values(), op.faithful_nodes()));
  }
  // pass when every solution pair stays detectably separated
  report.defect = min_gap >= tau_detect ? 0.0 : tau_detect - min_gap;
  report.tolerance = 0.0;
  report.note = "min solution gap " + std::to_string(min_gap);
  report.finalize();
  return report;
}

std::vector<CheckReport> run_all(const VerifySetup& setup) {
  const auto enabled = [&](const std::string& name) {
    if (setup.checks.empty()) return true;
    return std::find(setup.checks.begin(), setup.checks.end(), name) != setup.checks.end();
  };

  SolverConfig cfg = setup.solver;
  if (!cfg.smoothing) {
    std::vector<double> times, norms;
    for (int i = 0; i < 12; ++i) {
      const double t = 1e-3 * std::pow(100.0, i / 11.0);
      times.push_back(t);
      norms.push_back(lambda_finite_norm(setup.model, t));
    }
    cfg.smoothing = fit_smoothing_exponent(times, norms);
  }
  const double lambda0 = estimate_lambda0(setup.model, setup.ham, cfg);

  std::vector<CheckReport> reports;
  const auto ell0 = [&](const Vector& x) { return setup.cost.eval_projected(x); };

  if (enabled("linear_resolvent_identity")) {
    reports.push_back(check_linear_resolvent_identity(
        setup.model, ell0, 0.5, 2.0, cfg, setup.linear_identity_tol));
  }
  if (enabled("nonlinear_resolvent_identity")) {
    reports.push_back(check_nonlinear_resolvent_identity(setup.model, ell0, setup.ham,
                                                         lambda0, 2.0 * lambda0, cfg));
  }
  if (enabled("lipschitz_bound")) {
    reports.push_back(check_lipschitz_bound(setup.model, setup.ham, 2.0 * lambda0,
                                            setup.lipschitz_pairs, cfg, setup.seed, false,
                                            setup.lipschitz_tol_direct));
  }
  if (enabled("lipschitz_bound_continuation")) {
    reports.push_back(check_lipschitz_bound(setup.model, setup.ham, 0.5 * lambda0,
                                            setup.lipschitz_pairs, cfg, setup.seed, true,
                                            setup.lipschitz_tol_continuation));
  }
  if (enabled("nisio_family")) {
    reports.push_back(check_nisio(setup.model, setup.ham, cfg, {0.1, 0.5, 1.0},
                                  {0.1, 0.05, 0.025}, setup.seed));
  }
  if (enabled("injectivity_probe")) {
    reports.push_back(check_injectivity(setup.model, setup.ham, 2.0 * lambda0, cfg,
                                        setup.seed, setup.injectivity_detect));
  }
  if (enabled("hamiltonian_concavity")) {
    const ConcavityReport concave = check_concavity(setup.ham, 500, setup.seed);
    CheckReport report;
    report.name = "hamiltonian_concavity";
    report.inputs_digest = digest_of("concavity:" + std::to_string(setup.seed));
    report.defect = concave.worst_violation;
    report.tolerance = 1e-9;
    report.note = "midpoint concavity on " + std::to_string(concave.samples) + " pairs";
    report.finalize();
    reports.push_back(report);
  }
  if (enabled("smoothing_fit")) {
    CheckReport fit_report;
    fit_report.name = "smoothing_fit";
    fit_report.inputs_digest = digest_of("smoothing:" + setup.model.kind);
    fit_report.defect = cfg.smoothing->residual;
    fit_report.tolerance = 0.25;
    fit_report.note = "gamma " + std::to_string(cfg.smoothing->gamma) + ", kappa0 " +
                      std::to_string(cfg.smoothing->kappa0);
    fit_report.finalize();
    reports.push_back(fit_report);
  }

  std::sort(reports.begin(), reports.end(),
            [](const CheckReport& a, const CheckReport& b) { return a.name < b.name; });
  if (!setup.out_prefix.empty()) {
    for (auto& report : reports) {
      std::vector<std::pair<std::string, double>> rows{{"defect", report.defect},
                                                       {"tolerance", report.tolerance},
                                                       {"pass", report.pass ? 1.0 : 0.0}};
      write_artifact(report, setup.out_prefix, rows);
    }
  }
  return reports;
}

}  // namespace hjb
