// Command-line driver: solve | continue | verify | simulate | smoothing.
// Exit codes: 0 success, 1 failed checks, 2 non-convergence, 3 invalid config.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "hjb/config.hpp"
#include "hjb/gaussian_semigroup.hpp"
#include "hjb/lifted.hpp"

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json trace_json(const hjb::ConvergenceTrace& trace) {
  json j;
  j["iterations"] = trace.iterations;
  j["ratios"] = trace.ratios;
  j["deltas"] = trace.deltas;
  if (!trace.outer_deltas.empty()) {
    j["outer_iterations"] = trace.outer_iterations;
    j["outer_ratios"] = trace.outer_ratios;
    j["outer_deltas"] = trace.outer_deltas;
  }
  return j;
}

json config_json(const hjb::ProblemSetup& setup) {
  json j = json::parse(setup.file.to_json());
  return j;
}

struct CommonArgs {
  std::string config_path;
  std::string out_prefix = "run";
  double lambda_override = -1.0;
  double tol_override = -1.0;
  int max_iter_override = -1;
  long long seed_override = -1;
};

hjb::ProblemSetup load_with_overrides(const CommonArgs& args) {
  hjb::ProblemSetup setup = hjb::load_problem(args.config_path);
  if (args.lambda_override > 0.0) setup.solver.lambda = args.lambda_override;
  if (args.tol_override > 0.0) {
    setup.solver.tol_picard = args.tol_override;
    setup.solver.tol_outer = args.tol_override;
  }
  if (args.max_iter_override > 0) setup.solver.max_iterations = args.max_iter_override;
  if (args.seed_override >= 0) {
    setup.sim.seed = static_cast<std::uint64_t>(args.seed_override);
    setup.verify.seed = static_cast<std::uint64_t>(args.seed_override);
  }
  setup.verify.solver = setup.solver;
  return setup;
}

int run_solve(const CommonArgs& args, bool continuation) {
  hjb::ProblemSetup setup = load_with_overrides(args);
  hjb::ensure_smoothing_fit(setup);
  const auto ell0 = [&](const hjb::Vector& x) { return setup.cost.eval_projected(x); };

  hjb::SolveResult result;
  double residual = 0.0;
  if (continuation) {
    result = hjb::continuation_solve(setup.model, ell0, setup.ham, setup.solver.lambda,
                                     setup.solver);
    residual = result.trace.residuals.empty() ? 0.0 : result.trace.residuals.back();
  } else {
    result = hjb::picard_solve(setup.model, ell0, setup.ham, setup.solver.lambda,
                               setup.solver);
    residual = hjb::solution_residual(setup.model, result.v, ell0, setup.ham,
                                      result.lambda, setup.solver);
  }

  hjb::write_value_csv(args.out_prefix + "_value.csv", result.v);
  json summary;
  summary["lambda"] = result.lambda;
  summary["lambda0"] = result.lambda0;
  summary["nu"] = result.nu;
  summary["iterations"] = result.trace.iterations;
  summary["ratios"] = trace_json(result.trace);
  summary["residual"] = residual;
  summary["error_budget"] = result.trace.error_budget;
  summary["config_digest"] = setup.file.digest();
  summary["version"] = hjb::kVersion;
  summary["config"] = config_json(setup);
  write_text(args.out_prefix + "_summary.json", summary.dump(2) + "\n");
  std::cout << "solved lambda=" << result.lambda << " residual=" << residual
            << " -> " << args.out_prefix << "_value.csv\n";
  return 0;
}

int run_verify(const CommonArgs& args, const std::string& checks_csv) {
  hjb::ProblemSetup setup = load_with_overrides(args);
  hjb::ensure_smoothing_fit(setup);
  setup.verify.solver = setup.solver;
  setup.verify.out_prefix = args.out_prefix;
  if (!checks_csv.empty()) {
    setup.verify.checks.clear();
    std::istringstream in(checks_csv);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) setup.verify.checks.push_back(item);
    }
  }
  const auto reports = hjb::run_all(setup.verify);
  json arr = json::array();
  bool all_pass = true;
  for (const auto& r : reports) {
    json j;
    j["name"] = r.name;
    j["inputs_digest"] = r.inputs_digest;
    j["defect"] = r.defect;
    j["tolerance"] = r.tolerance;
    j["pass"] = r.pass;
    j["artifacts"] = r.artifacts;
    if (!r.note.empty()) j["note"] = r.note;
    arr.push_back(j);
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << " defect=" << r.defect
              << " tol=" << r.tolerance << "\n";
  }
  write_text(args.out_prefix + "_verify.json", arr.dump(2) + "\n");
  return all_pass ? 0 : 1;
}

int run_simulate(const CommonArgs& args, const std::string& value_csv) {
  hjb::ProblemSetup setup = load_with_overrides(args);
  hjb::ensure_smoothing_fit(setup);
  const auto ell0 = [&](const hjb::Vector& x) { return setup.cost.eval_projected(x); };

  std::optional<hjb::GridFunction> value;
  if (setup.sim_policy == "feedback") {
    if (!value_csv.empty()) {
      value = hjb::load_value_csv(value_csv);
      if (!value->has_gradient())
        throw hjb::ConfigError("value CSV lacks gradient columns; cannot drive feedback");
    } else {
      const double lambda0 = hjb::estimate_lambda0(setup.model, setup.ham, setup.solver);
      hjb::SolveResult solved =
          setup.solver.lambda >= lambda0
              ? hjb::picard_solve(setup.model, ell0, setup.ham, setup.solver.lambda,
                                  setup.solver)
              : hjb::continuation_solve(setup.model, ell0, setup.ham, setup.solver.lambda,
                                        setup.solver);
      value = std::move(solved.v);
    }
  }

  hjb::Policy policy;
  if (setup.sim_policy == "zero") {
    policy = hjb::Policy::zero(setup.model.dim_control());
  } else if (setup.sim_policy == "feedback") {
    policy = hjb::Policy::feedback(*value, setup.ham);
  } else if (setup.sim_policy == "constant") {
    const auto u = setup.file.get_list("simulate", "u0");
    if (static_cast<int>(u.size()) != setup.model.dim_control())
      throw hjb::ConfigError("constant policy needs u0 matching the control dimension");
    policy = hjb::Policy::constant_control(
        Eigen::Map<const hjb::Vector>(u.data(), static_cast<Eigen::Index>(u.size())));
  } else {
    throw hjb::ConfigError("unknown policy: " + setup.sim_policy);
  }

  const hjb::CostEstimate est =
      hjb::evaluate_policy_cost(setup.model, setup.ham, setup.cost, setup.sim_x0, policy,
                                setup.solver.lambda, setup.sim);
  json j;
  j["mean"] = est.mean;
  j["std_error"] = est.std_error;
  j["paths"] = est.paths;
  j["horizon"] = est.horizon;
  j["tail_bound"] = est.tail_bound;
  j["ci_half_width"] = est.ci_half_width();
  j["policy"] = setup.sim_policy;
  if (value) j["value_at_x0"] = value->interpolate(setup.model.project(setup.sim_x0));
  j["config_digest"] = setup.file.digest();
  j["version"] = hjb::kVersion;
  write_text(args.out_prefix + "_cost.json", j.dump(2) + "\n");
  std::cout << "policy " << setup.sim_policy << " cost " << est.mean << " +- "
            << est.ci_half_width() << "\n";
  return 0;
}

int run_smoothing(const CommonArgs& args) {
  hjb::ProblemSetup setup = load_with_overrides(args);
  const auto& run = setup.smoothing_run;
  const hjb::LiftedOps ops = hjb::build_lifted(setup.model, run.rho, run.m_nodes,
                                               run.t_max, run.grading);
  std::vector<double> times, finite_norms, lifted_norms;
  for (int i = 0; i < run.points; ++i) {
    const double t =
        run.window_lo *
        std::pow(run.window_hi / run.window_lo, i / static_cast<double>(run.points - 1));
    times.push_back(t);
    finite_norms.push_back(hjb::lambda_finite_norm(setup.model, t));
    lifted_norms.push_back(hjb::lifted_lambda_norm(ops, setup.model, t));
  }
  std::ostringstream csv;
  csv << "t,norm_lambda_finite,norm_lambda_lifted\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    csv << fmt(times[i]) << "," << fmt(finite_norms[i]) << "," << fmt(lifted_norms[i])
        << "\n";
  write_text(args.out_prefix + "_smoothing.csv", csv.str());

  const hjb::SmoothingFit fit = hjb::fit_smoothing_exponent(times, lifted_norms);
  json j;
  j["kappa0"] = fit.kappa0;
  j["gamma"] = fit.gamma;
  j["residual"] = fit.residual;
  j["window"] = {fit.window_lo, fit.window_hi};
  j["residual_warning"] = fit.residual_warning;
  j["config_digest"] = setup.file.digest();
  j["version"] = hjb::kVersion;
  write_text(args.out_prefix + "_smoothing_fit.json", j.dump(2) + "\n");
  std::cout << "smoothing fit gamma=" << fit.gamma << " kappa0=" << fit.kappa0 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mild-solution HJB solver for spectral Ornstein-Uhlenbeck models"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checks_csv, value_csv;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "problem config file")->required();
    cmd->add_option("--out-prefix", args.out_prefix, "output path prefix");
    cmd->add_option("--lambda", args.lambda_override, "discount override");
    cmd->add_option("--tol", args.tol_override, "tolerance override");
    cmd->add_option("--max-iter", args.max_iter_override, "iteration cap override");
    cmd->add_option("--seed", args.seed_override, "seed override");
  };

  CLI::App* solve = app.add_subcommand("solve", "Picard fixed point at the configured discount");
  add_common(solve);
  CLI::App* cont = app.add_subcommand("continue", "resolvent-identity continuation solve");
  add_common(cont);
  CLI::App* verify = app.add_subcommand("verify", "run the property-check suite");
  add_common(verify);
  verify->add_option("--checks", checks_csv, "comma-separated check filter");
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo policy cost");
  add_common(simulate);
  simulate->add_option("--value-csv", value_csv, "value function CSV for the feedback policy");
  CLI::App* smoothing = app.add_subcommand("smoothing", "smoothing exponent diagnostics");
  add_common(smoothing);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_solve(args, false);
    if (cont->parsed()) return run_solve(args, true);
    if (verify->parsed()) return run_verify(args, checks_csv);
    if (simulate->parsed()) return run_simulate(args, value_csv);
    if (smoothing->parsed()) return run_smoothing(args);
  } catch (const hjb::ConfigError& err) {
    std::cerr << "invalid config: " << err.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& err) {
    std::cerr << "invalid config: " << err.what() << "\n";
    return 3;
  } catch (const hjb::NonConvergenceError& err) {
    std::cerr << "non-convergence: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
