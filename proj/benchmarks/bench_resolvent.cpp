#include <benchmark/benchmark.h>

#include <cmath>

#include "hjb/hjb_solver.hpp"

namespace {

hjb::SolverConfig bench_config(int nodes) {
  hjb::SolverConfig cfg;
  cfg.lambda = 1.0;
  cfg.nodes_per_axis = nodes;
  cfg.quad = hjb::QuadratureRule::gauss_hermite(24);
  cfg.panels_singular = 32;
  cfg.panels_tail = 24;
  cfg.tol_picard = 1e-6;
  return cfg;
}

void BM_resolvent_assemble(benchmark::State& state) {
  const auto model = hjb::build_heat_model(1, M_PI, 0.0, 1);
  const auto cfg = bench_config(static_cast<int>(state.range(0)));
  const auto axes = hjb::solver_axes(model, cfg);
  for (auto _ : state) {
    hjb::ResolventOperator op(model, axes, cfg.lambda, cfg);
    benchmark::DoNotOptimize(op.grid_size());
  }
}
BENCHMARK(BM_resolvent_assemble)->Arg(401)->Arg(1201);

void BM_resolvent_apply(benchmark::State& state) {
  const auto model = hjb::build_heat_model(1, M_PI, 0.0, 1);
  const auto cfg = bench_config(static_cast<int>(state.range(0)));
  const auto axes = hjb::solver_axes(model, cfg);
  const hjb::ResolventOperator op(model, axes, cfg.lambda, cfg);
  const hjb::Vector source = hjb::sample_nodes(
      axes, [](const hjb::Vector& x) { return std::cos(x(0)); });
  for (auto _ : state) {
    benchmark::DoNotOptimize(op.apply(source));
  }
}
BENCHMARK(BM_resolvent_apply)->Arg(401)->Arg(1201);

void BM_picard_solve(benchmark::State& state) {
  const auto model = hjb::build_heat_model(1, M_PI, 0.0, 1);
  auto cfg = bench_config(801);
  std::vector<double> times, norms;
  for (int i = 0; i < 12; ++i) {
    const double t = 1e-3 * std::pow(100.0, i / 11.0);
    times.push_back(t);
    norms.push_back(hjb::lambda_finite_norm(model, t));
  }
  cfg.smoothing = hjb::fit_smoothing_exponent(times, norms);
  hjb::HamiltonianSpec ham;
  ham.radius = 1.0;
  ham.nisio_bound = 2.0;
  const auto ell0 = [](const hjb::Vector& x) { return std::cos(x(0)); };
  for (auto _ : state) {
    auto result = hjb::picard_solve(model, ell0, ham, 5.0, cfg);
    benchmark::DoNotOptimize(result.trace.iterations);
  }
}
BENCHMARK(BM_picard_solve);

}  // namespace

BENCHMARK_MAIN();
