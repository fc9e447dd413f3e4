#include <benchmark/benchmark.h>

#include <cmath>

#include "hjb/gaussian_semigroup.hpp"
#include "hjb/lifted.hpp"

namespace {

void BM_apply_Pt_gauss_hermite(benchmark::State& state) {
  const auto model = hjb::build_heat_model(1, M_PI, 0.0, 1);
  const auto quad = hjb::QuadratureRule::gauss_hermite(static_cast<int>(state.range(0)));
  const hjb::Vector x = hjb::Vector::Constant(1, 0.7);
  const auto phi = [](const hjb::Vector& y) { return std::cos(y(0)); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(hjb::apply_Pt(model, phi, 0.5, x, quad));
  }
}
BENCHMARK(BM_apply_Pt_gauss_hermite)->Arg(16)->Arg(64);

void BM_lambda_finite_heat200(benchmark::State& state) {
  const auto model = hjb::build_heat_model(200, M_PI, 0.25, 200);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hjb::lambda_finite_norm(model, 1e-5));
  }
}
BENCHMARK(BM_lambda_finite_heat200);

void BM_lifted_lambda_heat200(benchmark::State& state) {
  const auto model = hjb::build_heat_model(200, M_PI, 0.25, 200);
  const auto ops = hjb::build_lifted(model, 1.0, 96, 10.0, 4.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hjb::lifted_lambda_norm(ops, model, 1e-5));
  }
}
BENCHMARK(BM_lifted_lambda_heat200);

}  // namespace

BENCHMARK_MAIN();
