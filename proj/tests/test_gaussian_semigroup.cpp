#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hjb/gaussian_semigroup.hpp"
#include "hjb/rng.hpp"
#include "support/oracles.hpp"

using namespace hjb;
using std::numbers::pi;

namespace {

SpectralModel scalar_heat() { return build_heat_model(1, pi, 0.0, 1); }

const QuadratureRule kGh = QuadratureRule::gauss_hermite(40);

// closed form for the scalar mode a = g = 1: P_t cos(x) = e^{-q_t/2} cos(e^{-t} x)
double pt_cos_exact(double t, double x) {
  const double q = (1.0 - std::exp(-2.0 * t)) / 2.0;
  return std::exp(-q / 2.0) * std::cos(std::exp(-t) * x);
}

}  // namespace

TEST_CASE("apply_Pt preserves constants and the sup bound") {
  const SpectralModel model = scalar_heat();
  for (double t : {0.01, 0.5, 3.0}) {
    for (double x : {-2.0, 0.0, 1.5}) {
      const double v = apply_Pt(model, [](const Vector&) { return 4.2; }, t,
                                Vector::Constant(1, x), kGh);
      CHECK(v == doctest::Approx(4.2).epsilon(1e-13));
    }
  }
  // contraction |P_t phi| <= |phi|_inf on random evaluations
  KeyedStream rng(11, 0);
  for (int i = 0; i < 30; ++i) {
    const double t = 0.05 + 2.0 * rng.next_uniform();
    const double x = 4.0 * rng.next_uniform() - 2.0;
    const double v = apply_Pt(model, [](const Vector& y) { return std::cos(3.0 * y(0)); },
                              t, Vector::Constant(1, x), kGh);
    CHECK(std::abs(v) <= 1.0 + 1e-12);
  }
}

TEST_CASE("apply_Pt matches the scalar closed form and the Monte Carlo oracle") {
  const SpectralModel model = scalar_heat();
  const auto cosine = [](const Vector& y) { return std::cos(y(0)); };
  for (double t : {0.1, 0.7, 2.0}) {
    for (double x : {-1.0, 0.3, 2.0}) {
      const double gh = apply_Pt(model, cosine, t, Vector::Constant(1, x), kGh);
      CHECK(gh == doctest::Approx(pt_cos_exact(t, x)).epsilon(1e-10));
    }
  }
  // Monte Carlo oracle agreement within 3 standard errors
  const double t = 0.5, x = 0.8;
  KeyedStream rng(123, 9);
  const double q = (1.0 - std::exp(-2.0 * t)) / 2.0;
  double sum = 0.0, sum_sq = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double y = std::exp(-t) * x + std::sqrt(q) * rng.next_normal();
    const double v = std::cos(y);
    sum += v;
    sum_sq += v * v;
  }
  const double mc = sum / n;
  const double se = std::sqrt((sum_sq / n - mc * mc) / n);
  const double gh = apply_Pt(model, [](const Vector& y) { return std::cos(y(0)); }, t,
                             Vector::Constant(1, x), kGh);
  CHECK(std::abs(gh - mc) <= 3.0 * se);
}

TEST_CASE("apply_Pt mixes at large times") {
  const SpectralModel model = scalar_heat();
  const auto phi = [](const Vector& y) { return std::cos(y(0)); };
  const double v0 = apply_Pt(model, phi, 20.0, Vector::Constant(1, -2.0), kGh);
  const double v1 = apply_Pt(model, phi, 20.0, Vector::Constant(1, 0.0), kGh);
  const double v2 = apply_Pt(model, phi, 20.0, Vector::Constant(1, 2.0), kGh);
  CHECK(std::abs(v0 - v1) < 1e-6);
  CHECK(std::abs(v2 - v1) < 1e-6);
}

TEST_CASE("gauss-hermite and monte-carlo quadratures agree within 4 standard errors") {
  const SpectralModel model = build_heat_model(2, pi, 0.25, 2);
  const auto phi = [](const Vector& y) { return std::cos(y(0) + 0.5 * y(1)); };
  const Vector x = (Vector(2) << 0.4, -0.2).finished();
  const double t = 0.6;
  const double gh = apply_Pt(model, phi, t, x, kGh);
  const auto mc_rule = QuadratureRule::monte_carlo(200000, 77);
  const double mc = apply_Pt(model, phi, t, x, mc_rule);
  // standard error of the MC estimate is below 1/sqrt(n)
  CHECK(std::abs(gh - mc) <= 4.0 / std::sqrt(static_cast<double>(mc_rule.samples)));
}

TEST_CASE("monte-carlo gradient estimator agrees with gauss-hermite") {
  const SpectralModel model = scalar_heat();
  const auto phi = [](const Vector& y) { return std::cos(y(0)); };
  const Vector x = Vector::Constant(1, 0.6);
  const double t = 0.4;
  const Vector gh = grad_B_Pt(model, phi, t, x, kGh);
  const auto mc_rule = QuadratureRule::monte_carlo(400000, 2024);
  const Vector mc = grad_B_Pt(model, phi, t, x, mc_rule);
  // the weight has variance ~ |Lambda|^2, so the standard error is
  // |Lambda| / sqrt(n) up to the bounded integrand factor
  const double se = lambda_finite_norm(model, t) / std::sqrt(400000.0);
  CHECK(std::abs(gh(0) - mc(0)) <= 5.0 * se);
}

TEST_CASE("apply_Pt propagates NaN in the integrand as an error") {
  const SpectralModel model = scalar_heat();
  CHECK_THROWS_WITH_AS(
      apply_Pt(model, [](const Vector&) { return std::nan(""); }, 0.5,
               Vector::Constant(1, 0.0), kGh),
      "NaN in semigroup integrand", std::runtime_error);
}

TEST_CASE("chapman-kolmogorov through a grid intermediate") {
  const SpectralModel model = scalar_heat();
  const auto phi = [](const Vector& y) { return std::cos(2.0 * y(0)); };
  auto axes = GridFunction::uniform_axes({8.0}, 1601);
  for (auto [t, s] : {std::pair{0.3, 0.4}, std::pair{0.8, 0.2}}) {
    const GridFunction inner = GridFunction::from_callable(axes, [&](const Vector& y) {
      return apply_Pt(model, phi, s, y, kGh);
    });
    for (double x : {-1.0, 0.0, 0.7}) {
      const double direct = apply_Pt(model, phi, t + s, Vector::Constant(1, x), kGh);
      const double composed = apply_Pt(model, inner, t, Vector::Constant(1, x), kGh);
      CHECK(std::abs(direct - composed) < 1e-4);
    }
  }
}

TEST_CASE("grad_B_Pt: constants map to zero, finite differences agree") {
  const SpectralModel model = scalar_heat();
  const Vector zero = grad_B_Pt(model, [](const Vector&) { return 3.0; }, 0.4,
                                Vector::Constant(1, 0.7), kGh);
  CHECK(std::abs(zero(0)) < 1e-12);
  CHECK_THROWS_AS(grad_B_Pt(model, [](const Vector&) { return 1.0; }, 0.0,
                            Vector::Constant(1, 0.0), kGh),
                  std::invalid_argument);

  const auto phi = [](const Vector& y) { return std::cos(y(0)); };
  const double b = model.control(0, 0);
  for (double t : {0.05, 0.3, 1.0}) {
    for (double x : {-1.2, 0.0, 0.9}) {
      const Vector g = grad_B_Pt(model, phi, t, Vector::Constant(1, x), kGh);
      const double h = 1e-4;
      const double fd = (apply_Pt(model, phi, t, Vector::Constant(1, x + h * b), kGh) -
                         apply_Pt(model, phi, t, Vector::Constant(1, x - h * b), kGh)) /
                        (2.0 * h);
      CHECK(g(0) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("grad_B_Pt respects the Bismut-Elworthy-Li norm bound") {
  const SpectralModel model = build_heat_model(2, pi, 0.0, 2);
  const auto phi = [](const Vector& y) { return std::cos(y(0) - 2.0 * y(1)); };  // |phi| <= 1
  KeyedStream rng(5, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const double t = 0.01 + 2.0 * rng.next_uniform();
    Vector x(2);
    x << 4.0 * rng.next_uniform() - 2.0, 4.0 * rng.next_uniform() - 2.0;
    const Vector g = grad_B_Pt(model, phi, t, x, kGh);
    const double bound = lambda_finite_norm(model, t);
    CHECK(g.norm() <= bound * (1.0 + 1e-8) + 1e-12);
  }
}

TEST_CASE("lambda_finite: componentwise heat closed form and zero control") {
  const SpectralModel model = build_heat_model(3, pi, 0.25, 2);
  for (double t : {0.05, 0.6}) {
    const Matrix lam = lambda_finite(model, t);
    REQUIRE(lam.rows() == 2);
    for (int i = 0; i < 2; ++i) {
      const double a = model.blocks[static_cast<std::size_t>(i)].rate;
      const double g = model.noise(i, i);
      const double q = g * g * (1.0 - std::exp(-2.0 * a * t)) / (2.0 * a);
      const double expected = std::exp(-a * t) * model.control(i, 0) / std::sqrt(q);
      CHECK(lam(i, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  SpectralModel no_control = model;
  no_control.control.setZero();
  const Matrix lam0 = lambda_finite(no_control, 0.3);
  CHECK(lam0.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lambda_finite detects a violated smoothing hypothesis") {
  // control feeds a coordinate that carries no noise at all
  SpectralModel degenerate;
  degenerate.blocks = {{DriftBlock::Kind::Scalar, 1.0, 0}, {DriftBlock::Kind::Scalar, 2.0, 1}};
  degenerate.noise = Matrix::Zero(2, 1);
  degenerate.noise(0, 0) = 1.0;
  degenerate.control = Matrix::Zero(2, 1);
  degenerate.control(1, 0) = 1.0;
  degenerate.projection = {0, 1};
  degenerate.validate();
  CHECK_THROWS_WITH_AS(lambda_finite(degenerate, 0.5),
                       "smoothing hypothesis violated numerically", std::runtime_error);
}

TEST_CASE("wave model: |Lambda(t)| sqrt(t) is constant over the singular window") {
  Matrix sigma = Matrix::Identity(1, 1);
  const SpectralModel wave = build_wave_model(1, 1.0, sigma, 1);
  std::vector<double> scaled;
  for (double t : {1e-3, 3.16e-3, 1e-2, 3.16e-2, 1e-1})
    scaled.push_back(lambda_finite_norm(wave, t) * std::sqrt(t));
  for (double s : scaled) CHECK(s == doctest::Approx(scaled.front()).epsilon(0.05));
}

TEST_CASE("gaussian law invariants") {
  const SpectralModel model = build_heat_model(2, pi, 0.0, 2);
  GaussianLaw law = projected_law(model, 0.7, Vector::Zero(2));
  CHECK_NOTHROW(law.check_invariants());
  law.cov(0, 1) += 1e-3;  // break stored symmetry
  CHECK_THROWS_AS(law.check_invariants(), std::invalid_argument);
}
