#include "hjb/gaussian_semigroup.hpp"

#include <cmath>
#include <stdexcept>

#include "hjb/rng.hpp"

namespace hjb {

void GaussianLaw::check_invariants() const {
  if (cov != cov.transpose()) throw std::invalid_argument("covariance not symmetric as stored");
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("covariance has a significantly negative eigenvalue");
}

GaussianLaw projected_law(const SpectralModel& model, double t, const Vector& x_proj) {
  if (!(t > 0.0)) throw std::invalid_argument("projected_law requires t > 0");
  GaussianLaw law;
  law.mean = model.projected_flow(t) * x_proj;
  law.cov = model.covariance(t, /*projected_only=*/true);
  return law;
}

Matrix projected_flow_control(const SpectralModel& model, double t) {
  const int k = model.dim_projected();
  Matrix out(k, model.dim_control());
  for (int j = 0; j < model.dim_control(); ++j) {
    const Vector pushed = model.flow(t, model.control.col(j));
    for (int i = 0; i < k; ++i) out(i, j) = pushed(model.projection[i]);
  }
  return out;
}

SemigroupKernel make_kernel(const SpectralModel& model, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("semigroup kernel requires t > 0");
  SemigroupKernel ker;
  ker.flow_proj = model.projected_flow(t);
  Matrix q = model.covariance(t, /*projected_only=*/true);
  const double ridge = 1e-14 * std::max(1.0, q.diagonal().maxCoeff());
  q.diagonal().array() += ridge;
  const PsdFactor f = PsdFactor::make(q);
  if (f.rank() == 0) throw std::runtime_error("degenerate law");
  ker.sqrt_cov = f.sqrt();
  const Matrix m = projected_flow_control(model, t);
  // bel = M^T V D^{-1/2}; equivalent to Lambda(t)^T V on the retained range.
  ker.bel = m.transpose() * f.vectors * f.values.cwiseSqrt().cwiseInverse().asDiagonal();
  return ker;
}

namespace {

// One sweep over the quadrature rule; gradient accumulation is optional.
void integrate_kernel(const SemigroupKernel& ker, const ScalarField& phi,
                      const Vector& x_proj, const QuadratureRule& quad,
                      double* value_out, Vector* grad_out) {
  const int k = static_cast<int>(ker.flow_proj.rows());
  const int r = ker.noise_rank();
  const Vector mean = ker.flow_proj * x_proj;
  double value = 0.0;
  Vector grad = Vector::Zero(ker.bel.rows());
  Vector z(r), point(k);
  if (quad.kind == QuadratureRule::Kind::GaussHermiteTensor) {
    GaussHermiteTensor rule(quad.nodes_per_axis, r);
    for (Eigen::Index i = 0; i < rule.count(); ++i) {
      const double w = rule.node(i, z);
      point = mean + ker.sqrt_cov * z;
      const double fv = phi(point);
      value += w * fv;
      if (grad_out) grad += (w * fv) * (ker.bel * z);
    }
  } else {
    const double inv_n = 1.0 / static_cast<double>(quad.samples);
    for (Eigen::Index i = 0; i < quad.samples; ++i) {
      KeyedStream stream(quad.seed, static_cast<std::uint64_t>(i));
      for (int d = 0; d < r; ++d) z(d) = stream.next_normal();
      point = mean + ker.sqrt_cov * z;
      const double fv = phi(point);
      value += inv_n * fv;
      if (grad_out) grad += (inv_n * fv) * (ker.bel * z);
    }
  }
  if (!std::isfinite(value)) throw std::runtime_error("NaN in semigroup integrand");
  if (value_out) *value_out = value;
  if (grad_out) *grad_out = grad;
}

ScalarField wrap(const GridFunction& g) {
  return [&g](const Vector& x) { return g.interpolate(x); };
}

}  // namespace

double apply_Pt(const SpectralModel& model, const ScalarField& phi, double t,
                const Vector& x_proj, const QuadratureRule& quad) {
  const SemigroupKernel ker = make_kernel(model, t);
  double value = 0.0;
  integrate_kernel(ker, phi, x_proj, quad, &value, nullptr);
  return value;
}

double apply_Pt(const SpectralModel& model, const GridFunction& phi, double t,
                const Vector& x_proj, const QuadratureRule& quad) {
  return apply_Pt(model, wrap(phi), t, x_proj, quad);
}

Vector grad_B_Pt(const SpectralModel& model, const ScalarField& phi, double t,
                 const Vector& x_proj, const QuadratureRule& quad) {
  if (!(t > 0.0)) throw std::invalid_argument("grad_B_Pt requires t > 0");
  const SemigroupKernel ker = make_kernel(model, t);
  Vector grad;
  integrate_kernel(ker, phi, x_proj, quad, nullptr, &grad);
  return grad;
}

Vector grad_B_Pt(const SpectralModel& model, const GridFunction& phi, double t,
                 const Vector& x_proj, const QuadratureRule& quad) {
  return grad_B_Pt(model, wrap(phi), t, x_proj, quad);
}

Matrix lambda_finite(const SpectralModel& model, double t, double eps_reg) {
  if (!(t > 0.0)) throw std::invalid_argument("lambda_finite requires t > 0");
  const Matrix q = model.covariance(t, /*projected_only=*/true);
  const PsdFactor f = PsdFactor::make(q, eps_reg);
  const Matrix m = projected_flow_control(model, t);
  if (f.range_residual(m) > 1e-8)
    throw std::runtime_error("smoothing hypothesis violated numerically");
  return f.apply_inv_sqrt(m);
}

double lambda_finite_norm(const SpectralModel& model, double t, double eps_reg) {
  const Matrix lam = lambda_finite(model, t, eps_reg);
  if (lam.cols() == 1) return lam.col(0).norm();
  Eigen::JacobiSVD<Matrix> svd(lam);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

}  // namespace hjb
