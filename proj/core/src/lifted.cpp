#include "hjb/lifted.hpp"

#include <cmath>
#include <stdexcept>

#include "hjb/gaussian_semigroup.hpp"
#include "hjb/psd.hpp"

namespace hjb {

Vector LiftedOps::adjoint_apply(const SpectralModel& model,
                                const std::function<Vector(double)>& z) const {
  const int k = proj_dim();
  Vector out = Vector::Zero(model.n_total());
  for (int i = 0; i < node_count(); ++i) {
    const double scale = weights[i] * std::exp(-rho * t_nodes[i]);
    const Matrix flow_t = model.flow_matrix(t_nodes[i]);
    const Vector zi = z(t_nodes[i]);
    if (zi.size() != k) throw std::invalid_argument("trajectory sample dimension mismatch");
    // (P e^{tA})^T z = e^{tA^T} P^T z
    Vector lifted = Vector::Zero(model.n_total());
    for (int r = 0; r < k; ++r) lifted(model.projection[r]) = zi(r);
    out += scale * flow_t.transpose() * lifted;
  }
  return out;
}

LiftedOps build_lifted(const SpectralModel& model, double rho, int m_nodes,
                       double t_max, double grading) {
  if (!(rho > 0.0)) throw std::invalid_argument("build_lifted requires rho > 0");
  if (m_nodes < 4) throw std::invalid_argument("build_lifted requires m_nodes >= 4");
  if (!(t_max > 0.0)) throw std::invalid_argument("build_lifted requires t_max > 0");
  if (!(grading >= 1.0)) throw std::invalid_argument("grading exponent must be >= 1");

  LiftedOps ops;
  ops.rho = rho;
  const int k = model.dim_projected();
  ops.t_nodes.resize(m_nodes);
  ops.weights.resize(m_nodes);
  ops.upsilon.resize(m_nodes * k, model.n_total());
  ops.traj.resize(m_nodes * k, k);
  for (int i = 0; i < m_nodes; ++i) {
    const double u = (i + 0.5) / m_nodes;
    ops.t_nodes[i] = t_max * std::pow(u, grading);
    ops.weights[i] = t_max * grading * std::pow(u, grading - 1.0) / m_nodes;
    const double scale = std::sqrt(ops.weights[i] * std::exp(-rho * ops.t_nodes[i]));
    const Matrix flow_t = model.flow_matrix(ops.t_nodes[i]);
    for (int r = 0; r < k; ++r)
      ops.upsilon.row(i * k + r) = scale * flow_t.row(model.projection[r]);
    ops.traj.middleRows(i * k, k) = scale * model.projected_flow(ops.t_nodes[i]);
  }
  const Eigen::HouseholderQR<Matrix> qr(ops.traj);
  ops.traj_q = qr.householderQ() * Matrix::Identity(ops.traj.rows(), k);
  ops.traj_r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return ops;
}

Matrix lifted_sigma(const LiftedOps& ops, const SpectralModel& model, double t) {
  const Matrix q = model.covariance(t, /*projected_only=*/false);
  return ops.upsilon * q * ops.upsilon.transpose();
}

namespace {

// Factored evaluation: all lifted objects live in the column space of
// `traj`, so Sigma_t^{-1/2} Upsilon e^{tA} B reduces to k x k algebra via a
// thin QR of traj.  Identical to the direct (m k)-dimensional computation
// up to the spectral cutoff, and affordable for large mode counts.
struct FactoredLambda {
  Matrix q_basis;  // (m k) x k, orthonormal columns
  Matrix small;    // k x d_U factor, lambda = q_basis * small
};

FactoredLambda lifted_lambda_factored(const LiftedOps& ops, const SpectralModel& model,
                                      double t) {
  const Matrix q_proj = model.covariance(t, /*projected_only=*/true);
  const PsdFactor f =
      PsdFactor::make(ops.traj_r * q_proj * ops.traj_r.transpose(), ops.eps_reg);
  const Matrix rhs = ops.traj_r * projected_flow_control(model, t);
  if (f.range_residual(rhs) > 1e-8)
    throw std::runtime_error("smoothing hypothesis violated numerically");
  return {ops.traj_q, f.apply_inv_sqrt(rhs)};
}

}  // namespace

Matrix lifted_lambda(const LiftedOps& ops, const SpectralModel& model, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("lifted_lambda requires t > 0");
  const FactoredLambda fl = lifted_lambda_factored(ops, model, t);
  return fl.q_basis * fl.small;
}

double lifted_lambda_norm(const LiftedOps& ops, const SpectralModel& model, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("lifted_lambda requires t > 0");
  const FactoredLambda fl = lifted_lambda_factored(ops, model, t);
  if (fl.small.cols() == 1) return fl.small.col(0).norm();
  Eigen::JacobiSVD<Matrix> svd(fl.small);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

double shift_norm_on_trajectories(const LiftedOps& ops, const SpectralModel& model, double t) {
  const int k = ops.proj_dim();
  const Matrix gram = ops.traj.transpose() * ops.traj;
  const Matrix flow = model.projected_flow(t);
  const Matrix shifted = flow.transpose() * gram * flow;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(shifted, gram);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("shift norm eigenproblem failed");
  return std::sqrt(std::max(0.0, es.eigenvalues()(k - 1)));
}

SmoothingFit fit_smoothing_exponent(const std::vector<double>& times,
                                    const std::vector<double>& norms,
                                    double warn_threshold) {
  if (times.size() != norms.size()) throw std::invalid_argument("times/norms size mismatch");
  if (times.size() < 8) throw std::invalid_argument("smoothing fit needs at least 8 points");
  double lo = times.front(), hi = times.front();
  for (double t : times) {
    if (!(t > 0.0)) throw std::invalid_argument("smoothing fit times must be positive");
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (hi / lo < 99.0)
    throw std::invalid_argument("smoothing fit window must span at least two decades");
  for (double n : norms)
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::invalid_argument("smoothing fit rejected: norms must be positive");

  const auto n = static_cast<Eigen::Index>(times.size());
  Matrix design(n, 2);
  Vector target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = -std::log(times[static_cast<std::size_t>(i)]);
    target(i) = std::log(norms[static_cast<std::size_t>(i)]);
  }
  const Vector coef = design.colPivHouseholderQr().solve(target);
  SmoothingFit fit;
  fit.kappa0 = std::exp(coef(0));
  fit.gamma = coef(1);
  fit.residual = (design * coef - target).cwiseAbs().maxCoeff();
  fit.window_lo = lo;
  fit.window_hi = hi;
  fit.residual_warning = fit.residual > warn_threshold;
  return fit;
}

}  // namespace hjb
