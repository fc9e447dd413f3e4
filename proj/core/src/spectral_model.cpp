#include "hjb/spectral_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hjb {

namespace {

// Primitive antiderivatives over [0, t].
double int_exp(double c, double t) {
  if (c == 0.0) return t;
  return std::expm1(c * t) / c;
}

double int_exp_cos(double c, double w, double t) {
  if (w == 0.0) return int_exp(c, t);
  const double d = c * c + w * w;
  return (std::exp(c * t) * (c * std::cos(w * t) + w * std::sin(w * t)) - c) / d;
}

double int_exp_sin(double c, double w, double t) {
  if (w == 0.0) return 0.0;
  const double d = c * c + w * w;
  return (std::exp(c * t) * (c * std::sin(w * t) - w * std::cos(w * t)) + w) / d;
}

double int_cos(double w, double t) {
  if (w == 0.0) return t;
  return std::sin(w * t) / w;
}

double int_sin(double w, double t) {
  if (w == 0.0) return 0.0;
  // 1 - cos(wt) = 2 sin^2(wt/2), stable for small arguments
  const double s = std::sin(0.5 * w * t);
  return 2.0 * s * s / w;
}

const Eigen::Matrix2d kSkew = (Eigen::Matrix2d() << 0.0, 1.0, -1.0, 0.0).finished();

Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d r;
  const double c = std::cos(theta), s = std::sin(theta);
  r << c, s, -s, c;
  return r;
}

// int_0^t e^{sA_i} M e^{sA_j^T} ds for one block pair, closed form.
Matrix block_pair_integral(const DriftBlock& bi, const DriftBlock& bj,
                           const Matrix& m, double t) {
  using Kind = DriftBlock::Kind;
  if (bi.kind == Kind::Scalar && bj.kind == Kind::Scalar) {
    return m * int_exp(-(bi.rate + bj.rate), t);
  }
  if (bi.kind == Kind::Scalar && bj.kind == Kind::SkewPair) {
    const double ec = int_exp_cos(-bi.rate, bj.rate, t);
    const double es = int_exp_sin(-bi.rate, bj.rate, t);
    Matrix out(1, 2);
    out(0, 0) = m(0, 0) * ec + m(0, 1) * es;
    out(0, 1) = -m(0, 0) * es + m(0, 1) * ec;
    return out;
  }
  if (bi.kind == Kind::SkewPair && bj.kind == Kind::Scalar) {
    const double ec = int_exp_cos(-bj.rate, bi.rate, t);
    const double es = int_exp_sin(-bj.rate, bi.rate, t);
    Matrix out(2, 1);
    out(0, 0) = ec * m(0, 0) + es * m(1, 0);
    out(1, 0) = -es * m(0, 0) + ec * m(1, 0);
    return out;
  }
  // Pair x pair: expand R(a s) M R(b s)^T with product-to-sum identities in
  // the difference/sum frequencies.
  const double diff = bi.rate - bj.rate;
  const double sum = bi.rate + bj.rate;
  const double cd = int_cos(diff, t), cs = int_cos(sum, t);
  const double sd = int_sin(diff, t), ss = int_sin(sum, t);
  const Eigen::Matrix2d m2 = m;
  const Eigen::Matrix2d mj = m2 * kSkew.transpose();  // M J^T = -M J
  const Eigen::Matrix2d jm = kSkew * m2;
  const Eigen::Matrix2d jmj = kSkew * m2 * kSkew.transpose();
  // integrand = cos(a)cos(b) M - cos(a)sin(b) M J + sin(a)cos(b) J M
  //             - sin(a)sin(b) J M J  with (a, b) = (rate_i s, rate_j s);
  // note M J^T = -M J and J M J^T = -J M J.
  Eigen::Matrix2d out = 0.5 * (cd + cs) * m2 + 0.5 * (sd - ss) * (-mj) +
                        0.5 * (sd + ss) * jm - 0.5 * (cd - cs) * (-jmj);
  return out;
}

}  // namespace

int SpectralModel::n_total() const {
  int n = 0;
  for (const auto& b : blocks) n += b.dim();
  return n;
}

void SpectralModel::validate() const {
  const int n = n_total();
  int expect = 0;
  for (const auto& b : blocks) {
    if (b.offset != expect) throw std::invalid_argument("drift blocks must tile the state");
    if (b.kind == DriftBlock::Kind::Scalar && !(b.rate > 0.0))
      throw std::invalid_argument("scalar drift block must be strictly negative");
    expect += b.dim();
  }
  if (noise.rows() != n || control.rows() != n)
    throw std::invalid_argument("noise/control row count must match the state dimension");
  if (projection.empty()) throw std::invalid_argument("projection must be nonempty");
  for (std::size_t i = 0; i < projection.size(); ++i) {
    if (projection[i] < 0 || projection[i] >= n)
      throw std::invalid_argument("projection index out of range");
    if (i > 0 && projection[i] <= projection[i - 1])
      throw std::invalid_argument("projection indices must be strictly increasing");
  }
  // Both coordinates of a skew pair must be projected together, otherwise P
  // does not commute with e^{tA}.
  for (const auto& b : blocks) {
    if (b.kind != DriftBlock::Kind::SkewPair) continue;
    const bool has0 = std::binary_search(projection.begin(), projection.end(), b.offset);
    const bool has1 = std::binary_search(projection.begin(), projection.end(), b.offset + 1);
    if (has0 != has1)
      throw std::invalid_argument("projection must be aligned with skew pairs");
  }
}

Vector SpectralModel::flow(double t, const Vector& x) const {
  Vector out(x.size());
  for (const auto& b : blocks) {
    if (b.kind == DriftBlock::Kind::Scalar) {
      out(b.offset) = std::exp(-b.rate * t) * x(b.offset);
    } else {
      out.segment<2>(b.offset) = rotation(b.rate * t) * x.segment<2>(b.offset);
    }
  }
  return out;
}

Matrix SpectralModel::flow_matrix(double t) const {
  Matrix out = Matrix::Zero(n_total(), n_total());
  for (const auto& b : blocks) {
    if (b.kind == DriftBlock::Kind::Scalar) {
      out(b.offset, b.offset) = std::exp(-b.rate * t);
    } else {
      out.block<2, 2>(b.offset, b.offset) = rotation(b.rate * t);
    }
  }
  return out;
}

Matrix SpectralModel::projected_flow(double t) const {
  const int k = dim_projected();
  const Matrix full = flow_matrix(t);
  Matrix out(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) out(i, j) = full(projection[i], projection[j]);
  return out;
}

Matrix SpectralModel::projected_control() const {
  const int k = dim_projected();
  Matrix out(k, dim_control());
  for (int i = 0; i < k; ++i) out.row(i) = control.row(projection[i]);
  return out;
}

Vector SpectralModel::project(const Vector& x) const {
  Vector out(dim_projected());
  for (int i = 0; i < dim_projected(); ++i) out(i) = x(projection[i]);
  return out;
}

Matrix SpectralModel::covariance(double t, bool projected_only) const {
  if (!(t > 0.0)) throw std::invalid_argument("covariance requires t > 0");
  const int n = n_total();
  const Matrix gg = noise * noise.transpose();
  Matrix q = Matrix::Zero(n, n);
  for (const auto& bi : blocks) {
    for (const auto& bj : blocks) {
      const Matrix m = gg.block(bi.offset, bj.offset, bi.dim(), bj.dim());
      if (m.isZero(0.0)) continue;
      q.block(bi.offset, bj.offset, bi.dim(), bj.dim()) =
          block_pair_integral(bi, bj, m, t);
    }
  }
  q = 0.5 * (q + q.transpose()).eval();
  if (!projected_only) return q;
  const int k = dim_projected();
  Matrix out(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) out(i, j) = q(projection[i], projection[j]);
  return out;
}

Matrix SpectralModel::control_flow_integral(double t) const {
  Matrix out(n_total(), dim_control());
  for (const auto& b : blocks) {
    if (b.kind == DriftBlock::Kind::Scalar) {
      out.row(b.offset) = int_exp(-b.rate, t) * control.row(b.offset);
    } else {
      Eigen::Matrix2d r;
      const double ec = int_cos(b.rate, t);
      const double es = int_sin(b.rate, t);
      r << ec, es, -es, ec;
      out.middleRows<2>(b.offset) = r * control.middleRows<2>(b.offset);
    }
  }
  return out;
}

double dirichlet_coefficient(int n, double length) {
  if (n < 1) throw std::invalid_argument("dirichlet_coefficient requires n >= 1");
  if (!(length > 0.0)) throw std::invalid_argument("dirichlet_coefficient requires length > 0");
  // int_0^L (1 - xi/L) sqrt(2/L) sin(n pi xi / L) dxi = sqrt(2/L) * L/(n pi)
  return std::sqrt(2.0 / length) * length / (n * std::numbers::pi);
}

SpectralModel build_heat_model(int n_modes, double length, double beta, int n_proj) {
  if (n_modes < 1 || n_proj < 1 || n_modes < n_proj)
    throw std::invalid_argument("heat model requires n_modes >= n_proj >= 1");
  if (!(length > 0.0)) throw std::invalid_argument("heat model requires length > 0");
  if (beta < 0.0) throw std::invalid_argument("heat model requires beta >= 0");

  SpectralModel m;
  m.kind = "heat";
  m.blocks.reserve(n_modes);
  m.noise = Matrix::Zero(n_modes, n_modes);
  m.control = Matrix::Zero(n_modes, 1);
  for (int i = 0; i < n_modes; ++i) {
    const int n = i + 1;
    const double lam = std::pow(n * std::numbers::pi / length, 2.0);
    m.blocks.push_back({DriftBlock::Kind::Scalar, lam, i});
    m.noise(i, i) = std::pow(lam, -beta);
    m.control(i, 0) = lam * dirichlet_coefficient(n, length);
  }
  m.projection.resize(n_proj);
  for (int i = 0; i < n_proj; ++i) m.projection[i] = i;
  m.growth_scale = 1.0;
  m.growth_rate = -std::pow(std::numbers::pi / length, 2.0);
  m.validate();
  return m;
}

SpectralModel build_wave_model(int n_pairs, double c, const Matrix& sigma,
                               int n_proj_pairs, double length) {
  if (length <= 0.0) length = std::numbers::pi;
  if (n_pairs < 1 || n_proj_pairs < 1 || n_pairs < n_proj_pairs)
    throw std::invalid_argument("wave model requires n_pairs >= n_proj_pairs >= 1");
  if (!(c > 0.0)) throw std::invalid_argument("wave model requires c > 0");
  if (sigma.rows() != n_proj_pairs)
    throw std::invalid_argument("sigma must have one row per projected pair");

  // Positive definiteness of the projected velocity noise, the smoothing
  // hypothesis of the wave application.
  const Matrix ss = sigma * sigma.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(ss);
  if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
    throw std::invalid_argument("projected noise covariance is rank deficient");

  SpectralModel m;
  m.kind = "wave";
  const int n = 2 * n_pairs;
  m.noise = Matrix::Zero(n, sigma.cols());
  m.control = Matrix::Zero(n, n_pairs);
  for (int i = 0; i < n_pairs; ++i) {
    m.blocks.push_back({DriftBlock::Kind::SkewPair, c * (i + 1) * std::numbers::pi / length, 2 * i});
    m.control(2 * i + 1, i) = 1.0;  // control feeds the velocity coordinate
    if (i < n_proj_pairs) m.noise.row(2 * i + 1) = sigma.row(i);
  }
  m.projection.resize(2 * n_proj_pairs);
  for (int i = 0; i < 2 * n_proj_pairs; ++i) m.projection[i] = i;
  m.growth_scale = 1.0;
  m.growth_rate = 0.0;
  m.validate();
  return m;
}

double CostSpec::eval_projected(const Vector& x_proj) const {
  if (weights.size() != x_proj.size())
    throw std::invalid_argument("cost weights must match the projected dimension");
  switch (base) {
    case Base::CosLinear:
      return amplitude * std::cos(weights.dot(x_proj) + offset);
    case Base::LogisticQuadratic: {
      const double q = weights.dot(x_proj.cwiseProduct(x_proj));
      return amplitude / (1.0 + std::exp(-(q - offset)));
    }
  }
  return 0.0;
}

double CostSpec::eval_full(const SpectralModel& model, const Vector& x) const {
  return eval_projected(model.project(x));
}

}  // namespace hjb
