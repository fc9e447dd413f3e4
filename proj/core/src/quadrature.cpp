#include "hjb/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace hjb {

GaussHermite GaussHermite::make(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Hermite needs n >= 1");
  // Golub-Welsch on the Hermite Jacobi matrix (zero diagonal, off-diagonal
  // sqrt(i/2)); weights are the squared first eigenvector components.
  Matrix jacobi = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(0.5 * i);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  GaussHermite rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.nodes[i] = std::sqrt(2.0) * es.eigenvalues()(i);
    rule.weights[i] = v0 * v0;
    wsum += rule.weights[i];
  }
  for (double& w : rule.weights) w /= wsum;
  return rule;
}

GaussHermiteTensor::GaussHermiteTensor(int n_per_axis, int dim)
    : rule_(GaussHermite::make(n_per_axis)), dim_(dim), count_(1) {
  if (dim < 1) throw std::invalid_argument("tensor rule needs dim >= 1");
  for (int d = 0; d < dim; ++d) count_ *= static_cast<Eigen::Index>(n_per_axis);
}

double GaussHermiteTensor::node(Eigen::Index flat, Vector& z) const {
  const auto n = static_cast<Eigen::Index>(rule_.nodes.size());
  double w = 1.0;
  for (int d = 0; d < dim_; ++d) {
    const auto i = static_cast<std::size_t>(flat % n);
    flat /= n;
    z(d) = rule_.nodes[i];
    w *= rule_.weights[i];
  }
  return w;
}

PanelRule PanelRule::legendre(double a, double b, int panels, int order) {
  if (panels < 1) throw std::invalid_argument("need at least one panel");
  // Gauss-Legendre reference nodes on [-1, 1].
  std::vector<double> x, w;
  switch (order) {
    case 1:
      x = {0.0};
      w = {2.0};
      break;
    case 2:
      x = {-0.5773502691896257, 0.5773502691896257};
      w = {1.0, 1.0};
      break;
    case 4:
      x = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
      w = {0.34785484513745385, 0.6521451548625461, 0.6521451548625461, 0.34785484513745385};
      break;
    case 6:
      x = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
           0.2386191860831969, 0.6612093864662645, 0.9324695142031521};
      w = {0.17132449237917036, 0.36076157304813866, 0.46791393457269104,
           0.46791393457269104, 0.36076157304813866, 0.17132449237917036};
      break;
    default:
      throw std::invalid_argument("unsupported Gauss-Legendre order");
  }
  PanelRule rule;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.nodes.push_back(mid + 0.5 * h * x[i]);
      rule.weights.push_back(0.5 * h * w[i]);
    }
  }
  return rule;
}

}  // namespace hjb
