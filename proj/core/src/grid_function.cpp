#include "hjb/grid_function.hpp"

#include <cmath>
#include <stdexcept>

namespace hjb {

GridFunction::GridFunction(std::vector<std::vector<double>> axes, Vector values)
    : axes_(std::move(axes)), values_(std::move(values)) {
  Eigen::Index n = 1;
  strides_.resize(axes_.size());
  for (int d = dim() - 1; d >= 0; --d) {
    strides_[d] = n;
    n *= static_cast<Eigen::Index>(axes_[d].size());
  }
  if (values_.size() != n)
    throw std::invalid_argument("grid values do not match axes");
  check_invariants();
}

GridFunction GridFunction::constant(std::vector<std::vector<double>> axes, double value) {
  Eigen::Index n = 1;
  for (const auto& a : axes) n *= static_cast<Eigen::Index>(a.size());
  GridFunction g(std::move(axes), Vector::Constant(n, value));
  return g;
}

GridFunction GridFunction::from_callable(std::vector<std::vector<double>> axes,
                                         const std::function<double(const Vector&)>& f) {
  GridFunction g = constant(std::move(axes), 0.0);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.values_(i) = f(g.node_coords(i));
  g.check_invariants();
  return g;
}

std::vector<std::vector<double>> GridFunction::uniform_axes(const std::vector<double>& extents,
                                                            int nodes_per_axis) {
  if (nodes_per_axis < 2) throw std::invalid_argument("need at least 2 nodes per axis");
  std::vector<std::vector<double>> axes;
  for (double ext : extents) {
    std::vector<double> a(nodes_per_axis);
    for (int i = 0; i < nodes_per_axis; ++i)
      a[i] = -ext + 2.0 * ext * i / (nodes_per_axis - 1);
    axes.push_back(std::move(a));
  }
  return axes;
}

void GridFunction::set_gradient(Matrix g) {
  if (g.rows() != values_.size())
    throw std::invalid_argument("gradient rows must match node count");
  gradient_ = std::move(g);
}

GridFunction::Locator GridFunction::locate(int axis, double coord) const {
  const auto& a = axes_[axis];
  const int n = static_cast<int>(a.size());
  if (coord <= a.front()) return {0, 0.0};
  if (coord >= a.back()) return {n - 2, 1.0};
  int lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (a[mid] <= coord ? lo : hi) = mid;
  }
  return {lo, (coord - a[lo]) / (a[lo + 1] - a[lo])};
}

double GridFunction::interpolate(const Vector& x) const {
  if (x.size() != dim()) throw std::invalid_argument("query dimension mismatch");
  std::vector<Locator> loc(dim());
  for (int d = 0; d < dim(); ++d) loc[d] = locate(d, x(d));
  double out = 0.0;
  const int corners = 1 << dim();
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    Eigen::Index idx = 0;
    for (int d = 0; d < dim(); ++d) {
      const bool hi = (c >> d) & 1;
      w *= hi ? loc[d].frac : 1.0 - loc[d].frac;
      idx += strides_[d] * (loc[d].cell + (hi ? 1 : 0));
    }
    if (w != 0.0) out += w * values_(idx);
  }
  return out;
}

Vector GridFunction::interpolate_gradient(const Vector& x) const {
  if (!has_gradient()) throw std::logic_error("grid function has no gradient grid");
  std::vector<Locator> loc(dim());
  for (int d = 0; d < dim(); ++d) loc[d] = locate(d, x(d));
  Vector out = Vector::Zero(gradient_.cols());
  const int corners = 1 << dim();
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    Eigen::Index idx = 0;
    for (int d = 0; d < dim(); ++d) {
      const bool hi = (c >> d) & 1;
      w *= hi ? loc[d].frac : 1.0 - loc[d].frac;
      idx += strides_[d] * (loc[d].cell + (hi ? 1 : 0));
    }
    if (w != 0.0) out += w * gradient_.row(idx).transpose();
  }
  return out;
}

Vector GridFunction::node_coords(Eigen::Index flat) const {
  Vector x(dim());
  for (int d = 0; d < dim(); ++d) {
    const Eigen::Index n = static_cast<Eigen::Index>(axes_[d].size());
    x(d) = axes_[d][static_cast<std::size_t>((flat / strides_[d]) % n)];
  }
  return x;
}

double GridFunction::interpolation_error_estimate() const {
  double worst = 0.0;
  for (int d = 0; d < dim(); ++d) {
    const Eigen::Index n = static_cast<Eigen::Index>(axes_[d].size());
    if (n < 3) continue;
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      const Eigen::Index pos = (i / strides_[d]) % n;
      if (pos == 0 || pos == n - 1) continue;
      const double d2 = values_(i - strides_[d]) - 2.0 * values_(i) + values_(i + strides_[d]);
      worst = std::max(worst, std::abs(d2) / 8.0);
    }
  }
  return worst;
}

void GridFunction::check_invariants() const {
  for (const auto& a : axes_) {
    if (a.size() < 2) throw std::invalid_argument("axis needs at least 2 nodes");
    for (std::size_t i = 1; i < a.size(); ++i)
      if (!(a[i] > a[i - 1])) throw std::invalid_argument("axis nodes must be strictly increasing");
  }
  if (!values_.allFinite()) throw std::invalid_argument("grid values must be finite");
  if (bound_ && sup_norm() > *bound_ * (1.0 + 1e-12) + 1e-300)
    throw std::invalid_argument("grid values exceed the declared bound");
}

}  // namespace hjb
