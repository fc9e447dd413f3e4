#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hjb/types.hpp"

namespace hjb {

// Value function on a tensor grid over the projected coordinates.
// Interpolation is multilinear; queries outside the box are clamped to the
// nearest boundary node.  May carry a companion grid of B-directional
// gradients (one d_U-vector per node).
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::vector<std::vector<double>> axes, Vector values);

  static GridFunction constant(std::vector<std::vector<double>> axes, double value);
  static GridFunction from_callable(std::vector<std::vector<double>> axes,
                                    const std::function<double(const Vector&)>& f);

  // Uniform axis helper: n nodes on [-extent, extent] per listed extent.
  static std::vector<std::vector<double>> uniform_axes(const std::vector<double>& extents,
                                                       int nodes_per_axis);

  int dim() const { return static_cast<int>(axes_.size()); }
  Eigen::Index size() const { return values_.size(); }
  const std::vector<std::vector<double>>& axes() const { return axes_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  bool has_gradient() const { return gradient_.size() > 0; }
  const Matrix& gradient() const { return gradient_; }  // size n_nodes x d_U
  void set_gradient(Matrix g);

  void set_bound(double b) { bound_ = b; }
  std::optional<double> bound() const { return bound_; }

  double interpolate(const Vector& x) const;
  Vector interpolate_gradient(const Vector& x) const;

  Vector node_coords(Eigen::Index flat) const;
  double sup_norm() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }

  // Largest centered-second-difference estimate of the multilinear
  // interpolation error, max over axes of |v_{i-1} - 2 v_i + v_{i+1}| / 8.
  double interpolation_error_estimate() const;

  // Validates finiteness, strictly increasing axes, and the attached bound.
  void check_invariants() const;

 private:
  struct Locator {
    int cell;       // lower node index
    double frac;    // in [0, 1]
  };
  Locator locate(int axis, double coord) const;

  std::vector<std::vector<double>> axes_;
  std::vector<Eigen::Index> strides_;
  Vector values_;
  Matrix gradient_;
  std::optional<double> bound_;
};

}  // namespace hjb
