#pragma once

#include <cstdint>
#include <vector>

#include "hjb/types.hpp"

namespace hjb {

// Nodes/weights representing the standard normal law: E[f(Z)] ~ sum_i w_i f(z_i).
// Derived from physicists' Gauss-Hermite via Golub-Welsch; weights are
// normalized to sum to one and nodes carry the sqrt(2) change of variable.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  static GaussHermite make(int n);
};

// Tensor product of one-dimensional standard-normal rules; iterates all
// node combinations of dimension k.
struct GaussHermiteTensor {
  GaussHermiteTensor(int n_per_axis, int dim);
  Eigen::Index count() const { return count_; }
  // Fills z (dim) with the standard-normal node and returns its weight.
  double node(Eigen::Index flat, Vector& z) const;

 private:
  GaussHermite rule_;
  int dim_;
  Eigen::Index count_;
};

// Composite Gauss-Legendre panels on [a, b].
struct PanelRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  // order: 1 = composite midpoint, otherwise Gauss-Legendre of that order.
  static PanelRule legendre(double a, double b, int panels, int order);
};

// Choice of integration scheme for Gaussian expectations.
struct QuadratureRule {
  enum class Kind { GaussHermiteTensor, MonteCarlo };
  Kind kind = Kind::GaussHermiteTensor;
  int nodes_per_axis = 32;   // gauss_hermite_tensor
  Eigen::Index samples = 100000;  // monte_carlo
  std::uint64_t seed = 0;    // monte_carlo

  static QuadratureRule gauss_hermite(int nodes_per_axis) {
    return {Kind::GaussHermiteTensor, nodes_per_axis, 0, 0};
  }
  static QuadratureRule monte_carlo(Eigen::Index samples, std::uint64_t seed) {
    return {Kind::MonteCarlo, 0, samples, seed};
  }
};

}  // namespace hjb
