#pragma once

#include <stdexcept>

#include "hjb/types.hpp"

namespace hjb {

// Spectral factorization of a symmetric PSD matrix with a relative cutoff:
// eigenvalues below cutoff * max get treated as exact zeros, so square roots
// and inverse square roots are pseudo-inverses on the retained range.
struct PsdFactor {
  Matrix vectors;   // columns: retained eigenvectors (n x r)
  Vector values;    // retained eigenvalues (r), all > 0
  int dropped = 0;  // count of discarded directions

  static PsdFactor make(const Matrix& m, double rel_cutoff = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
    const Vector ev = es.eigenvalues();
    const double top = ev.size() ? ev.maxCoeff() : 0.0;
    const double cut = rel_cutoff * std::max(top, 0.0);
    int r = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (ev(i) > cut) ++r;
    PsdFactor f;
    f.vectors.resize(m.rows(), r);
    f.values.resize(r);
    int j = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (ev(i) > cut) {
        f.vectors.col(j) = es.eigenvectors().col(i);
        f.values(j) = ev(i);
        ++j;
      }
    }
    f.dropped = static_cast<int>(ev.size()) - r;
    return f;
  }

  int rank() const { return static_cast<int>(values.size()); }

  Matrix sqrt() const {  // V sqrt(D), maps standard normals to N(0, M)
    return vectors * values.cwiseSqrt().asDiagonal();
  }
  Matrix inv_sqrt() const {  // pseudo-inverse square root V D^{-1/2} V^T
    return vectors * values.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
  }
  Matrix apply_inv_sqrt(const Matrix& rhs) const { return inv_sqrt() * rhs; }

  // Relative norm of the component of `rhs` columns outside the retained range.
  double range_residual(const Matrix& rhs) const {
    const double denom = rhs.norm();
    if (denom == 0.0) return 0.0;
    const Matrix res = rhs - vectors * (vectors.transpose() * rhs);
    return res.norm() / denom;
  }
};

}  // namespace hjb
