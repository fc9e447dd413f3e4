#include "hjb/hamiltonian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hjb/rng.hpp"

namespace hjb {

namespace {

bool lex_less(const Vector& a, const Vector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i) - 1e-12) return true;
    if (a(i) > b(i) + 1e-12) return false;
  }
  return false;
}

// Tensor grid scan over the ball |p| <= radius.  `f` is maximized; the
// lexicographically smallest argmax among near-ties is kept.
template <typename F>
std::pair<Vector, double> ball_grid_max(int dim, double radius, int resolution, const F& f) {
  Vector best_arg = Vector::Zero(dim);
  double best = -std::numeric_limits<double>::infinity();
  Vector p(dim);
  std::vector<int> idx(dim, 0);
  auto scan = [&](const Vector& center, double half_width, int res) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      for (int d = 0; d < dim; ++d)
        p(d) = center(d) - half_width + 2.0 * half_width * idx[d] / (res - 1);
      if (p.norm() <= radius + 1e-15) {
        const double v = f(p);
        if (v > best + 1e-14 || (v > best - 1e-14 && lex_less(p, best_arg))) {
          best = v;
          best_arg = p;
        }
      }
      int d = 0;
      while (d < dim && ++idx[d] == res) idx[d++] = 0;
      if (d == dim) break;
    }
  };
  scan(Vector::Zero(dim), radius, resolution);
  // one local refinement around the coarse argmax
  const double step = 2.0 * radius / (resolution - 1);
  scan(best_arg, step, 21);
  return {best_arg, best};
}

}  // namespace

double HamiltonianSpec::l1(const Vector& u) const {
  if (l1_kind == L1Kind::Quadratic) return l1_coeff * u.squaredNorm();
  // table lookup: nearest listed point
  for (std::size_t i = 0; i < points.size(); ++i)
    if ((points[i] - u).norm() < 1e-12) return l1_table[i];
  throw std::invalid_argument("l1 table lookup for a control not in the list");
}

double HamiltonianSpec::l1_sup() const {
  if (l1_kind == L1Kind::Table) {
    double s = 0.0;
    for (double v : l1_table) s = std::max(s, std::abs(v));
    return s;
  }
  const double lip = lipschitz();
  return l1_coeff * lip * lip;
}

double HamiltonianSpec::lipschitz() const {
  switch (control_set) {
    case ControlSet::Ball:
      return radius;
    case ControlSet::Box: {
      double s = 0.0;
      for (Eigen::Index i = 0; i < box_lo.size(); ++i)
        s += std::pow(std::max(std::abs(box_lo(i)), std::abs(box_hi(i))), 2.0);
      return std::sqrt(s);
    }
    case ControlSet::Finite: {
      double s = 0.0;
      for (const auto& u : points) s = std::max(s, u.norm());
      return s;
    }
  }
  return 0.0;
}

void HamiltonianSpec::validate() const {
  if (dim < 1) throw std::invalid_argument("control dimension must be >= 1");
  switch (control_set) {
    case ControlSet::Ball:
      if (!(radius >= 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("ball radius must be finite and nonnegative");
      break;
    case ControlSet::Box:
      if (box_lo.size() != dim || box_hi.size() != dim)
        throw std::invalid_argument("box bounds must match the control dimension");
      for (Eigen::Index i = 0; i < box_lo.size(); ++i)
        if (!(box_lo(i) <= box_hi(i)) || !std::isfinite(box_lo(i)) || !std::isfinite(box_hi(i)))
          throw std::invalid_argument("box bounds must be finite with lo <= hi");
      break;
    case ControlSet::Finite:
      if (points.empty()) throw std::invalid_argument("finite control set must be nonempty");
      for (const auto& u : points)
        if (u.size() != dim) throw std::invalid_argument("control point dimension mismatch");
      break;
  }
  if (l1_kind == L1Kind::Quadratic && !(l1_coeff >= 0.0))
    throw std::invalid_argument("quadratic control cost must have nonnegative coefficient");
  if (l1_kind == L1Kind::Table) {
    if (control_set != ControlSet::Finite)
      throw std::invalid_argument("table costs require a finite control set");
    if (l1_table.size() != points.size())
      throw std::invalid_argument("l1 table size must match the point list");
  }
  if (!(nisio_bound >= lipschitz()))
    throw std::invalid_argument("nisio bound must dominate Lip(H_min)");
  if (search_resolution < 3) throw std::invalid_argument("search resolution too small");
}

namespace {

// Closed-form current-value minimizer for ball/box sets with quadratic l1.
Vector closed_form_minimizer(const HamiltonianSpec& spec, const Vector& p) {
  const double c = spec.l1_coeff;
  if (spec.control_set == HamiltonianSpec::ControlSet::Ball) {
    const double r = spec.radius;
    if (c > 0.0) {
      Vector u = -p / (2.0 * c);
      const double n = u.norm();
      if (n > r) u *= r / n;
      return u;
    }
    const double n = p.norm();
    if (n == 0.0) {
      Vector u = Vector::Zero(spec.dim);
      u(0) = -r;  // lexicographic tie-break on the sphere of minimizers
      return u;
    }
    return (-r / n) * p;
  }
  // Box with quadratic cost is separable per axis.
  Vector u(spec.dim);
  for (int i = 0; i < spec.dim; ++i) {
    double ui;
    if (c > 0.0) {
      ui = std::clamp(-p(i) / (2.0 * c), spec.box_lo(i), spec.box_hi(i));
    } else {
      if (p(i) > 0.0) ui = spec.box_lo(i);
      else if (p(i) < 0.0) ui = spec.box_hi(i);
      else ui = spec.box_lo(i);
    }
    u(i) = ui;
  }
  return u;
}

}  // namespace

Vector feedback_control(const HamiltonianSpec& spec, const Vector& p) {
  if (p.size() != spec.dim) throw std::invalid_argument("gradient dimension mismatch");
  if (!p.allFinite()) throw std::invalid_argument("h_min requires finite p");
  if (spec.control_set == HamiltonianSpec::ControlSet::Finite) {
    Vector best = spec.points.front();
    double best_v = p.dot(best) + spec.l1(best);
    for (const auto& u : spec.points) {
      const double v = p.dot(u) + spec.l1(u);
      if (v < best_v - 1e-14 || (v < best_v + 1e-14 && lex_less(u, best))) {
        best_v = v;
        best = u;
      }
    }
    return best;
  }
  if (spec.l1_kind == HamiltonianSpec::L1Kind::Quadratic)
    return closed_form_minimizer(spec, p);
  // generic fallback: grid search of the negated objective
  auto neg = [&](const Vector& u) { return -(p.dot(u) + spec.l1(u)); };
  if (spec.control_set == HamiltonianSpec::ControlSet::Ball)
    return ball_grid_max(spec.dim, spec.radius, spec.search_resolution, neg).first;
  throw std::invalid_argument("unsupported control set / cost combination");
}

double h_min(const HamiltonianSpec& spec, const Vector& p) {
  const Vector u = feedback_control(spec, p);
  return p.dot(u) + spec.l1(u);
}

double nisio_g(const HamiltonianSpec& spec, const Vector& alpha) {
  if (alpha.size() != spec.dim) throw std::invalid_argument("alpha dimension mismatch");
  auto objective = [&](const Vector& p) { return h_min(spec, p) - alpha.dot(p); };
  return ball_grid_max(spec.dim, spec.nisio_bound, spec.search_resolution, objective).second;
}

GridFunction nisio_step(const HamiltonianSpec& spec, const SpectralModel& model,
                        const GridFunction& u, double eps, int substeps) {
  if (!(eps > 0.0)) throw std::invalid_argument("nisio_step requires eps > 0");
  if (substeps < 1) throw std::invalid_argument("nisio_step requires substeps >= 1");
  const double step_eps = eps / substeps;
  const Matrix embed = model.projected_control();  // k x d_U

  // Coarse drift grid over the ball |a| <= M, shared by all nodes, with the
  // running cost precomputed.  Refinement around the per-node argmin keeps
  // the grid-resolution floor below the O(eps) generator defect.
  const int coarse_res = 41;
  std::vector<Vector> drifts;
  std::vector<double> costs;
  {
    Vector a(spec.dim);
    std::vector<int> idx(spec.dim, 0);
    while (true) {
      for (int d = 0; d < spec.dim; ++d)
        a(d) = -spec.nisio_bound + 2.0 * spec.nisio_bound * idx[d] / (coarse_res - 1);
      if (a.norm() <= spec.nisio_bound + 1e-15) {
        drifts.push_back(a);
        costs.push_back(nisio_g(spec, a));
      }
      int d = 0;
      while (d < spec.dim && ++idx[d] == coarse_res) idx[d++] = 0;
      if (d == spec.dim) break;
    }
  }
  const double coarse_step = 2.0 * spec.nisio_bound / (coarse_res - 1);

  GridFunction current = u;
  for (int s = 0; s < substeps; ++s) {
    Vector next(current.size());
    for (Eigen::Index i = 0; i < current.size(); ++i) {
      const Vector x = current.node_coords(i);
      double best = std::numeric_limits<double>::infinity();
      Vector best_a = Vector::Zero(spec.dim);
      for (std::size_t j = 0; j < drifts.size(); ++j) {
        const double v = step_eps * costs[j] +
                         current.interpolate(x + step_eps * (embed * drifts[j]));
        if (v < best) {
          best = v;
          best_a = drifts[j];
        }
      }
      // refinement pass around the coarse argmin
      Vector a(spec.dim);
      std::vector<int> idx(spec.dim, 0);
      const int res = 21;
      while (true) {
        for (int d = 0; d < spec.dim; ++d)
          a(d) = best_a(d) - coarse_step + 2.0 * coarse_step * idx[d] / (res - 1);
        if (a.norm() <= spec.nisio_bound + 1e-15) {
          const double v = step_eps * nisio_g(spec, a) +
                           current.interpolate(x + step_eps * (embed * a));
          best = std::min(best, v);
        }
        int d = 0;
        while (d < spec.dim && ++idx[d] == res) idx[d++] = 0;
        if (d == spec.dim) break;
      }
      next(i) = best;
    }
    current = GridFunction(current.axes(), std::move(next));
  }
  return current;
}

ConcavityReport check_concavity(const HamiltonianSpec& spec, int n_samples, std::uint64_t seed) {
  ConcavityReport report;
  report.samples = n_samples;
  const double span = 2.0 * std::max(1.0, spec.nisio_bound);
  KeyedStream stream(seed, 0);
  double worst = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    Vector p(spec.dim), q(spec.dim);
    for (int d = 0; d < spec.dim; ++d) {
      p(d) = span * (2.0 * stream.next_uniform() - 1.0);
      q(d) = span * (2.0 * stream.next_uniform() - 1.0);
    }
    const double mid = h_min(spec, 0.5 * (p + q));
    const double violation = 0.5 * (h_min(spec, p) + h_min(spec, q)) - mid;
    worst = std::max(worst, violation);
  }
  report.worst_violation = worst;
  report.pass = worst <= 1e-9;
  return report;
}

}  // namespace hjb
