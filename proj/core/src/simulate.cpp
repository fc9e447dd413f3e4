#include "hjb/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "hjb/psd.hpp"
#include "hjb/rng.hpp"

namespace hjb {

Policy Policy::zero(int d_u) {
  Policy p;
  p.kind = Kind::Zero;
  p.constant = Vector::Zero(d_u);
  return p;
}

Policy Policy::constant_control(Vector u) {
  Policy p;
  p.kind = Kind::Constant;
  p.constant = std::move(u);
  return p;
}

Policy Policy::feedback(const GridFunction& v, const HamiltonianSpec& ham) {
  if (!v.has_gradient())
    throw std::invalid_argument("feedback policy needs a value function with gradients");
  Policy p;
  p.kind = Kind::Feedback;
  p.value = &v;
  p.ham = &ham;
  return p;
}

Vector Policy::control(const SpectralModel& model, const Vector& x) const {
  switch (kind) {
    case Kind::Zero:
    case Kind::Constant:
      return constant;
    case Kind::Feedback: {
      const Vector grad = value->interpolate_gradient(model.project(x));
      return feedback_control(*ham, grad);
    }
  }
  return constant;
}

namespace {

struct Stepper {
  Matrix flow;       // e^{dt A}
  Matrix response;   // int_0^dt e^{sA} B ds
  Matrix noise_map;  // factor of Q_dt
  int noise_rank;

  Stepper(const SpectralModel& model, double dt)
      : flow(model.flow_matrix(dt)),
        response(model.control_flow_integral(dt)),
        noise_map(PsdFactor::make(model.covariance(dt, false)).sqrt()),
        noise_rank(static_cast<int>(noise_map.cols())) {}
};

}  // namespace

PathEnsemble simulate_paths(const SpectralModel& model, const Vector& x0,
                            const Policy& policy, double dt, double horizon,
                            Eigen::Index n_paths, std::uint64_t seed,
                            bool store_trajectories) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate_paths requires dt > 0");
  if (!(horizon >= dt)) throw std::invalid_argument("simulate_paths requires horizon >= dt");
  if (x0.size() != model.n_total()) throw std::invalid_argument("x0 dimension mismatch");

  const Stepper step(model, dt);
  const int steps = static_cast<int>(std::llround(horizon / dt));
  PathEnsemble ensemble;
  ensemble.steps = steps;
  ensemble.dt = dt;
  ensemble.final_states.resize(n_paths, model.n_total());
  if (store_trajectories) ensemble.trajectories.reserve(static_cast<std::size_t>(n_paths));

  Vector xi(step.noise_rank);
  for (Eigen::Index p = 0; p < n_paths; ++p) {
    KeyedStream stream(seed, static_cast<std::uint64_t>(p));
    Vector x = x0;
    Matrix traj;
    if (store_trajectories) {
      traj.resize(steps + 1, model.n_total());
      traj.row(0) = x.transpose();
    }
    for (int k = 0; k < steps; ++k) {
      const Vector u = policy.control(model, x);
      for (int d = 0; d < step.noise_rank; ++d) xi(d) = stream.next_normal();
      x = step.flow * x + step.response * u + step.noise_map * xi;
      if (store_trajectories) traj.row(k + 1) = x.transpose();
    }
    ensemble.final_states.row(p) = x.transpose();
    if (store_trajectories) ensemble.trajectories.push_back(std::move(traj));
  }
  return ensemble;
}

CostEstimate evaluate_policy_cost(const SpectralModel& model, const HamiltonianSpec& ham,
                                  const CostSpec& cost, const Vector& x0,
                                  const Policy& policy, double lambda,
                                  const SimulationConfig& sim) {
  if (!(lambda > 0.0)) throw std::invalid_argument("cost estimate requires lambda > 0");
  const double sup_cost = cost.bound() + ham.l1_sup();
  // Default horizon keeps the discounted tail below 2e-4 * max(1, sup).
  const double tail_target = 2e-4 * std::max(1.0, sup_cost);
  const double horizon =
      sim.horizon > 0.0
          ? sim.horizon
          : std::max(sim.dt, std::log(std::max(sup_cost, 1e-12) / (tail_target * lambda)) /
                                 lambda);

  const Stepper step(model, sim.dt);
  const int steps = static_cast<int>(std::llround(horizon / sim.dt));

  // Exact per-step discount weight int_{t_k}^{t_{k+1}} e^{-lambda s} ds.
  std::vector<double> weight(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double a = std::exp(-lambda * sim.dt * k);
    const double b = std::exp(-lambda * sim.dt * (k + 1));
    weight[static_cast<std::size_t>(k)] = (a - b) / lambda;
  }

  double sum = 0.0, sum_sq = 0.0;
  Vector xi(step.noise_rank);
  for (Eigen::Index p = 0; p < sim.n_paths; ++p) {
    KeyedStream stream(sim.seed, static_cast<std::uint64_t>(p));
    Vector x = x0;
    double cost_p = 0.0;
    double l0_here = cost.eval_full(model, x);
    for (int k = 0; k < steps; ++k) {
      const Vector u = policy.control(model, x);
      for (int d = 0; d < step.noise_rank; ++d) xi(d) = stream.next_normal();
      x = step.flow * x + step.response * u + step.noise_map * xi;
      const double l0_next = cost.eval_full(model, x);
      cost_p += weight[static_cast<std::size_t>(k)] *
                (0.5 * (l0_here + l0_next) + ham.l1(u));
      l0_here = l0_next;
    }
    sum += cost_p;
    sum_sq += cost_p * cost_p;
  }
  CostEstimate est;
  est.paths = sim.n_paths;
  est.horizon = steps * sim.dt;
  est.mean = sum / static_cast<double>(sim.n_paths);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(sim.n_paths) - est.mean * est.mean);
  est.std_error = std::sqrt(var / static_cast<double>(sim.n_paths));
  est.tail_bound = sup_cost * std::exp(-lambda * est.horizon) / lambda;
  return est;
}

}  // namespace hjb
