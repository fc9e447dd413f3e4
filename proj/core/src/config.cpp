#include "hjb/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hjb/gaussian_semigroup.hpp"

namespace hjb {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

FileConfig FileConfig::parse_string(const std::string& text) {
  FileConfig cfg;
  cfg.raw = text;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("malformed section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
    cfg.sections[section][key] = value;
  }
  return cfg;
}

FileConfig FileConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

bool FileConfig::has(const std::string& section, const std::string& key) const {
  const auto s = sections.find(section);
  return s != sections.end() && s->second.count(key) > 0;
}

std::string FileConfig::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const auto s = sections.find(section);
  if (s == sections.end()) return fallback;
  const auto k = s->second.find(key);
  return k == s->second.end() ? fallback : k->second;
}

double FileConfig::get_number(const std::string& section, const std::string& key,
                              double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string raw_value = sections.at(section).at(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(raw_value, &used);
    if (trim(raw_value.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("not a number: [" + section + "] " + key + " = " + raw_value);
}

int FileConfig::get_int(const std::string& section, const std::string& key,
                        int fallback) const {
  const double v = get_number(section, key, fallback);
  if (v != std::floor(v)) throw ConfigError("expected integer: [" + section + "] " + key);
  return static_cast<int>(v);
}

std::vector<double> FileConfig::get_list(const std::string& section,
                                         const std::string& key) const {
  std::vector<double> out;
  if (!has(section, key)) return out;
  std::istringstream in(sections.at(section).at(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad list entry: [" + section + "] " + key);
    }
  }
  return out;
}

std::string FileConfig::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : raw) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string FileConfig::to_json() const {
  nlohmann::json j;
  for (const auto& [section, pairs] : sections) {
    for (const auto& [key, value] : pairs) j[section][key] = value;
  }
  return j.dump();
}

namespace {

SpectralModel model_from(const FileConfig& f) {
  const std::string kind = f.get_string("model", "kind", "heat");
  if (kind == "heat") {
    return build_heat_model(f.get_int("model", "n_modes", 1),
                            f.get_number("model", "length", std::numbers::pi),
                            f.get_number("model", "beta", 0.0),
                            f.get_int("model", "n_proj", 1));
  }
  if (kind == "wave") {
    const int n_pairs = f.get_int("model", "n_modes", 1);
    const int n_proj = f.get_int("model", "n_proj", 1);
    std::vector<double> sig = f.get_list("model", "sigma");
    if (sig.empty()) sig.assign(1, f.get_number("model", "sigma", 1.0));
    Matrix sigma = Matrix::Zero(n_proj, n_proj);
    if (static_cast<int>(sig.size()) == 1) {
      sigma = sig[0] * Matrix::Identity(n_proj, n_proj);
    } else if (static_cast<int>(sig.size()) == n_proj) {
      for (int i = 0; i < n_proj; ++i) sigma(i, i) = sig[static_cast<std::size_t>(i)];
    } else {
      throw ConfigError("wave sigma must be a scalar or one entry per projected pair");
    }
    return build_wave_model(n_pairs, f.get_number("model", "c", 1.0), sigma, n_proj,
                            f.get_number("model", "length", std::numbers::pi));
  }
  throw ConfigError("unknown model kind: " + kind);
}

CostSpec cost_from(const FileConfig& f, int k) {
  CostSpec cost;
  const std::string base = f.get_string("cost", "base", "cos_linear");
  if (base == "cos_linear") cost.base = CostSpec::Base::CosLinear;
  else if (base == "logistic_quadratic") cost.base = CostSpec::Base::LogisticQuadratic;
  else throw ConfigError("unknown cost base: " + base);
  std::vector<double> w = f.get_list("cost", "weights");
  if (w.empty()) {
    w.assign(static_cast<std::size_t>(k), 0.0);
    w[0] = 1.0;
  }
  if (static_cast<int>(w.size()) != k)
    throw ConfigError("cost weights must match the projected dimension");
  cost.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  cost.amplitude = f.get_number("cost", "amplitude", 1.0);
  cost.offset = f.get_number("cost", "offset", 0.0);
  return cost;
}

HamiltonianSpec ham_from(const FileConfig& f, int d_u) {
  HamiltonianSpec ham;
  ham.dim = d_u;
  const std::string kind = f.get_string("hamiltonian", "control_kind", "ball");
  if (kind == "ball") {
    ham.control_set = HamiltonianSpec::ControlSet::Ball;
    ham.radius = f.get_number("hamiltonian", "radius", 1.0);
  } else if (kind == "box") {
    ham.control_set = HamiltonianSpec::ControlSet::Box;
    const auto lo = f.get_list("hamiltonian", "box_lo");
    const auto hi = f.get_list("hamiltonian", "box_hi");
    if (static_cast<int>(lo.size()) != d_u || static_cast<int>(hi.size()) != d_u)
      throw ConfigError("box bounds must match the control dimension");
    ham.box_lo = Eigen::Map<const Vector>(lo.data(), d_u);
    ham.box_hi = Eigen::Map<const Vector>(hi.data(), d_u);
  } else if (kind == "points") {
    ham.control_set = HamiltonianSpec::ControlSet::Finite;
    const auto flat = f.get_list("hamiltonian", "points");
    if (flat.empty() || flat.size() % static_cast<std::size_t>(d_u) != 0)
      throw ConfigError("points list must be a multiple of the control dimension");
    for (std::size_t i = 0; i < flat.size(); i += static_cast<std::size_t>(d_u)) {
      Vector u(d_u);
      for (int d = 0; d < d_u; ++d) u(d) = flat[i + static_cast<std::size_t>(d)];
      ham.points.push_back(u);
    }
  } else {
    throw ConfigError("unknown control kind: " + kind);
  }
  const std::string l1 = f.get_string("hamiltonian", "l1_kind", "quadratic");
  if (l1 == "quadratic") {
    ham.l1_kind = HamiltonianSpec::L1Kind::Quadratic;
    ham.l1_coeff = f.get_number("hamiltonian", "l1_coeff", 0.5);
  } else if (l1 == "table") {
    ham.l1_kind = HamiltonianSpec::L1Kind::Table;
    ham.l1_table = f.get_list("hamiltonian", "l1_table");
  } else {
    throw ConfigError("unknown l1 kind: " + l1);
  }
  ham.nisio_bound =
      f.get_number("hamiltonian", "nisio_M", 2.0 * std::max(1.0, ham.lipschitz()));
  ham.search_resolution = f.get_int("hamiltonian", "search_resolution", 201);
  try {
    ham.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("invalid hamiltonian: ") + err.what());
  }
  return ham;
}

SolverConfig solver_from(const FileConfig& f) {
  SolverConfig cfg;
  cfg.lambda = f.get_number("solver", "lambda", 1.0);
  cfg.t_max = f.get_number("solver", "t_max", -1.0);
  cfg.panels_singular = f.get_int("solver", "panels_singular", 48);
  cfg.panels_tail = f.get_int("solver", "panels_tail", 32);
  cfg.panel_order = f.get_int("solver", "panel_order", 4);
  cfg.box_extents = f.get_list("solver", "box_extents");
  cfg.nodes_per_axis = f.get_int("solver", "nodes_per_axis", 1201);
  cfg.box_sigma_mult = f.get_number("solver", "box_sigma_mult", 6.0);
  const std::string quad = f.get_string("solver", "quad", "gauss_hermite");
  if (quad == "gauss_hermite") {
    cfg.quad = QuadratureRule::gauss_hermite(f.get_int("solver", "gh_nodes", 32));
  } else if (quad == "monte_carlo") {
    cfg.quad = QuadratureRule::monte_carlo(
        static_cast<Eigen::Index>(f.get_number("solver", "mc_samples", 20000)),
        static_cast<std::uint64_t>(f.get_int("solver", "seed", 0)));
  } else {
    throw ConfigError("unknown quadrature kind: " + quad);
  }
  cfg.tol_picard = f.get_number("solver", "tol_picard", 1e-6);
  cfg.max_iterations = f.get_int("solver", "max_iter", 300);
  cfg.damping = f.get_number("solver", "damping", 1.0);
  cfg.nu_anchor = f.get_number("solver", "nu", -1.0);
  cfg.tol_outer = f.get_number("solver", "tol_outer", 1e-5);
  cfg.max_outer_iterations = f.get_int("solver", "max_outer_iter", 400);
  cfg.theta_contraction = f.get_number("solver", "theta_contraction", 0.9);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("invalid solver config: ") + err.what());
  }
  return cfg;
}

}  // namespace

ProblemSetup load_problem_from_string(const std::string& text) {
  const FileConfig f = FileConfig::parse_string(text);
  ProblemSetup setup;
  try {
    setup.model = model_from(f);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("invalid model: ") + err.what());
  }
  setup.cost = cost_from(f, setup.model.dim_projected());
  setup.ham = ham_from(f, setup.model.dim_control());
  setup.solver = solver_from(f);

  setup.sim.dt = f.get_number("simulate", "dt", 5e-3);
  setup.sim.horizon = f.get_number("simulate", "horizon", -1.0);
  setup.sim.n_paths =
      static_cast<Eigen::Index>(f.get_number("simulate", "n_paths", 10000));
  setup.sim.seed = static_cast<std::uint64_t>(f.get_number("simulate", "seed", 1));
  const auto x0 = f.get_list("simulate", "x0");
  setup.sim_x0 = Vector::Zero(setup.model.n_total());
  for (std::size_t i = 0; i < x0.size() && i < static_cast<std::size_t>(setup.model.n_total()); ++i)
    setup.sim_x0(static_cast<Eigen::Index>(i)) = x0[i];
  setup.sim_policy = f.get_string("simulate", "policy", "feedback");

  setup.smoothing_run.rho = f.get_number("smoothing", "rho", 1.0);
  setup.smoothing_run.m_nodes = f.get_int("smoothing", "m_nodes", 48);
  setup.smoothing_run.t_max = f.get_number("smoothing", "t_max", 20.0);
  setup.smoothing_run.grading = f.get_number("smoothing", "grading", 2.0);
  setup.smoothing_run.window_lo = f.get_number("smoothing", "window_lo", 1e-3);
  setup.smoothing_run.window_hi = f.get_number("smoothing", "window_hi", 1e-1);
  setup.smoothing_run.points = f.get_int("smoothing", "points", 12);

  setup.verify.model = setup.model;
  setup.verify.cost = setup.cost;
  setup.verify.ham = setup.ham;
  setup.verify.seed = static_cast<std::uint64_t>(f.get_int("verify", "seed", 42));
  setup.verify.lipschitz_pairs = f.get_int("verify", "lipschitz_pairs", 20);
  setup.verify.lipschitz_tol_direct = f.get_number("verify", "lipschitz_tol", 1.02);
  setup.verify.lipschitz_tol_continuation =
      f.get_number("verify", "lipschitz_tol_continuation", 1.05);
  setup.verify.linear_identity_tol = f.get_number("verify", "linear_identity_tol", 1e-5);
  setup.verify.injectivity_detect = f.get_number("verify", "injectivity_detect", 1e-4);
  if (f.has("verify", "checks")) {
    std::istringstream in(f.sections.at("verify").at("checks"));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) setup.verify.checks.push_back(item);
    }
  }

  setup.verify.solver = setup.solver;
  setup.file = f;
  return setup;
}

ProblemSetup load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_problem_from_string(buffer.str());
}

void write_value_csv(const std::string& path, const GridFunction& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  const int k = v.dim();
  const auto d_u = static_cast<int>(v.has_gradient() ? v.gradient().cols() : 0);
  for (int d = 0; d < k; ++d) out << "x_" << d + 1 << ",";
  out << "v";
  for (int u = 0; u < d_u; ++u) out << ",g_" << u + 1;
  out << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Vector x = v.node_coords(i);
    for (int d = 0; d < k; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", x(d));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.17g", v.values()(i));
    out << buf;
    for (int u = 0; u < d_u; ++u) {
      std::snprintf(buf, sizeof buf, "%.17g", v.gradient()(i, u));
      out << "," << buf;
    }
    out << "\n";
  }
}

GridFunction load_value_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open value CSV: " + path);
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("empty value CSV: " + path);
  int k = 0, d_u = 0;
  {
    std::istringstream cols(header);
    std::string col;
    bool seen_v = false;
    while (std::getline(cols, col, ',')) {
      if (col.rfind("x_", 0) == 0 && !seen_v) ++k;
      else if (col == "v") seen_v = true;
      else if (col.rfind("g_", 0) == 0 && seen_v) ++d_u;
      else throw ConfigError("unexpected value CSV column: " + col);
    }
    if (k < 1 || !seen_v) throw ConfigError("malformed value CSV header");
  }

  std::vector<Vector> coords;
  std::vector<double> values;
  std::vector<std::vector<double>> grads;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Vector x(k);
    for (int d = 0; d < k; ++d) {
      if (!std::getline(row, cell, ',')) throw ConfigError("short value CSV row");
      x(d) = std::stod(cell);
    }
    if (!std::getline(row, cell, ',')) throw ConfigError("short value CSV row");
    coords.push_back(x);
    values.push_back(std::stod(cell));
    std::vector<double> g;
    for (int u = 0; u < d_u; ++u) {
      if (!std::getline(row, cell, ',')) throw ConfigError("short value CSV row");
      g.push_back(std::stod(cell));
    }
    grads.push_back(std::move(g));
  }

  // axes recovered from the coordinate columns of the flat tensor layout
  std::vector<std::vector<double>> axes(static_cast<std::size_t>(k));
  for (int d = 0; d < k; ++d) {
    std::vector<double> vals;
    for (const auto& x : coords) vals.push_back(x(d));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    axes[static_cast<std::size_t>(d)] = std::move(vals);
  }
  Eigen::Index expected = 1;
  for (const auto& a : axes) expected *= static_cast<Eigen::Index>(a.size());
  if (expected != static_cast<Eigen::Index>(values.size()))
    throw ConfigError("value CSV rows do not form a tensor grid");

  GridFunction g(axes, Eigen::Map<const Vector>(values.data(),
                                                static_cast<Eigen::Index>(values.size())));
  // rows must already be in flat node order
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if ((g.node_coords(i) - coords[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff() >
        1e-12)
      throw ConfigError("value CSV rows are not in tensor node order");
  }
  if (d_u > 0) {
    Matrix grad(g.size(), d_u);
    for (Eigen::Index i = 0; i < g.size(); ++i)
      for (int u = 0; u < d_u; ++u)
        grad(i, u) = grads[static_cast<std::size_t>(i)][static_cast<std::size_t>(u)];
    g.set_gradient(std::move(grad));
  }
  return g;
}

void ensure_smoothing_fit(ProblemSetup& setup) {
  if (setup.solver.smoothing) return;
  const auto& run = setup.smoothing_run;
  std::vector<double> times, norms;
  for (int i = 0; i < run.points; ++i) {
    const double t =
        run.window_lo *
        std::pow(run.window_hi / run.window_lo, i / static_cast<double>(run.points - 1));
    times.push_back(t);
    norms.push_back(lambda_finite_norm(setup.model, t));
  }
  setup.solver.smoothing = fit_smoothing_exponent(times, norms);
  setup.verify.solver = setup.solver;
}

}  // namespace hjb
