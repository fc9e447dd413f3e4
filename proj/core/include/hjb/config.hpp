#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjb/hamiltonian.hpp"
#include "hjb/hjb_solver.hpp"
#include "hjb/simulate.hpp"
#include "hjb/spectral_model.hpp"
#include "hjb/verification.hpp"

namespace hjb {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sectioned key/value file: [section] headers, key = value lines,
// '#' or ';' comments, comma-separated lists.
struct FileConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string raw;

  static FileConfig parse_file(const std::string& path);
  static FileConfig parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_number(const std::string& section, const std::string& key,
                    double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  std::vector<double> get_list(const std::string& section, const std::string& key) const;

  std::string digest() const;  // FNV-1a of the raw text
  std::string to_json() const;
};

// Smoothing-diagnostic settings of the `smoothing` subcommand.
struct SmoothingRunConfig {
  double rho = 1.0;
  int m_nodes = 48;
  double t_max = 20.0;
  double grading = 2.0;
  double window_lo = 1e-3;
  double window_hi = 1e-1;
  int points = 12;
};

// Fully assembled problem: model, costs, Hamiltonian, solver, simulation.
struct ProblemSetup {
  SpectralModel model;
  CostSpec cost;
  HamiltonianSpec ham;
  SolverConfig solver;
  SimulationConfig sim;
  Vector sim_x0;
  std::string sim_policy = "feedback";
  SmoothingRunConfig smoothing_run;
  VerifySetup verify;
  FileConfig file;
};

ProblemSetup load_problem(const std::string& path);
ProblemSetup load_problem_from_string(const std::string& text);

// Fits the smoothing exponent over the config window and stores it in
// setup.solver.smoothing (no-op when already present).
void ensure_smoothing_fit(ProblemSetup& setup);

// Value-function artifact: columns x_1..x_k, v, g_1..g_dU, one row per
// tensor node in flat order, full double precision.
void write_value_csv(const std::string& path, const GridFunction& v);
GridFunction load_value_csv(const std::string& path);

}  // namespace hjb
