#pragma once

// Experiment driver: ground-state preparation, propagation against the exact
// reference, the density-error metric, the dt-convergence criterion and
// (U, V) scans.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "td2rdm/dynamics.hpp"
#include "td2rdm/oracle.hpp"

namespace td2rdm {

inline constexpr double kDtConvergenceThreshold = 5e-3;
inline constexpr const char* kThreadsEnvVar = "TD2RDM_THREADS";

struct RunConfig {
  HubbardConfig model;
  PropagationConfig propagation;
  std::vector<double> scan_interaction{0.5, 1.0, 2.2};
  std::vector<double> scan_trap{0.4, 1.0};
  std::string output_dir = "td2rdm-out";
  unsigned long seed = 1;
  bool check_dt = true;
};

/// INI-style key = value file; sections [model], [propagation],
/// [purification], [scan], [run]. Missing keys keep their defaults.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(std::istream& in);

/// Trapezoidal integral of samples on a grid.
double trapezoid(const std::vector<double>& t, const std::vector<double>& y);

/// int |n1 - n1_exact| dt / int n1_exact dt.
double metric_delta_n1(const std::vector<double>& t, const std::vector<double>& n1,
                       const std::vector<double>& n1_exact);

struct ConvergenceResult {
  bool converged = false;
  double residual = 0.0;
  std::string cause;
};

/// (1/T) int |n1^dt - n1^dt'| dt on the coarser of the two grids; the finer
/// grid must contain every coarse point.
ConvergenceResult dt_convergence(const std::vector<double>& t_a, const std::vector<double>& n1_a,
                                 const std::vector<double>& t_b, const std::vector<double>& n1_b,
                                 double threshold = kDtConvergenceThreshold);

struct InitialState {
  GroundState ground;
  SpinBlock2Rdm d;
  double s_squared = 0.0;
};

InitialState prepare_initial_state(const HubbardConfig& model);

/// Site densities of the exact untrapped evolution of psi0.
std::vector<std::vector<double>> exact_site_densities(const HubbardOracle& oracle,
                                                      const Vector& psi0,
                                                      const std::vector<double>& times);

/// Site densities of free fermions: gamma(t) = e^{-iht} gamma0 e^{iht}.
std::vector<std::vector<double>> free_fermion_site_densities(const HubbardConfig& model,
                                                             const Matrix& gamma0,
                                                             const std::vector<double>& times);

struct Drift {
  double energy = 0.0;     // max |E(t) - E(0)| / max(1, |E(0)|)
  double eta = 0.0;        // same for <eta^+ eta^->
  double particles = 0.0;  // max |sum_i n_i(t) - N| / N
};

Drift conservation_drift(const std::vector<TrajectoryRecord>& records, int particles);

struct SystemRun {
  PropagationResult propagation;
  std::vector<double> times;
  std::vector<double> n1;
  std::vector<double> n1_reference;
  std::string reference;  // "exact" or "free-fermion"
  double delta_n1_bar = 0.0;
  Drift drift;
  double max_defect_before = 0.0;
  double max_defect_after = 0.0;
  int unconverged_steps = 0;
  InitialState initial;
};

/// Ground state with the trap on, TD2RDM propagation without it, reference
/// densities (exact diagonalization, or the free-fermion closed form at U = 0).
SystemRun run_system(const HubbardConfig& model, const PropagationConfig& prop,
                     const PropagationHooks& hooks = {});

struct ScanCell {
  double interaction = 0.0;
  double trap = 0.0;
  double delta_n1_bar = 0.0;
  bool dt_converged = false;
  double dt_residual = 0.0;
  double max_defect_before = 0.0;
  double max_defect_after = 0.0;
  int unconverged_steps = 0;
  Drift drift;
  std::string error;
};

ScanCell run_cell(const HubbardConfig& model, const PropagationConfig& prop, bool check_dt,
                  SystemRun* primary = nullptr);

/// Receives each finished cell with its primary run, on the worker thread.
using CellSink = std::function<void(std::size_t index, const ScanCell& cell, const SystemRun& run)>;

/// Runs every (U, V) cell; cell order in the output follows the grid
/// (U outer, V inner) regardless of `threads`.
std::vector<ScanCell> run_scan(const RunConfig& cfg, int threads, const CellSink& sink = {});

/// Parallelism from the environment (at least 1).
int parallelism_from_env();

void write_scan_json(std::ostream& out, const RunConfig& cfg, const std::vector<ScanCell>& cells);
void write_cell_json(std::ostream& out, const ScanCell& cell);
ScanCell read_cell_json(std::istream& in);
void write_run_json(std::ostream& out, const HubbardConfig& model, const PropagationConfig& prop,
                    const SystemRun& run, const ConvergenceResult* convergence = nullptr);
void write_report_json(std::ostream& out, const PurificationReport& report, double defect_tol);

}  // namespace td2rdm
