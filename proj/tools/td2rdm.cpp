// td2rdm command line tool.
//
//   td2rdm ground-state  trapped ground state, its 2RDM and observables
//   td2rdm propagate     one quench run against the exact reference
//   td2rdm scan          (U, V) grid, one task per cell, merged afterwards
//   td2rdm purify FILE   purify a serialized spin-block 2RDM
//   td2rdm validate F..  re-check emitted trajectory CSVs or 2RDM files
//
// Parallelism for `scan` comes from TD2RDM_THREADS.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "td2rdm/harness.hpp"
#include "td2rdm/purifier.hpp"
#include "td2rdm/rdm_io.hpp"

namespace fs = std::filesystem;
using namespace td2rdm;

namespace {

struct Common {
  std::string config;
  std::string out = "td2rdm-out";
  double dt = 0.0, horizon = 0.0, u = 0.0, v = 0.0, alpha = 2.0;
  int kmax = 100;
  unsigned long seed = 1;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_dt = nullptr;
  CLI::Option* o_t = nullptr;
  CLI::Option* o_u = nullptr;
  CLI::Option* o_v = nullptr;
  CLI::Option* o_alpha = nullptr;
  CLI::Option* o_kmax = nullptr;
  CLI::Option* o_seed = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config,
                  "key = value file with [model], [propagation], ... sections")
      ->check(CLI::ExistingFile);
  c.o_out = sub->add_option("--out", c.out, "output directory");
  c.o_dt = sub->add_option("--dt", c.dt, "global step between purifications (1/J)");
  c.o_t = sub->add_option("--T", c.horizon, "propagation horizon (1/J)");
  c.o_u = sub->add_option("--U", c.u, "on-site interaction (J)");
  c.o_v = sub->add_option("--V", c.v, "trap strength (J)");
  c.o_alpha =
      sub->add_option("--alpha", c.alpha, "purification steering factor")->capture_default_str();
  c.o_kmax = sub->add_option("--kmax", c.kmax, "purification iteration cap")->capture_default_str();
  c.o_seed = sub->add_option("--seed", c.seed, "seed for generated perturbations");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (*c.o_out) cfg.output_dir = c.out;
  if (*c.o_dt) cfg.propagation.global_dt = c.dt;
  if (*c.o_t) cfg.propagation.horizon = c.horizon;
  if (*c.o_u) cfg.model.interaction = c.u;
  if (*c.o_v) cfg.model.trap = c.v;
  if (*c.o_alpha) cfg.propagation.purification.alpha = c.alpha;
  if (*c.o_kmax) cfg.propagation.purification.k_max = c.kmax;
  if (*c.o_seed) cfg.seed = c.seed;
  cfg.model.validate();
  cfg.propagation.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

template <class F>
void write_file(const fs::path& p, F&& fill) {
  std::ofstream out = open_out(p);
  fill(out);
  if (!out) throw Error("write failed: " + p.string());
}

// Random direction that keeps the 1RDM and the conserved expectation values.
SpinBlock2Rdm allowed_perturbation(const Purifier& purifier, const ConservedOperatorSet& ys,
                                   int particles, double norm, unsigned long seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto hermitian = [&](int n) {
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = Complex(gauss(rng), gauss(rng));
    return Matrix(0.5 * (a + a.adjoint()));
  };
  const int m = purifier.sites();
  SpinBlock2Rdm p = SpinBlock2Rdm::zero(m, particles);
  p.singlet =
      project_conserved(purifier.kernel_project(hermitian(singlet_dim(m)), PairBlock::singlet), ys);
  p.triplet = purifier.kernel_project(hermitian(triplet_dim(m)), PairBlock::triplet);
  const double scale = norm / std::hypot(hs_norm(p.singlet), hs_norm(p.triplet));
  p.singlet *= scale;
  p.triplet *= scale;
  return p;
}

// ---------------------------------------------------------------------------

int cmd_ground_state(const Common& c, double perturb) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const InitialState init = prepare_initial_state(cfg.model);
  const Observables obs = observables(init.d, cfg.model, -1.0);
  save_spin_blocks((dir / "ground_state.txt").string(), init.d);

  nlohmann::json j;
  j["model"] = {{"sites", cfg.model.sites},
                {"particles", cfg.model.particles},
                {"J", cfg.model.hopping},
                {"U", cfg.model.interaction},
                {"V", cfg.model.trap}};
  j["energy"] = init.ground.energy;
  j["gap"] = init.ground.gap;
  j["s_squared"] = init.s_squared;
  j["site_densities"] = obs.site_densities;
  j["interaction_energy"] = obs.interaction_energy;
  j["eta"] = obs.eta;
  j["trace"] = init.d.total_trace();
  j["defect"] = defect(MVector::from_particle(init.d));
  if (perturb > 0.0) {
    const Purifier purifier(cfg.model.sites);
    const SpinBlock2Rdm p = allowed_perturbation(purifier, hubbard_conserved_set(cfg.model),
                                                 cfg.model.particles, perturb, cfg.seed);
    SpinBlock2Rdm d = init.d;
    d.singlet += p.singlet;
    d.triplet += p.triplet;
    save_spin_blocks((dir / "perturbed.txt").string(), d);
    j["perturbed"] = {
        {"norm", perturb}, {"seed", cfg.seed}, {"defect", defect(MVector::from_particle(d))}};
  }
  write_file(dir / "ground_state.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  std::cout << "E0 = " << init.ground.energy << ", wrote " << (dir / "ground_state.txt").string()
            << '\n';
  return 0;
}

int cmd_propagate(const Common& c, bool skip_dt_check) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const SystemRun run = run_system(cfg.model, cfg.propagation);
  write_file(dir / "trajectory.csv", [&](std::ostream& o) {
    write_trajectory_csv(o, run.propagation.records, cfg.model.sites);
  });

  ConvergenceResult conv;
  const bool check = cfg.check_dt && !skip_dt_check;
  if (check) {
    PropagationConfig half = cfg.propagation;
    half.global_dt *= 0.5;
    const SystemRun fine = run_system(cfg.model, half);
    write_file(dir / "trajectory_half_dt.csv", [&](std::ostream& o) {
      write_trajectory_csv(o, fine.propagation.records, cfg.model.sites);
    });
    conv = dt_convergence(run.times, run.n1, fine.times, fine.n1);
  }
  write_file(dir / "summary.json", [&](std::ostream& o) {
    write_run_json(o, cfg.model, cfg.propagation, run, check ? &conv : nullptr);
  });
  std::cout << "delta_n1_bar = " << run.delta_n1_bar << " (" << run.reference << " reference)";
  if (check)
    std::cout << ", dt residual = " << conv.residual
              << (conv.converged ? " (converged)" : " (NOT converged)");
  std::cout << '\n';
  return 0;
}

int cmd_scan(const Common& c, bool skip_dt_check) {
  RunConfig cfg = resolve(c);
  if (skip_dt_check) cfg.check_dt = false;
  const fs::path dir = cfg.output_dir;
  const fs::path cells_dir = dir / "cells";
  fs::create_directories(cells_dir);
  auto cell_stem = [&](std::size_t k) { return cells_dir / ("cell_" + std::to_string(k)); };

  const int threads = parallelism_from_env();
  const CellSink sink = [&](std::size_t k, const ScanCell& cell, const SystemRun& run) {
    write_file(cell_stem(k).string() + ".json", [&](std::ostream& o) { write_cell_json(o, cell); });
    if (cell.error.empty()) {
      write_file(cell_stem(k).string() + ".csv", [&](std::ostream& o) {
        write_trajectory_csv(o, run.propagation.records, cfg.model.sites);
      });
    }
  };
  const std::vector<ScanCell> cells = run_scan(cfg, threads, sink);

  // Merge from the per-cell files.
  std::vector<ScanCell> merged;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    std::ifstream in(cell_stem(k).string() + ".json");
    if (!in) throw Error("missing cell file " + cell_stem(k).string() + ".json");
    merged.push_back(read_cell_json(in));
  }
  write_file(dir / "scan.json", [&](std::ostream& o) { write_scan_json(o, cfg, merged); });
  std::ofstream table = open_out(dir / "scan.csv");
  table << "U,V,delta_n1_bar,dt_converged,dt_residual,max_defect_before,max_defect_after,error\n";
  table.precision(17);
  for (const auto& cell : merged) {
    table << cell.interaction << ',' << cell.trap << ',' << cell.delta_n1_bar << ','
          << cell.dt_converged << ',' << cell.dt_residual << ',' << cell.max_defect_before << ','
          << cell.max_defect_after << ",\"" << cell.error << "\"\n";
    std::cout << "U = " << cell.interaction << ", V = " << cell.trap
              << ": delta_n1_bar = " << cell.delta_n1_bar
              << (cell.error.empty() ? "" : " (error: " + cell.error + ")") << '\n';
  }
  return 0;
}

int cmd_purify(const Common& c, const std::string& input) {
  const RunConfig cfg = resolve(c);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const SpinBlock2Rdm d = load_spin_blocks(input);
  HubbardConfig model = cfg.model;
  model.sites = d.sites;
  model.particles = d.particles;
  const Purifier purifier(d.sites);
  const PurificationConfig& pc = cfg.propagation.purification;
  const PurificationResult r =
      purifier.purify(MVector::from_particle(d), hubbard_conserved_set(model), pc);
  save_spin_blocks((dir / "purified.txt").string(), r.m.d);
  write_file(dir / "purify_report.json", [&](std::ostream& o) {
    write_report_json(o, r.report, resolve_defect_tol(pc, d.particles));
  });
  std::cout << "defect " << r.report.defect_initial << " -> " << r.report.defect_final << " in "
            << r.report.iterations_used << " iterations"
            << (r.report.converged ? "" : " (NOT converged)") << '\n';
  return r.report.converged ? 0 : 3;
}

int cmd_validate(const Common& c, const std::vector<std::string>& files) {
  const RunConfig cfg = resolve(c);
  int bad = 0;
  for (const auto& f : files) {
    std::vector<std::string> problems;
    try {
      if (fs::path(f).extension() == ".csv") {
        std::ifstream in(f);
        if (!in) throw Error("cannot read " + f);
        const TrajectoryCheck check =
            validate_trajectory(read_trajectory_csv(in), cfg.model.particles);
        problems = check.problems;
      } else {
        const SpinBlock2Rdm d = load_spin_blocks(f);
        const double n = d.particles;
        const double trace_err = std::abs(d.total_trace() - n * (n - 1.0));
        if (trace_err > 1e-8) problems.push_back("trace off by " + std::to_string(trace_err));
        const double def = defect(MVector::from_particle(d));
        const double tol = resolve_defect_tol(cfg.propagation.purification, d.particles);
        if (def > tol) {
          std::ostringstream msg;
          msg << "defect " << def << " exceeds " << tol;
          problems.push_back(msg.str());
        }
      }
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
    std::cout << f << ": " << (problems.empty() ? "OK" : "INVALID") << '\n';
    for (const auto& p : problems) std::cout << "  " << p << '\n';
    if (!problems.empty()) ++bad;
  }
  return bad == 0 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projective purification of 2RDMs in TD2RDM Hubbard dynamics"};
  app.require_subcommand(1);

  Common c_gs, c_prop, c_scan, c_pur, c_val;
  double perturb = 0.0;
  bool prop_skip = false, scan_skip = false;
  std::string purify_input;
  std::vector<std::string> validate_files;

  auto* gs = app.add_subcommand("ground-state", "trapped ground state, its 2RDM and observables");
  add_common(gs, c_gs);
  gs->add_option("--perturb", perturb,
                 "also write a copy perturbed by an allowed direction of this HS norm");

  auto* prop = app.add_subcommand("propagate", "quench dynamics against the exact reference");
  add_common(prop, c_prop);
  prop->add_flag("--no-dt-check", prop_skip, "skip the dt/2 convergence run");

  auto* scan = app.add_subcommand("scan", "(U, V) grid scan");
  add_common(scan, c_scan);
  scan->add_flag("--no-dt-check", scan_skip, "skip the dt/2 convergence runs");

  auto* pur = app.add_subcommand("purify", "purify a serialized spin-block 2RDM");
  add_common(pur, c_pur);
  pur->add_option("input", purify_input, "spin-block 2RDM file")
      ->required()
      ->check(CLI::ExistingFile);

  auto* val = app.add_subcommand("validate", "re-check trajectory CSVs or 2RDM files");
  add_common(val, c_val);
  val->add_option("files", validate_files, "files to check")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gs) return cmd_ground_state(c_gs, perturb);
    if (*prop) return cmd_propagate(c_prop, prop_skip);
    if (*scan) return cmd_scan(c_scan, scan_skip);
    if (*pur) return cmd_purify(c_pur, purify_input);
    if (*val) return cmd_validate(c_val, validate_files);
  } catch (const std::exception& e) {
    std::cerr << "td2rdm: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
