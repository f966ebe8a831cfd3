#include "td2rdm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <type_traits>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

namespace td2rdm {

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error("config: cannot parse '" + item + "' in " + key);
    }
  }
  if (out.empty()) throw Error("config: empty list for " + key);
  return out;
}

}  // namespace

RunConfig parse_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  try {
    // get<T> throws on unconvertible text; get(path, default) would not.
    auto read = [&tree](const char* key, auto& target) {
      if (tree.get_child_optional(key)) target = tree.get<std::decay_t<decltype(target)>>(key);
    };
    read("model.sites", cfg.model.sites);
    cfg.model.particles = cfg.model.sites;
    read("model.particles", cfg.model.particles);
    read("model.hopping", cfg.model.hopping);
    read("model.U", cfg.model.interaction);
    read("model.V", cfg.model.trap);

    auto& p = cfg.propagation;
    read("propagation.dt", p.global_dt);
    read("propagation.T", p.horizon);
    read("propagation.rkf_rel_tol", p.rkf.rel_tol);
    read("propagation.rkf_abs_tol", p.rkf.abs_tol);
    read("propagation.purify", p.purify);
    read("purification.alpha", p.purification.alpha);
    read("purification.kmax", p.purification.k_max);
    read("purification.defect_tol", p.purification.defect_tol);

    if (auto u = tree.get_optional<std::string>("scan.U")) cfg.scan_interaction = parse_list(*u, "scan.U");
    if (auto v = tree.get_optional<std::string>("scan.V")) cfg.scan_trap = parse_list(*v, "scan.V");
    read("run.out", cfg.output_dir);
    read("run.seed", cfg.seed);
    read("run.check_dt", cfg.check_dt);
  } catch (const pt::ptree_bad_data& e) {
    throw Error(std::string("config: ") + e.what());
  }
  cfg.model.validate();
  cfg.propagation.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  return parse_run_config(in);
}

// ---------------------------------------------------------------------------

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw Error("trapezoid: grid and samples differ in length");
  double sum = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) sum += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
  return sum;
}

double metric_delta_n1(const std::vector<double>& t, const std::vector<double>& n1,
                       const std::vector<double>& n1_exact) {
  if (n1.size() != t.size() || n1_exact.size() != t.size()) {
    throw Error("metric_delta_n1: trajectories are not on a common grid");
  }
  if (t.size() < 2) throw Error("metric_delta_n1: need at least two samples");
  std::vector<double> diff(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) diff[k] = std::abs(n1[k] - n1_exact[k]);
  const double norm = trapezoid(t, n1_exact);
  if (norm == 0.0) throw Error("metric_delta_n1: exact density integrates to zero");
  return trapezoid(t, diff) / norm;
}

ConvergenceResult dt_convergence(const std::vector<double>& t_a, const std::vector<double>& n1_a,
                                 const std::vector<double>& t_b, const std::vector<double>& n1_b,
                                 double threshold) {
  if (t_a.size() != n1_a.size() || t_b.size() != n1_b.size()) {
    throw Error("dt_convergence: grid and samples differ in length");
  }
  const bool a_coarse = t_a.size() <= t_b.size();
  const auto& tc = a_coarse ? t_a : t_b;
  const auto& nc = a_coarse ? n1_a : n1_b;
  const auto& tf = a_coarse ? t_b : t_a;
  const auto& nf = a_coarse ? n1_b : n1_a;
  ConvergenceResult res;
  if (tc.size() < 2) {
    res.cause = "trajectory too short";
    return res;
  }
  std::vector<double> diff(tc.size());
  std::size_t j = 0;
  for (std::size_t k = 0; k < tc.size(); ++k) {
    const double eps = 1e-9 * std::max(1.0, std::abs(tc[k]));
    while (j < tf.size() && tf[j] < tc[k] - eps) ++j;
    if (j == tf.size() || std::abs(tf[j] - tc[k]) > eps) {
      throw Error("dt_convergence: fine grid does not contain the coarse grid");
    }
    diff[k] = std::abs(nc[k] - nf[j]);
  }
  const double horizon = tc.back() - tc.front();
  res.residual = trapezoid(tc, diff) / horizon;
  res.converged = res.residual < threshold;
  if (!res.converged) res.cause = "residual above threshold";
  return res;
}

// ---------------------------------------------------------------------------

InitialState prepare_initial_state(const HubbardConfig& model) {
  const HubbardOracle oracle(model);
  InitialState init;
  init.ground = oracle.ground_state();
  init.d = oracle.spin_blocks(init.ground.state);
  init.s_squared = oracle.s_squared(init.ground.state);
  return init;
}

std::vector<std::vector<double>> exact_site_densities(const HubbardOracle& oracle,
                                                      const Vector& psi0,
                                                      const std::vector<double>& times) {
  const ExactPropagator prop(oracle, psi0);
  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(oracle.site_densities(prop.state_at(t)));
  return out;
}

std::vector<std::vector<double>> free_fermion_site_densities(const HubbardConfig& model,
                                                             const Matrix& gamma0,
                                                             const std::vector<double>& times) {
  const Eigensystem es = eigh(h1_matrix(model, 0.0));
  std::vector<std::vector<double>> out;
  out.reserve(times.size());
  for (double t : times) {
    Vector phases(es.values.size());
    for (Eigen::Index k = 0; k < phases.size(); ++k) {
      phases(k) = std::exp(Complex(0.0, -es.values(k) * t));
    }
    const Matrix u = es.vectors * phases.asDiagonal() * es.vectors.adjoint();
    const Matrix g = u * gamma0 * u.adjoint();
    std::vector<double> n(static_cast<std::size_t>(model.sites));
    for (int i = 0; i < model.sites; ++i) n[static_cast<std::size_t>(i)] = 2.0 * g(i, i).real();
    out.push_back(std::move(n));
  }
  return out;
}

Drift conservation_drift(const std::vector<TrajectoryRecord>& records, int particles) {
  Drift drift;
  if (records.empty()) return drift;
  const double e0 = records.front().total_energy;
  const double eta0 = records.front().eta;
  for (const auto& r : records) {
    double n = 0.0;
    for (double x : r.site_densities) n += x;
    drift.energy = std::max(drift.energy, std::abs(r.total_energy - e0) / std::max(1.0, std::abs(e0)));
    drift.eta = std::max(drift.eta, std::abs(r.eta - eta0) / std::max(1.0, std::abs(eta0)));
    drift.particles =
        std::max(drift.particles, std::abs(n - particles) / std::max(1.0, static_cast<double>(particles)));
  }
  return drift;
}

SystemRun run_system(const HubbardConfig& model, const PropagationConfig& prop,
                     const PropagationHooks& hooks) {
  SystemRun run;
  const HubbardOracle oracle(model);
  run.initial.ground = oracle.ground_state();
  run.initial.d = oracle.spin_blocks(run.initial.ground.state);
  run.initial.s_squared = oracle.s_squared(run.initial.ground.state);

  run.propagation = propagate(run.initial.d, model, prop, hooks);
  for (const auto& r : run.propagation.records) {
    run.times.push_back(r.t);
    run.n1.push_back(r.site_densities.front());
    run.max_defect_before = std::max(run.max_defect_before, r.defect_before);
    run.max_defect_after = std::max(run.max_defect_after, r.defect_after);
    if (!r.purification_converged) ++run.unconverged_steps;
  }
  std::vector<std::vector<double>> reference;
  if (model.interaction == 0.0) {
    run.reference = "free-fermion";
    reference = free_fermion_site_densities(model, oracle.one_rdm(run.initial.ground.state), run.times);
  } else {
    run.reference = "exact";
    reference = exact_site_densities(oracle, run.initial.ground.state, run.times);
  }
  for (const auto& n : reference) run.n1_reference.push_back(n.front());
  run.delta_n1_bar = metric_delta_n1(run.times, run.n1, run.n1_reference);
  run.drift = conservation_drift(run.propagation.records, model.particles);
  return run;
}

ScanCell run_cell(const HubbardConfig& model, const PropagationConfig& prop, bool check_dt,
                  SystemRun* primary) {
  ScanCell cell;
  cell.interaction = model.interaction;
  cell.trap = model.trap;
  try {
    SystemRun run = run_system(model, prop);
    cell.delta_n1_bar = run.delta_n1_bar;
    cell.max_defect_before = run.max_defect_before;
    cell.max_defect_after = run.max_defect_after;
    cell.unconverged_steps = run.unconverged_steps;
    cell.drift = run.drift;
    if (check_dt) {
      PropagationConfig half = prop;
      half.global_dt = 0.5 * prop.global_dt;
      const SystemRun fine = run_system(model, half);
      const ConvergenceResult conv = dt_convergence(run.times, run.n1, fine.times, fine.n1);
      cell.dt_converged = conv.converged;
      cell.dt_residual = conv.residual;
    }
    if (primary) *primary = std::move(run);
  } catch (const std::exception& e) {
    cell.error = e.what();
    cell.dt_converged = false;
  }
  return cell;
}

int parallelism_from_env() {
  const char* value = std::getenv(kThreadsEnvVar);
  if (value && *value) {
    try {
      return std::max(1, std::stoi(value));
    } catch (const std::exception&) {
      throw Error(std::string(kThreadsEnvVar) + " must be a positive integer");
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ScanCell> run_scan(const RunConfig& cfg, int threads, const CellSink& sink) {
  std::vector<HubbardConfig> models;
  for (double u : cfg.scan_interaction)
    for (double v : cfg.scan_trap) {
      HubbardConfig m = cfg.model;
      m.interaction = u;
      m.trap = v;
      models.push_back(m);
    }
  std::vector<ScanCell> cells(models.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < models.size(); k = next++) {
      SystemRun run;
      cells[k] = run_cell(models[k], cfg.propagation, cfg.check_dt, sink ? &run : nullptr);
      if (sink) sink(k, cells[k], run);
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(1, models.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return cells;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json to_json(const Drift& d) {
  return {{"energy", d.energy}, {"eta", d.eta}, {"particles", d.particles}};
}

nlohmann::json to_json(const HubbardConfig& m) {
  return {{"sites", m.sites}, {"particles", m.particles}, {"J", m.hopping},
          {"U", m.interaction}, {"V", m.trap}};
}

nlohmann::json to_json(const PropagationConfig& p) {
  return {{"dt", p.global_dt},
          {"T", p.horizon},
          {"rkf_rel_tol", p.rkf.rel_tol},
          {"rkf_abs_tol", p.rkf.abs_tol},
          {"alpha", p.purification.alpha},
          {"kmax", p.purification.k_max},
          {"purify", p.purify}};
}

nlohmann::json to_json(const ScanCell& c) {
  nlohmann::json j{{"U", c.interaction},
                   {"V", c.trap},
                   {"delta_n1_bar", c.delta_n1_bar},
                   {"dt_converged", c.dt_converged},
                   {"dt_residual", c.dt_residual},
                   {"max_defect_before", c.max_defect_before},
                   {"max_defect_after", c.max_defect_after},
                   {"unconverged_purifications", c.unconverged_steps},
                   {"drift", to_json(c.drift)}};
  if (!c.error.empty()) j["error"] = c.error;
  return j;
}

}  // namespace

void write_cell_json(std::ostream& out, const ScanCell& cell) { out << to_json(cell).dump(2) << '\n'; }

ScanCell read_cell_json(std::istream& in) {
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    ScanCell c;
    c.interaction = j.at("U").get<double>();
    c.trap = j.at("V").get<double>();
    c.delta_n1_bar = j.at("delta_n1_bar").get<double>();
    c.dt_converged = j.at("dt_converged").get<bool>();
    c.dt_residual = j.at("dt_residual").get<double>();
    c.max_defect_before = j.at("max_defect_before").get<double>();
    c.max_defect_after = j.at("max_defect_after").get<double>();
    c.unconverged_steps = j.at("unconverged_purifications").get<int>();
    const auto& d = j.at("drift");
    c.drift = {d.at("energy").get<double>(), d.at("eta").get<double>(), d.at("particles").get<double>()};
    if (j.contains("error")) c.error = j.at("error").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("read_cell_json: ") + e.what());
  }
}

void write_scan_json(std::ostream& out, const RunConfig& cfg, const std::vector<ScanCell>& cells) {
  nlohmann::json j;
  j["model"] = to_json(cfg.model);
  j["propagation"] = to_json(cfg.propagation);
  j["cells"] = nlohmann::json::array();
  bool all_converged = true;
  for (const auto& c : cells) {
    all_converged = all_converged && c.dt_converged && c.error.empty();
    j["cells"].push_back(to_json(c));
  }
  j["all_dt_converged"] = all_converged;
  out << j.dump(2) << '\n';
}

void write_run_json(std::ostream& out, const HubbardConfig& model, const PropagationConfig& prop,
                    const SystemRun& run, const ConvergenceResult* convergence) {
  nlohmann::json j;
  j["model"] = to_json(model);
  j["propagation"] = to_json(prop);
  j["ground_state"] = {{"energy", run.initial.ground.energy},
                       {"gap", run.initial.ground.gap},
                       {"s_squared", run.initial.s_squared}};
  j["reference"] = run.reference;
  j["delta_n1_bar"] = run.delta_n1_bar;
  j["drift"] = to_json(run.drift);
  j["max_defect_before"] = run.max_defect_before;
  j["max_defect_after"] = run.max_defect_after;
  j["unconverged_purifications"] = run.unconverged_steps;
  j["rkf_steps"] = {{"accepted", run.propagation.rkf_accepted},
                    {"rejected", run.propagation.rkf_rejected}};
  if (convergence) {
    j["dt_convergence"] = {{"converged", convergence->converged},
                           {"residual", convergence->residual},
                           {"threshold", kDtConvergenceThreshold}};
  }
  out << j.dump(2) << '\n';
}

void write_report_json(std::ostream& out, const PurificationReport& report, double defect_tol) {
  nlohmann::json j{{"iterations_used", report.iterations_used},
                   {"defect_initial", report.defect_initial},
                   {"defect_final", report.defect_final},
                   {"defect_tol", defect_tol},
                   {"converged", report.converged},
                   {"per_iteration_defects", report.per_iteration_defects}};
  out << j.dump(2) << '\n';
}

}  // namespace td2rdm
