#include "td2rdm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "td2rdm/generic_purifier.hpp"

namespace td2rdm {

namespace {

// Classical Fehlberg tableau.
constexpr double c2 = 1.0 / 4.0, c3 = 3.0 / 8.0, c4 = 12.0 / 13.0, c6 = 1.0 / 2.0;
constexpr double a21 = 1.0 / 4.0;
constexpr double a31 = 3.0 / 32.0, a32 = 9.0 / 32.0;
constexpr double a41 = 1932.0 / 2197.0, a42 = -7200.0 / 2197.0, a43 = 7296.0 / 2197.0;
constexpr double a51 = 439.0 / 216.0, a52 = -8.0, a53 = 3680.0 / 513.0, a54 = -845.0 / 4104.0;
constexpr double a61 = -8.0 / 27.0, a62 = 2.0, a63 = -3544.0 / 2565.0, a64 = 1859.0 / 4104.0,
                 a65 = -11.0 / 40.0;
constexpr double b1 = 16.0 / 135.0, b3 = 6656.0 / 12825.0, b4 = 28561.0 / 56430.0,
                 b5 = -9.0 / 50.0, b6 = 2.0 / 55.0;
constexpr double d1 = 25.0 / 216.0, d3 = 1408.0 / 2565.0, d4 = 2197.0 / 4104.0, d5 = -1.0 / 5.0;

}  // namespace

void rkf45_adaptive(OdeState& s, double until_t, const OdeRhs& rhs, const RkfConfig& cfg) {
  if (!(until_t > s.t)) throw Error("rkf45_adaptive: target time must lie ahead");
  double h = s.step > 0.0 ? s.step : until_t - s.t;
  while (s.t < until_t) {
    const double remaining = until_t - s.t;
    const bool clipped = h >= remaining;
    const double step = clipped ? remaining : h;
    if (step < cfg.min_step && remaining > cfg.min_step) {
      std::ostringstream msg;
      msg << "rkf45_adaptive: step size underflow (h = " << step << " at t = " << s.t << ")";
      throw Error(msg.str());
    }
    const Vector k1 = rhs(s.t, s.y);
    const Vector k2 = rhs(s.t + c2 * step, s.y + step * (a21 * k1));
    const Vector k3 = rhs(s.t + c3 * step, s.y + step * (a31 * k1 + a32 * k2));
    const Vector k4 = rhs(s.t + c4 * step, s.y + step * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = rhs(s.t + step, s.y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        rhs(s.t + c6 * step, s.y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector y5 = s.y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector y4 = s.y + step * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5);
    if (!y5.allFinite()) throw Error("rkf45_adaptive: non-finite state");

    const double err = (y5 - y4).norm();
    const double tol = std::max(cfg.abs_tol, cfg.rel_tol * s.y.norm());
    double factor = err == 0.0 ? cfg.max_factor : cfg.safety * std::pow(tol / err, 0.2);
    factor = std::clamp(factor, cfg.min_factor, cfg.max_factor);

    if (err <= tol) {
      s.y = y5;
      s.t = clipped ? until_t : s.t + step;
      ++s.accepted;
      // A clipped step says nothing about the natural step length.
      h = clipped ? std::max(h, step * factor) : step * factor;
    } else {
      ++s.rejected;
      h = step * factor;
    }
  }
  s.step = h;
}

// ---------------------------------------------------------------------------

EquationOfMotion::EquationOfMotion(const HubbardConfig& cfg)
    : cfg_(cfg),
      collision_(cfg.sites),
      singlet_(cfg.sites, PairBlock::singlet),
      triplet_(cfg.sites, PairBlock::triplet) {
  cfg_.validate();
}

Matrix EquationOfMotion::rhs_opposite_spin(const SpinBlock2Rdm& d, double t) const {
  const int m = cfg_.sites;
  const Matrix h = h1_matrix(cfg_, t);
  const Matrix a = opposite_spin_block(d);
  // K = h (x) 1 + 1 (x) h + W on ordered site pairs
  Matrix k = Matrix::Zero(m * m, m * m);
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2) {
      const int row = i1 * m + i2;
      for (int j = 0; j < m; ++j) {
        k(row, j * m + i2) += h(i1, j);
        k(row, i1 * m + j) += h(i2, j);
      }
      if (i1 == i2) k(row, row) += cfg_.interaction;
    }
  Matrix lhs = k * a - a * k;
  if (cfg_.interaction != 0.0 && d.particles > 2) lhs += collision_(d, cfg_.interaction);
  return Complex(0.0, -1.0) * lhs;
}

SpinBlock2Rdm EquationOfMotion::rhs(const SpinBlock2Rdm& d, double t) const {
  const Matrix da = rhs_opposite_spin(d, t);
  SpinBlock2Rdm out;
  out.sites = d.sites;
  out.particles = d.particles;
  out.singlet = 2.0 * singlet_.compress(da);
  out.triplet = 2.0 * triplet_.compress(da);
  return out;
}

SpinBlock2Rdm eom_rhs(const SpinBlock2Rdm& d, double t, const HubbardConfig& cfg) {
  return EquationOfMotion(cfg).rhs(d, t);
}

// ---------------------------------------------------------------------------

long PropagationConfig::steps() const { return std::lround(horizon / global_dt); }

void PropagationConfig::validate() const {
  if (!(global_dt > 0.0)) throw Error("PropagationConfig: global_dt must be positive");
  if (!(horizon >= global_dt)) throw Error("PropagationConfig: horizon shorter than one step");
  if (std::abs(static_cast<double>(steps()) * global_dt - horizon) > 1e-9 * horizon) {
    throw Error("PropagationConfig: horizon is not a multiple of global_dt");
  }
  if (!(rkf.rel_tol > 0.0) || !(rkf.abs_tol > 0.0)) {
    throw Error("PropagationConfig: RKF tolerances must be positive");
  }
  purification.validate();
}

namespace {

TrajectoryRecord make_record(double t, const SpinBlock2Rdm& d, const HubbardConfig& model) {
  const Observables obs = observables(d, model, t);
  TrajectoryRecord rec;
  rec.t = t;
  rec.site_densities = obs.site_densities;
  rec.total_energy = obs.total_energy;
  rec.interaction_energy = obs.interaction_energy;
  rec.eta = obs.eta;
  return rec;
}

}  // namespace

PropagationResult propagate(const SpinBlock2Rdm& initial, const HubbardConfig& model,
                            const PropagationConfig& cfg, const PropagationHooks& hooks) {
  cfg.validate();
  model.validate();
  initial.validate();
  if (initial.sites != model.sites || initial.particles != model.particles) {
    throw Error("propagate: initial state does not match the model");
  }
  const EquationOfMotion eom(model);
  const BlockLayout layout(model.sites);
  const Purifier purifier(model.sites);
  const ConservedOperatorSet ys = hubbard_conserved_set(model);
  const double tol = resolve_defect_tol(cfg.purification, model.particles);

  PropagationResult result;
  SpinBlock2Rdm d = initial;
  {
    TrajectoryRecord rec = make_record(0.0, d, model);
    rec.defect_before = rec.defect_after = defect(MVector::from_particle(d));
    result.records.push_back(rec);
  }

  const OdeRhs rhs = [&](double t, const Vector& y) {
    return layout.stack(eom.rhs(layout.unstack(y, model.particles), t));
  };
  OdeState state{0.0, layout.stack(d), 0.0, 0, 0};
  const long n = cfg.steps();
  for (long step = 1; step <= n; ++step) {
    const double t_next = static_cast<double>(step) * cfg.global_dt;
    rkf45_adaptive(state, t_next, rhs, cfg.rkf);
    state.t = t_next;
    d = layout.unstack(state.y, model.particles);
    d.symmetrize();
    if (hooks.before_purification) hooks.before_purification(t_next, d);

    MVector m = MVector::from_particle(d);
    const double before = defect(m);
    double after = before;
    int iterations = 0;
    bool converged = before <= tol;
    if (cfg.purify && before > tol) {
      const PurificationResult pr = purifier.purify(m, ys, cfg.purification);
      d = pr.m.d;
      after = pr.report.defect_final;
      iterations = pr.report.iterations_used;
      converged = pr.report.converged;
    }
    state.y = layout.stack(d);

    TrajectoryRecord rec = make_record(t_next, d, model);
    rec.defect_before = before;
    rec.defect_after = after;
    rec.purification_iterations = iterations;
    rec.purification_converged = converged;
    result.records.push_back(rec);
  }
  result.final_state = d;
  result.rkf_accepted = state.accepted;
  result.rkf_rejected = state.rejected;
  return result;
}

}  // namespace td2rdm
