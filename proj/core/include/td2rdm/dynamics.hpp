#pragma once

// Time evolution of the spin-adapted 2RDM.
//
// The state is carried as the opposite-spin block A (see hubbard.hpp); its
// equation of motion is
//   i dA/dt = [h (x) 1 + 1 (x) h + W, A] + C[A],
// with W = U on doubly occupied site pairs and C the collision term from the
// reconstructed 3RDM. Singlet and triplet derivatives follow by compression.
//
// Integration within a global step uses an embedded Runge-Kutta-Fehlberg
// 4(5) pair; purification runs after every global step.

#include <functional>
#include <vector>

#include "td2rdm/hubbard.hpp"
#include "td2rdm/purifier.hpp"
#include "td2rdm/reconstruct.hpp"

namespace td2rdm {

struct RkfConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double min_step = 1e-10;
  double safety = 0.9;
  double min_factor = 0.2;
  double max_factor = 5.0;
};

using OdeRhs = std::function<Vector(double t, const Vector& y)>;

struct OdeState {
  double t = 0.0;
  Vector y;
  double step = 0.0;  // suggested next step; <= 0 means "start from the interval length"
  long accepted = 0;
  long rejected = 0;
};

/// Advance `state` to exactly `until_t`. Throws when the step size underflows.
void rkf45_adaptive(OdeState& state, double until_t, const OdeRhs& rhs, const RkfConfig& cfg);

class EquationOfMotion {
 public:
  explicit EquationOfMotion(const HubbardConfig& cfg);

  /// dD/dt in spin-block form.
  SpinBlock2Rdm rhs(const SpinBlock2Rdm& d, double t) const;

  /// dA/dt on the opposite-spin block.
  Matrix rhs_opposite_spin(const SpinBlock2Rdm& d, double t) const;

 private:
  HubbardConfig cfg_;
  CollisionEvaluator collision_;
  PairBasis singlet_;
  PairBasis triplet_;
};

SpinBlock2Rdm eom_rhs(const SpinBlock2Rdm& d, double t, const HubbardConfig& cfg);

struct PropagationConfig {
  double global_dt = 0.01;
  double horizon = 25.0;
  RkfConfig rkf;
  PurificationConfig purification;
  bool purify = true;

  long steps() const;
  void validate() const;
};

struct TrajectoryRecord {
  double t = 0.0;
  std::vector<double> site_densities;
  double total_energy = 0.0;
  double interaction_energy = 0.0;
  double eta = 0.0;
  double defect_before = 0.0;
  double defect_after = 0.0;
  int purification_iterations = 0;
  bool purification_converged = true;
};

struct PropagationHooks {
  /// Called after each global step, before purification.
  std::function<void(double t, const SpinBlock2Rdm& d)> before_purification;
};

struct PropagationResult {
  std::vector<TrajectoryRecord> records;
  SpinBlock2Rdm final_state;
  long rkf_accepted = 0;
  long rkf_rejected = 0;
};

PropagationResult propagate(const SpinBlock2Rdm& initial, const HubbardConfig& model,
                            const PropagationConfig& cfg, const PropagationHooks& hooks = {});

}  // namespace td2rdm
