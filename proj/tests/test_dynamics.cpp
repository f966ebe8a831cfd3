#include <gtest/gtest.h>

#include <cmath>

#include "support/generators.hpp"
#include "td2rdm/dynamics.hpp"
#include "td2rdm/generic_purifier.hpp"
#include "td2rdm/oracle.hpp"

using namespace td2rdm;
using namespace td2rdm::testing;

namespace {

HubbardConfig chain(int m, double u, double v) {
  HubbardConfig cfg;
  cfg.sites = m;
  cfg.particles = m;
  cfg.interaction = u;
  cfg.trap = v;
  return cfg;
}

Vector scalar(double x) { return Vector::Constant(1, x); }

// exp(-i h t) for a Hermitian h.
Matrix propagator(const Matrix& h, double t) {
  const Eigensystem es = eigh(h);
  Vector phases(es.values.size());
  for (Eigen::Index k = 0; k < phases.size(); ++k) phases(k) = std::exp(Complex(0.0, -es.values(k) * t));
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

}  // namespace

TEST(Rkf45, DecayToOneOverE) {
  OdeState s{0.0, scalar(1.0), 0.0, 0, 0};
  rkf45_adaptive(s, 1.0, [](double, const Vector& y) { return Vector(-y); }, {});
  EXPECT_EQ(s.t, 1.0);
  EXPECT_NEAR(s.y(0).real(), std::exp(-1.0), 1e-8);
  EXPECT_GT(s.accepted, 0);
}

TEST(Rkf45, LandsOnEveryTarget) {
  OdeState s{0.0, scalar(1.0), 0.0, 0, 0};
  const OdeRhs rhs = [](double t, const Vector&) { return scalar(std::cos(t)); };
  for (int k = 1; k <= 37; ++k) {
    rkf45_adaptive(s, 0.1 * k, rhs, {});
    EXPECT_EQ(s.t, 0.1 * k);
  }
  EXPECT_NEAR(s.y(0).real(), 1.0 + std::sin(3.7), 1e-8);
}

TEST(Rkf45, FifthOrderAtFixedStep) {
  RkfConfig fixed;
  fixed.rel_tol = 1.0;
  fixed.abs_tol = 1.0;
  fixed.min_factor = fixed.max_factor = 1.0;
  const OdeRhs rhs = [](double t, const Vector& y) { return Vector(Complex(0.0, -1.0) * (1.0 + t) * y); };
  auto error_at = [&](double h) {
    OdeState s{0.0, scalar(1.0), h, 0, 0};
    rkf45_adaptive(s, 2.0, rhs, fixed);
    return std::abs(s.y(0) - std::exp(Complex(0.0, -4.0)));
  };
  const double e1 = error_at(0.1), e2 = error_at(0.05);
  EXPECT_GT(e1 / e2, std::pow(2.0, 4.0));
}

TEST(Rkf45, TighterToleranceShrinksError) {
  const OdeRhs rhs = [](double, const Vector& y) { return Vector(Complex(0.0, -3.0) * y); };
  auto error_at = [&](double tol) {
    RkfConfig cfg;
    cfg.rel_tol = tol;
    cfg.abs_tol = tol;
    OdeState s{0.0, scalar(1.0), 0.0, 0, 0};
    rkf45_adaptive(s, 5.0, rhs, cfg);
    return std::abs(s.y(0) - std::exp(Complex(0.0, -15.0)));
  };
  double previous = error_at(1e-5);
  for (double tol : {1e-7, 1e-9, 1e-11}) {
    const double e = error_at(tol);
    EXPECT_LT(e, previous);
    previous = e;
  }
  EXPECT_LT(previous, 1e-9);
}

TEST(Rkf45, RejectsBackwardTargetAndBlowUp) {
  OdeState s{1.0, scalar(1.0), 0.0, 0, 0};
  const OdeRhs square = [](double, const Vector& y) { return Vector(y.cwiseProduct(y)); };
  EXPECT_THROW(rkf45_adaptive(s, 0.5, square, {}), Error);
  OdeState b{0.0, scalar(1.0), 0.0, 0, 0};
  EXPECT_THROW(rkf45_adaptive(b, 2.0, square, {}), Error);  // singular at t = 1
}

TEST(EquationOfMotion, ExactThreeRdmReproducesExactDerivative) {
  const HubbardConfig cfg = chain(4, 2.2, 1.0);
  const HubbardOracle oracle(cfg);
  const Vector psi0 = oracle.ground_state().state;
  const ExactPropagator prop(oracle, psi0);
  const EquationOfMotion eom(cfg);
  const CollisionEvaluator ce(cfg.sites);
  const double t = 0.8, h = 1e-3;
  const Vector psi = prop.state_at(t);
  const SpinBlock2Rdm d = oracle.spin_blocks(psi);
  // Swap the reconstructed collision term for the exact one.
  const Matrix exact_collision = collision_from_three_rdm(ThreeRdm{8, oracle.rdm(psi, 3)}, 4, cfg.interaction);
  const Matrix rhs = eom.rhs_opposite_spin(d, t) + Complex(0.0, 1.0) * ce(d, cfg.interaction) -
                     Complex(0.0, 1.0) * exact_collision;
  // Fourth-order central difference of the exact opposite-spin block.
  auto a_at = [&](double s) { return opposite_spin_block(oracle.spin_blocks(prop.state_at(s))); };
  const Matrix numeric = (-a_at(t + 2 * h) + 8.0 * a_at(t + h) - 8.0 * a_at(t - h) + a_at(t - 2 * h)) / (12.0 * h);
  EXPECT_LT((rhs - numeric).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EquationOfMotion, TrappedGroundStateIsStationaryWithExactThreeRdm) {
  const HubbardConfig cfg = chain(6, 2.2, 1.0);
  const HubbardOracle oracle(cfg);
  const Vector psi = oracle.ground_state().state;
  const SpinBlock2Rdm d = oracle.spin_blocks(psi);
  const EquationOfMotion eom(cfg);
  const CollisionEvaluator ce(6);
  const Matrix exact_collision = collision_from_three_rdm(ThreeRdm{12, oracle.rdm(psi, 3)}, 6, cfg.interaction);
  // t < 0 keeps the trap on.
  const Matrix rhs = eom.rhs_opposite_spin(d, -1.0) + Complex(0.0, 1.0) * ce(d, cfg.interaction) -
                     Complex(0.0, 1.0) * exact_collision;
  const SpinBlock2Rdm rate = spin_blocks_from_opposite_spin(rhs, 6, 6);
  EXPECT_LT(rhs.cwiseAbs().maxCoeff(), 1e-10);
  const Observables obs = observables(rate, cfg, -1.0);
  for (double n : obs.site_densities) EXPECT_LT(std::abs(n), 1e-10);
  EXPECT_LT(std::abs(obs.interaction_energy), 1e-10);
}

TEST(EquationOfMotion, DerivativeIsHermitianAndLinearInZero) {
  Rng rng(31);
  const HubbardConfig cfg = chain(4, 1.3, 0.0);
  const HubbardOracle oracle(cfg);
  const SpinBlock2Rdm d = spin_blocks_from_spinorbital(oracle.rdm(random_sector_state(rng, oracle), 2), 4, 4, 1e9);
  const SpinBlock2Rdm rate = eom_rhs(d, 0.3, cfg);
  EXPECT_LT(hermiticity_error(rate.singlet), 1e-11);
  EXPECT_LT(hermiticity_error(rate.triplet), 1e-11);
  const SpinBlock2Rdm zero_rate = eom_rhs(SpinBlock2Rdm::zero(4, 4), 0.3, cfg);
  EXPECT_EQ(zero_rate.singlet.norm() + zero_rate.triplet.norm(), 0.0);
}

TEST(EquationOfMotion, ConservedRatesVanish) {
  // d/dt of energy, eta and trace along the reconstructed flow.
  const HubbardConfig cfg = chain(6, 2.2, 0.0);
  const HubbardConfig trapped = chain(6, 2.2, 1.0);
  const HubbardOracle t_oracle(trapped);
  const SpinBlock2Rdm d = t_oracle.spin_blocks(t_oracle.ground_state().state);
  const SpinBlock2Rdm rate = eom_rhs(d, 0.0, cfg);
  const Matrix h = h1_matrix(cfg, 0.0);
  const Matrix g_rate = contract_2rdm(SpinBlock2Rdm{6, 6, rate.singlet, rate.triplet}).matrix;
  const double e_rate = 2.0 * (h * g_rate).trace().real() + interaction_energy(rate.singlet, cfg);
  EXPECT_LT(std::abs(e_rate), 1e-11);
  EXPECT_LT(std::abs(eta_expectation(rate.singlet, 6)), 1e-11);
  EXPECT_LT(std::abs(rate.total_trace()), 1e-11);
}

TEST(Propagation, FreeFermionsFollowOneBodyPropagator) {
  const HubbardConfig cfg = chain(6, 0.0, 1.0);
  const HubbardOracle oracle(cfg);
  const SpinBlock2Rdm d0 = oracle.spin_blocks(oracle.ground_state().state);
  PropagationConfig p;
  p.horizon = 5.0;
  p.global_dt = 0.01;
  const PropagationResult r = propagate(d0, cfg, p);
  ASSERT_EQ(r.records.size(), 501u);
  const Matrix u = propagator(h1_matrix(cfg, 0.0), 5.0);
  Matrix uu(36, 36);
  for (int i1 = 0; i1 < 6; ++i1)
    for (int i2 = 0; i2 < 6; ++i2)
      for (int j1 = 0; j1 < 6; ++j1)
        for (int j2 = 0; j2 < 6; ++j2) uu(i1 * 6 + i2, j1 * 6 + j2) = u(i1, j1) * u(i2, j2);
  const Matrix expected = uu * opposite_spin_block(d0) * uu.adjoint();
  EXPECT_LT((opposite_spin_block(r.final_state) - expected).cwiseAbs().maxCoeff(), 1e-7);
  // Fehlberg steps do not keep the exact zero eigenvalues of a Slater D; at
  // the default tolerances the drift stays below 1e-10 but can cross defect_tol.
  for (const auto& rec : r.records) EXPECT_LE(rec.defect_before, 1e-10) << "t = " << rec.t;

  p.rkf.rel_tol = 1e-12;
  p.rkf.abs_tol = 1e-14;
  const PropagationResult tight = propagate(d0, cfg, p);
  for (const auto& rec : tight.records) {
    EXPECT_EQ(rec.purification_iterations, 0) << "t = " << rec.t;
    EXPECT_LE(rec.defect_before, resolve_defect_tol({}, cfg.particles));
  }
}

TEST(Propagation, RecordsAndConservationOnShortRun) {
  const HubbardConfig cfg = chain(6, 2.2, 1.0);
  const HubbardOracle oracle(cfg);
  const SpinBlock2Rdm d0 = oracle.spin_blocks(oracle.ground_state().state);
  PropagationConfig p;
  p.horizon = 0.5;
  int calls = 0;
  PropagationHooks hooks;
  hooks.before_purification = [&](double, const SpinBlock2Rdm&) { ++calls; };
  const PropagationResult r = propagate(d0, cfg, p, hooks);
  ASSERT_EQ(r.records.size(), 51u);
  EXPECT_EQ(calls, 50);
  EXPECT_EQ(r.records.front().t, 0.0);
  EXPECT_NEAR(r.records.back().t, 0.5, 1e-15);
  const double e0 = r.records.front().total_energy, eta0 = r.records.front().eta;
  // t = 0 record: the trap is already off, so E differs from the trapped ground energy.
  EXPECT_NEAR(e0, oracle.energy(oracle.ground_state().state, false), 1e-11);
  bool purified = false;
  for (const auto& rec : r.records) {
    EXPECT_NEAR(rec.total_energy, e0, 1e-8 * std::abs(e0));
    EXPECT_NEAR(rec.eta, eta0, 1e-8 * std::max(1.0, eta0));
    double n = 0.0;
    for (double x : rec.site_densities) n += x;
    EXPECT_NEAR(n, 6.0, 1e-10);
    if (rec.purification_iterations > 0) {
      purified = true;
      EXPECT_LE(rec.defect_after, rec.defect_before);
      EXPECT_TRUE(rec.purification_converged);
    }
  }
  EXPECT_TRUE(purified);
  EXPECT_LT(hermiticity_error(r.final_state.singlet), 1e-10);
}

TEST(Propagation, ConfigValidation) {
  PropagationConfig p;
  p.global_dt = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.horizon = 0.001;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.horizon = 0.015;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  EXPECT_EQ(p.steps(), 2500);
  const HubbardConfig cfg = chain(4, 1.0, 0.0);
  EXPECT_THROW(propagate(SpinBlock2Rdm::zero(6, 6), cfg, {}), Error);
}
