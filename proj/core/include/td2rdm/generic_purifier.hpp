#pragma once

// Multi-constraint purification engine.
//
// A 2RDM is handled as the stacked vector x = (vec S, vec T) of its compact
// blocks. Every N-representability condition is an affine map
// M_i = K_i + L_i x that must come out positive semidefinite. One iteration
//
//   x <- x - alpha * Pi_X C^{-1} (x_def + sum_i L_i^dagger vec(M_i,def)),
//   C = 1 + sum_i L_i^dagger L_i,
//
// where Pi_X removes directions that change the 1RDM or the conserved
// expectation values. With the single Q-condition the coupling C^{-1}(...)
// reduces to (D_def + Q_def) / 2.

#include <string>
#include <vector>

#include "td2rdm/purifier.hpp"

namespace td2rdm {

struct AffineConstraint {
  Matrix offset;  // K, k x k
  Matrix map;     // L, k^2 x (dim_S^2 + dim_T^2)
  std::string name;
};

/// Layout of the stacked block vector.
struct BlockLayout {
  int sites = 0;
  Eigen::Index singlet_dim = 0;
  Eigen::Index triplet_dim = 0;

  explicit BlockLayout(int sites_);
  Eigen::Index size() const { return singlet_dim * singlet_dim + triplet_dim * triplet_dim; }
  Vector stack(const SpinBlock2Rdm& d) const;
  SpinBlock2Rdm unstack(const Vector& x, int particles) const;
};

/// Q-condition as two affine constraints (singlet and triplet hole blocks).
std::vector<AffineConstraint> q_condition_constraints(const SpinBlock2Rdm& d);

/// P = [1; L] C^{-1} [1, L^dagger] on the stacked space (x, vec M_1, ...).
Matrix assemble_projector(const std::vector<AffineConstraint>& constraints, Eigen::Index dim);

struct GenericPurifyOptions {
  bool preserve_contraction = true;
};

struct GenericPurificationResult {
  SpinBlock2Rdm d;
  PurificationReport report;
};

GenericPurificationResult generic_purify(const SpinBlock2Rdm& d0,
                                         const std::vector<AffineConstraint>& constraints,
                                         const ConservedOperatorSet& ys,
                                         const PurificationConfig& cfg,
                                         const GenericPurifyOptions& opts = {});

}  // namespace td2rdm
