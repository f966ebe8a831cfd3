#pragma once

// Projective purification of a spin-adapted 2RDM.
//
// One iteration extracts the negative parts of D and Q (both blocks), couples
// them as (D_def + Q_def) / 2, projects the stacked (singlet, triplet) result
// onto the kernel of the full partial trace and orthogonally to the conserved
// operators, and subtracts alpha times that update from both D and Q.

#include <vector>

#include "td2rdm/hubbard.hpp"
#include "td2rdm/matcore.hpp"

namespace td2rdm {

/// Q from D using a given per-spin 1RDM.
SpinBlock2Rdm hole_from_particle(const SpinBlock2Rdm& d, const Matrix& gamma);

/// Q from D; the 1RDM is contracted from d (taken as zero when N = 0).
SpinBlock2Rdm hole_from_particle(const SpinBlock2Rdm& d);

struct MVector {
  SpinBlock2Rdm d;
  SpinBlock2Rdm q;

  static MVector from_particle(const SpinBlock2Rdm& d);
};

/// (d_def + q_def) / 2, blockwise.
SpinBlock2Rdm dq_couple(const SpinBlock2Rdm& d_def, const SpinBlock2Rdm& q_def);

struct ConservedOperatorSet {
  std::vector<Matrix> raw;
  std::vector<Matrix> ortho;
};

inline constexpr double kGramSchmidtDropTol = 1e-10;

/// Kernel-project each X with respect to `contraction_map` (acting on
/// column-major vectorized blocks) and Gram-Schmidt orthonormalize.
ConservedOperatorSet build_conserved_set(const std::vector<Matrix>& xs,
                                         const Matrix& contraction_map);

/// X1, X2 of the Hubbard chain, orthonormalized on the singlet block.
ConservedOperatorSet hubbard_conserved_set(const HubbardConfig& cfg);

/// m - sum_i <Y_i, m> Y_i.
Matrix project_conserved(const Matrix& m, const ConservedOperatorSet& ys);

/// Same projection in closed index form for the Hubbard Y1, Y2 pair; valid
/// for inputs in the kernel of the partial trace.
Matrix appendix_b_update(const Matrix& singlet_def_k, int sites);

/// -min eigenvalue over all four blocks, clamped at zero.
double defect(const MVector& m);
double defect(const SpinBlock2Rdm& d, const SpinBlock2Rdm& q);

struct PurificationConfig {
  double alpha = 2.0;
  int k_max = 100;
  double defect_tol = 0.0;  // <= 0 selects 1e-12 * N(N-1)

  void validate() const;
};

double resolve_defect_tol(const PurificationConfig& cfg, int particles);

struct PurificationReport {
  int iterations_used = 0;
  double defect_initial = 0.0;
  double defect_final = 0.0;
  std::vector<double> per_iteration_defects;
  bool converged = false;
};

struct PurificationResult {
  MVector m;
  PurificationReport report;
};

/// Specialized D/Q purifier. Owns the kernel projectors, so one instance
/// serves any number of calls at a fixed site count.
class Purifier {
 public:
  explicit Purifier(int sites);

  int sites() const { return sites_; }
  const Matrix& kernel_projector_for(PairBlock b) const {
    return b == PairBlock::singlet ? kernel_singlet_ : kernel_triplet_;
  }

  /// Project a compact block onto the kernel of its own partial trace.
  Matrix kernel_project(const Matrix& block, PairBlock b) const;

  /// Projector onto the kernel of the 1RDM contraction acting on stacked
  /// (vec S, vec T). Larger than the product of the per-block kernels: it
  /// only fixes the sum of the singlet and triplet contributions.
  const Matrix& joint_kernel_projector() const { return kernel_joint_; }

  /// Joint-kernel projection of a blockwise update, orthogonal to the raw
  /// conserved operators (which live on the singlet block).
  SpinBlock2Rdm project_update(const SpinBlock2Rdm& u, const ConservedOperatorSet& ys) const;

  PurificationResult purify(const MVector& m0, const ConservedOperatorSet& ys,
                            const PurificationConfig& cfg) const;

 private:
  int sites_;
  Matrix kernel_singlet_;
  Matrix kernel_triplet_;
  Matrix kernel_joint_;
};

/// [C_S / 2, 3 C_T / 2]: the stacked map whose image is (N-1) times the 1RDM.
Matrix build_joint_contraction_map(int sites);

}  // namespace td2rdm
