#pragma once

// Closure of the two-particle equation of motion.
//
// Everything here works over r = 2M spin orbitals with antisymmetric,
// ordered multi-indices (row-major flattening, first index slowest):
//   two-body   X^{ab}_{cd}    -> (a*r + b, c*r + d)
//   three-body X^{abe}_{cdf}  -> ((a*r + b)*r + e, (c*r + d)*r + f)
//
// The 3RDM is the Valdemoro functional (three-particle cumulant dropped),
//   D3 = det[gamma] + sum_{ij} (-1)^{i+j} Delta^{x\x_i}_{y\y_j} gamma_{x_i y_j},
// corrected by the minimal-norm term that restores Tr_3 D3 = (N-2) D2.

#include "td2rdm/hubbard.hpp"
#include "td2rdm/matcore.hpp"

namespace td2rdm {

struct ThreeRdm {
  int orbitals = 0;
  Matrix data;  // r^3 x r^3

  Eigen::Index index(int a, int b, int e) const {
    return (static_cast<Eigen::Index>(a) * orbitals + b) * orbitals + e;
  }
  Complex operator()(int a, int b, int e, int c, int d, int f) const {
    return data(index(a, b, e), index(c, d, f));
  }
};

/// (gamma ^ gamma)^{ab}_{cd} = gamma_ac gamma_bd - gamma_ad gamma_bc.
Matrix wedge_one_body(const Matrix& gamma_so);

/// Delta = D2 - gamma ^ gamma over spin orbitals.
Matrix cumulant_delta12_full(const Matrix& gamma_so, const Matrix& d2_full);

/// Same cumulant in spin-block form.
SpinBlock2Rdm cumulant_delta12(const OneRdm& d1, const SpinBlock2Rdm& d12);

/// Raw Valdemoro 3RDM, dense.
ThreeRdm valdemoro_d123(const Matrix& gamma_so, const Matrix& delta_full);
ThreeRdm valdemoro_d123(const OneRdm& d1, const SpinBlock2Rdm& d12);

/// Single element of the raw functional.
Complex valdemoro_element(const Matrix& gamma_so, const Matrix& delta_full, int a, int b, int e,
                          int c, int d, int f);

/// Tr_3 of the raw functional from gamma and Delta alone.
Matrix valdemoro_partial_trace(const Matrix& gamma_so, const Matrix& delta_full);

/// (Tr_3 X)^{ab}_{cd} = sum_e X^{abe}_{cde}.
Matrix partial_trace_3(const ThreeRdm& x);

/// Adjoint of Tr_3 on antisymmetric operators: A3 (Z (x) 1) A3.
ThreeRdm lift_two_body(const Matrix& z, int orbitals);
Complex lift_element(const Matrix& z, int orbitals, int a, int b, int e, int c, int d, int f);

/// Tr_3 T^dagger Z in closed form: ((r-4) Z + G(Tr_2 Z)) / 9.
Matrix tr3_lift(const Matrix& z, int orbitals);

/// Z with Tr_3 T^dagger Z = delta (pseudo-inverse on the antisymmetric space).
Matrix lift_coefficients(const Matrix& delta, int orbitals);

/// raw + T^dagger (T T^dagger)^+ ((N-2) D2 - Tr_3 raw).
ThreeRdm fix_contraction_d123(const ThreeRdm& raw, const Matrix& d2_full, int particles);

/// Opposite-spin block of Tr_3[W_13 + W_23, D3] for the on-site interaction,
/// read off a dense 3RDM.
Matrix collision_from_three_rdm(const ThreeRdm& d3, int sites, double interaction);

/// Same collision block evaluated from the reconstructed, contraction-fixed
/// 3RDM without materializing it.
class CollisionEvaluator {
 public:
  explicit CollisionEvaluator(int sites);

  Matrix operator()(const SpinBlock2Rdm& d, double interaction) const;

  /// Dense route used for cross-checks.
  ThreeRdm reconstructed(const SpinBlock2Rdm& d) const;

 private:
  int sites_;
};

}  // namespace td2rdm
