#pragma once

// One-dimensional Fermi-Hubbard chain with hard-wall boundaries and an
// optional harmonic trap that is switched off at t = 0.
//
// Sites are 0-based in code. The trap is centred at (M - 1) / 2, which is the
// 1-based centre (M + 1) / 2 shifted by one; parity factors (-1)^(i+j) are
// unaffected by the shift.
//
// Spin orbitals are numbered p = spin * M + site with spin 0 = up, 1 = down.

#include <vector>

#include "td2rdm/matcore.hpp"

namespace td2rdm {

struct HubbardConfig {
  int sites = 6;
  int particles = 6;
  double hopping = 1.0;      // J, the energy unit
  double interaction = 0.0;  // U in units of J
  double trap = 0.0;         // V in units of J

  int particles_per_spin() const { return particles / 2; }
  void validate() const;
};

inline int spin_orbital(int site, int spin, int sites) { return spin * sites + site; }

/// Trap potential V_i(t); zero for t >= 0.
double trap_potential(const HubbardConfig& cfg, int site, double t);

/// One-particle Hamiltonian per spin channel (M x M).
Matrix h1_matrix(const HubbardConfig& cfg, double t);

/// On-site interaction restricted to the compact singlet block.
Matrix w12_singlet(const HubbardConfig& cfg);

/// <W> = (U/2) sum_i S^{ii}_{ii}.
double interaction_energy(const Matrix& singlet, const HubbardConfig& cfg);

/// <eta^+ eta^-> = 1/2 sum_ij (-1)^(i+j) S^{jj}_{ii}.
double eta_expectation(const Matrix& singlet, int sites);

/// Singlet-block operators X1 (interaction) and X2 (eta pairing) with
/// hs_inner(X1, S) = interaction_energy(S) and hs_inner(X2, S) = eta_expectation(S).
struct ConservedOperators {
  Matrix interaction;
  Matrix eta;
};

ConservedOperators conserved_ops(const HubbardConfig& cfg);

struct Observables {
  std::vector<double> site_densities;
  double interaction_energy = 0.0;
  double eta = 0.0;
  double total_energy = 0.0;
};

Observables observables(const SpinBlock2Rdm& d, const HubbardConfig& cfg, double t);

/// Convert a full spin-orbital 2RDM ((2M)^2 x (2M)^2, ordered pair index
/// p*2M + q) into spin blocks. Throws when the three triplet components differ
/// by more than `tol` or when S_z-forbidden elements are present.
SpinBlock2Rdm spin_blocks_from_spinorbital(const Matrix& full, int sites, int particles,
                                           double tol = 1e-8);

/// Inverse of spin_blocks_from_spinorbital.
Matrix spinorbital_from_spin_blocks(const SpinBlock2Rdm& d);

/// Opposite-spin block A^{i1 i2}_{j1 j2} = D^{(i1 up)(i2 down)}_{(j1 up)(j2 down)}.
Matrix opposite_spin_block(const SpinBlock2Rdm& d);

/// Spin blocks from an opposite-spin block A of a spin-symmetric state.
SpinBlock2Rdm spin_blocks_from_opposite_spin(const Matrix& a, int sites, int particles);

/// Block-diagonal spin-orbital 1RDM (2M x 2M) from the per-spin matrix.
Matrix spinorbital_one_rdm(const Matrix& per_spin);

}  // namespace td2rdm
