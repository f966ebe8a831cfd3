#pragma once

// Exact diagonalization of the Hubbard chain in the (N/2, N/2) sector and
// reduced density matrices evaluated straight from their operator strings.
//
// RDM conventions over spin orbitals (p = spin * M + site):
//   D^{x1..xp}_{y1..yp} = <a^+_{y1} .. a^+_{yp} a_{xp} .. a_{x1}>,  row x, column y,
//   Q^{ab}_{cd}         = <a_a a_b a^+_d a^+_c>,
// with multi-indices flattened row-major, x1 slowest.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "td2rdm/hubbard.hpp"
#include "td2rdm/matcore.hpp"

namespace td2rdm {

inline constexpr std::size_t kDefaultOracleDimCap = 10000;

struct FockBasis {
  int sites = 0;
  int n_up = 0;
  int n_down = 0;
  std::vector<std::uint64_t> masks;  // bit p = spin * M + site; ascending

  FockBasis(int sites_, int n_up_, int n_down_);

  std::size_t dim() const { return masks.size(); }
  /// Position of `mask`, or -1.
  long index(std::uint64_t mask) const;
};

struct GroundState {
  double energy = 0.0;
  double gap = 0.0;  // to the next level; 0 flags a degenerate ground level
  Vector state;
};

class HubbardOracle {
 public:
  explicit HubbardOracle(const HubbardConfig& cfg, std::size_t dim_cap = kDefaultOracleDimCap);

  const HubbardConfig& config() const { return cfg_; }
  const FockBasis& basis() const { return basis_; }

  /// Many-body Hamiltonian with the trap on (t < 0) or off.
  RealMatrix hamiltonian(bool trapped) const;

  /// Lowest eigenvector of the trapped Hamiltonian. Phase fixed so that the
  /// largest-magnitude amplitude is real and positive.
  GroundState ground_state() const;

  /// Embedding into the full 2^(2M) Fock space.
  Vector to_full_space(const Vector& psi) const;

  Matrix rdm(const Vector& psi, int order) const;
  Matrix hole_rdm2(const Vector& psi) const;

  SpinBlock2Rdm spin_blocks(const Vector& psi) const;
  SpinBlock2Rdm hole_spin_blocks(const Vector& psi) const;
  /// Per-spin 1RDM (spin-up block).
  Matrix one_rdm(const Vector& psi) const;

  std::vector<double> site_densities(const Vector& psi) const;
  double interaction_energy(const Vector& psi) const;
  double eta_expectation(const Vector& psi) const;
  double s_squared(const Vector& psi) const;
  double energy(const Vector& psi, bool trapped) const;

 private:
  HubbardConfig cfg_;
  FockBasis basis_;
};

/// exp(-i H t) psi0 under the untrapped Hamiltonian, via one dense
/// eigendecomposition.
class ExactPropagator {
 public:
  ExactPropagator(const HubbardOracle& oracle, const Vector& psi0);
  Vector state_at(double t) const;

 private:
  RealVector energies_;
  RealMatrix vectors_;
  Vector coefficients_;
};

// Fermion operators on full Fock-space vectors (index = occupation mask).
Vector annihilate(const Vector& v, int orbital);
Vector create(const Vector& v, int orbital);

/// Normal-ordered string sign: (-1)^(number of occupied orbitals below p).
int fermion_sign(std::uint64_t mask, int orbital);

}  // namespace td2rdm
