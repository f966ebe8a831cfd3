#pragma once

// Random inputs for property tests. Everything draws from std::mt19937_64 so a
// failing case is reproducible from its seed.

#include <cstdint>
#include <random>

#include "td2rdm/matcore.hpp"
#include "td2rdm/oracle.hpp"
#include "td2rdm/purifier.hpp"

namespace td2rdm::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Complex complex_entry(Rng& rng) { return {uniform(rng), uniform(rng)}; }

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_entry(rng);
  return m;
}

inline Matrix random_hermitian(Rng& rng, Eigen::Index n) {
  const Matrix a = random_matrix(rng, n, n);
  return 0.5 * (a + a.adjoint());
}

inline Matrix random_real_symmetric(Rng& rng, Eigen::Index n) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = uniform(rng);
  return a;
}

/// Positive semidefinite matrix with the given rank.
inline Matrix random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank) {
  const Matrix a = random_matrix(rng, n, rank);
  return a * a.adjoint();
}

inline Vector random_unit_vector(Rng& rng, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = complex_entry(rng);
  return v / v.norm();
}

/// A random (not ground) state of the oracle's sector; its RDMs are exactly
/// N-representable but not spin singlets in general.
inline Vector random_sector_state(Rng& rng, const HubbardOracle& oracle) {
  return random_unit_vector(rng, static_cast<Eigen::Index>(oracle.basis().dim()));
}

inline SpinBlock2Rdm random_blocks(Rng& rng, int sites, int particles) {
  SpinBlock2Rdm d = SpinBlock2Rdm::zero(sites, particles);
  d.singlet = random_hermitian(rng, singlet_dim(sites));
  d.triplet = random_hermitian(rng, triplet_dim(sites));
  return d;
}

/// Direction in both blocks that leaves the 1RDM and the conserved
/// expectation values unchanged, scaled to Hilbert-Schmidt norm `norm`.
inline SpinBlock2Rdm random_allowed_direction(Rng& rng, const Purifier& purifier,
                                              const ConservedOperatorSet& ys, int particles,
                                              double norm) {
  const int m = purifier.sites();
  SpinBlock2Rdm p = SpinBlock2Rdm::zero(m, particles);
  p.singlet = project_conserved(
      purifier.kernel_project(random_hermitian(rng, singlet_dim(m)), PairBlock::singlet), ys);
  p.triplet = purifier.kernel_project(random_hermitian(rng, triplet_dim(m)), PairBlock::triplet);
  const double scale =
      norm / std::sqrt(std::pow(hs_norm(p.singlet), 2) + std::pow(hs_norm(p.triplet), 2));
  p.singlet *= scale;
  p.triplet *= scale;
  return p;
}

inline SpinBlock2Rdm plus(const SpinBlock2Rdm& a, const SpinBlock2Rdm& b) {
  SpinBlock2Rdm out = a;
  out.singlet += b.singlet;
  out.triplet += b.triplet;
  return out;
}

inline double block_distance(const SpinBlock2Rdm& a, const SpinBlock2Rdm& b) {
  return std::max((a.singlet - b.singlet).cwiseAbs().maxCoeff(),
                  (a.triplet - b.triplet).cwiseAbs().maxCoeff());
}

}  // namespace td2rdm::testing
