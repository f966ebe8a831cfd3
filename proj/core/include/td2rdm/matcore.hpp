#pragma once

// Dense Hermitian matrix algebra shared by the purifier, the Hubbard model
// and the reconstruction code.
//
// Two-particle matrices are stored in two layouts:
//   * full pair index: an (M*M) x (M*M) matrix over ordered site pairs
//     (i1, i2) -> i1*M + i2, the layout in which index formulas are written;
//   * compact pair index: the same operator compressed onto the symmetric
//     (singlet, i1 <= i2) or antisymmetric (triplet, i1 < i2) pair subspace
//     through an isometry. Traces, spectra and Hilbert-Schmidt products are
//     identical in both layouts.

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace td2rdm {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Absolute Hermiticity tolerance for O(1) entries; scaled by max|H_ij| above 1.
inline constexpr double kHermitianTol = 1e-13;

/// Relative threshold below which negative eigenvalues count as numerical zero.
inline constexpr double kNegativeEigenvalueEps = 1e-14;

/// Tr(A^dagger B).
Complex hs_inner(const Matrix& a, const Matrix& b);

double hs_norm(const Matrix& a);

/// Largest |H_ij - conj(H_ji)|.
double hermiticity_error(const Matrix& h);

Matrix hermitian_part(const Matrix& h);

/// Throws Error when `h` is not square or not Hermitian within tolerance.
void require_hermitian(const Matrix& h, const std::string& what,
                       double tol = kHermitianTol);

struct Eigensystem {
  RealVector values;  // ascending
  Matrix vectors;     // orthonormal columns
};

/// Hermitian eigendecomposition. The input is symmetrized before solving.
Eigensystem eigh(const Matrix& h, double tol = kHermitianTol);

struct SpectralSplit {
  Matrix defective;  // built from eigenvalues < -eps_neg
  Matrix positive;   // the rest, so that defective + positive == input
};

SpectralSplit negative_part(const Matrix& h);

double min_eigenvalue(const Matrix& h);

// ---------------------------------------------------------------------------
// Pair spaces

enum class PairBlock { singlet, triplet };

const char* to_string(PairBlock block);

/// Orthonormal basis of the symmetric or antisymmetric part of C^M (x) C^M.
class PairBasis {
 public:
  PairBasis(int sites, PairBlock block);

  int sites() const { return sites_; }
  int dim() const { return static_cast<int>(pairs_.size()); }
  PairBlock block() const { return block_; }

  /// Compact index of the unordered pair {i, j}; -1 if it is not a basis
  /// element (i == j in the triplet block).
  int index(int i, int j) const;
  std::pair<int, int> pair(int k) const { return pairs_[static_cast<std::size_t>(k)]; }

  /// (M*M) x dim isometry B with B^dagger B = 1.
  const RealMatrix& isometry() const { return isometry_; }

  /// B X B^dagger.
  Matrix expand(const Matrix& compact) const;
  /// B^dagger X B.
  Matrix compress(const Matrix& full) const;

 private:
  int sites_;
  PairBlock block_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<int> lookup_;
  RealMatrix isometry_;
};

/// Partial trace over the second site of a full pair-index matrix.
Matrix partial_trace_second(const Matrix& full, int sites);

/// Column-major vectorization.
Vector vectorize(const Matrix& m);
Matrix unvectorize(const Vector& v, Eigen::Index rows, Eigen::Index cols);

// ---------------------------------------------------------------------------
// Spin-adapted two-particle RDM

/// Two-particle RDM of an S_z = 0, S^2 = 0 state in spin-adapted form.
///
/// `singlet` and `triplet` are compact blocks. The three triplet components
/// are equal, so the spin-orbital trace is tr(singlet) + 3 tr(triplet).
struct SpinBlock2Rdm {
  int sites = 0;
  int particles = 0;
  Matrix singlet;
  Matrix triplet;

  static SpinBlock2Rdm zero(int sites, int particles);

  double total_trace() const;
  const Matrix& block(PairBlock b) const { return b == PairBlock::singlet ? singlet : triplet; }
  Matrix& block(PairBlock b) { return b == PairBlock::singlet ? singlet : triplet; }

  /// Throws when dimensions or Hermiticity are off.
  void validate() const;
  void symmetrize();
};

int singlet_dim(int sites);
int triplet_dim(int sites);

/// Per-spin-channel one-particle RDM, gamma_ik = <a^dagger_k a_i>.
struct OneRdm {
  int particles = 0;
  Matrix matrix;
};

/// Raw partial trace Tr_2 of one compact block, as an M x M matrix.
Matrix block_partial_trace(const Matrix& compact, const PairBasis& basis);

/// gamma = Tr_2[(S + 3 T) / 2] / (N - 1); rejects N <= 1.
OneRdm contract_2rdm(const SpinBlock2Rdm& d);

/// Explicit matrix of X -> Tr_2(B X B^dagger), shape (M*M) x dim^2 acting on
/// column-major vectorized compact blocks.
Matrix build_contraction_map(int sites, PairBlock block);

/// I - A^+ A for a linear map given as a matrix.
Matrix kernel_projector(const Matrix& a);

}  // namespace td2rdm
