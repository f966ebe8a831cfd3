#include "td2rdm/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace td2rdm {

Complex hs_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream msg;
    msg << "hs_inner: dimension mismatch (" << a.rows() << "x" << a.cols() << " vs " << b.rows()
        << "x" << b.cols() << ")";
    throw Error(msg.str());
  }
  return (a.conjugate().cwiseProduct(b)).sum();
}

double hs_norm(const Matrix& a) { return a.norm(); }

double hermiticity_error(const Matrix& h) {
  if (h.rows() != h.cols()) return std::numeric_limits<double>::infinity();
  if (h.size() == 0) return 0.0;
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

Matrix hermitian_part(const Matrix& h) { return 0.5 * (h + h.adjoint()); }

void require_hermitian(const Matrix& h, const std::string& what, double tol) {
  if (h.rows() != h.cols()) {
    throw Error(what + ": matrix is not square");
  }
  if (!h.allFinite()) {
    throw Error(what + ": non-finite entries");
  }
  const double scale = h.size() == 0 ? 1.0 : std::max(1.0, h.cwiseAbs().maxCoeff());
  const double err = hermiticity_error(h);
  if (err > tol * scale) {
    std::ostringstream msg;
    msg << what << ": not Hermitian (max |H - H^dagger| = " << err << ")";
    throw Error(msg.str());
  }
}

Eigensystem eigh(const Matrix& h, double tol) {
  require_hermitian(h, "eigh", tol);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian_part(h));
  if (solver.info() != Eigen::Success) {
    throw Error("eigh: eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

SpectralSplit negative_part(const Matrix& h) {
  const Eigensystem es = eigh(h);
  const Eigen::Index n = es.values.size();
  SpectralSplit out{Matrix::Zero(h.rows(), h.cols()), Matrix::Zero(h.rows(), h.cols())};
  if (n == 0) return out;
  const double scale = es.values.cwiseAbs().maxCoeff();
  const double eps = kNegativeEigenvalueEps * scale;
  Eigen::Index count = 0;
  while (count < n && es.values(count) < -eps) ++count;
  if (count > 0) {
    const auto v = es.vectors.leftCols(count);
    out.defective = v * es.values.head(count).asDiagonal() * v.adjoint();
  }
  out.positive = hermitian_part(h) - out.defective;
  return out;
}

double min_eigenvalue(const Matrix& h) {
  if (h.size() == 0) return 0.0;
  return eigh(h).values(0);
}

// ---------------------------------------------------------------------------

const char* to_string(PairBlock block) {
  return block == PairBlock::singlet ? "singlet" : "triplet";
}

PairBasis::PairBasis(int sites, PairBlock block) : sites_(sites), block_(block) {
  if (sites < 1) throw Error("PairBasis: need at least one site");
  lookup_.assign(static_cast<std::size_t>(sites * sites), -1);
  for (int i = 0; i < sites; ++i) {
    for (int j = i; j < sites; ++j) {
      if (block == PairBlock::triplet && i == j) continue;
      lookup_[static_cast<std::size_t>(i * sites + j)] = static_cast<int>(pairs_.size());
      lookup_[static_cast<std::size_t>(j * sites + i)] = static_cast<int>(pairs_.size());
      pairs_.emplace_back(i, j);
    }
  }
  isometry_ = RealMatrix::Zero(sites * sites, dim());
  const double r = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < dim(); ++k) {
    const auto [i, j] = pairs_[static_cast<std::size_t>(k)];
    if (i == j) {
      isometry_(i * sites + i, k) = 1.0;
    } else {
      isometry_(i * sites + j, k) = r;
      isometry_(j * sites + i, k) = block == PairBlock::singlet ? r : -r;
    }
  }
}

int PairBasis::index(int i, int j) const {
  if (i < 0 || j < 0 || i >= sites_ || j >= sites_) return -1;
  return lookup_[static_cast<std::size_t>(i * sites_ + j)];
}

Matrix PairBasis::expand(const Matrix& compact) const {
  const Matrix b = isometry_.cast<Complex>();
  return b * compact * b.adjoint();
}

Matrix PairBasis::compress(const Matrix& full) const {
  const Matrix b = isometry_.cast<Complex>();
  return b.adjoint() * full * b;
}

Matrix partial_trace_second(const Matrix& full, int sites) {
  if (full.rows() != sites * sites || full.cols() != sites * sites) {
    throw Error("partial_trace_second: matrix is not over ordered site pairs");
  }
  Matrix out = Matrix::Zero(sites, sites);
  for (int i = 0; i < sites; ++i)
    for (int k = 0; k < sites; ++k)
      for (int m = 0; m < sites; ++m) out(i, k) += full(i * sites + m, k * sites + m);
  return out;
}

Vector vectorize(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix unvectorize(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw Error("unvectorize: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// ---------------------------------------------------------------------------

int singlet_dim(int sites) { return sites * (sites + 1) / 2; }
int triplet_dim(int sites) { return sites * (sites - 1) / 2; }

SpinBlock2Rdm SpinBlock2Rdm::zero(int sites, int particles) {
  SpinBlock2Rdm d;
  d.sites = sites;
  d.particles = particles;
  d.singlet = Matrix::Zero(singlet_dim(sites), singlet_dim(sites));
  d.triplet = Matrix::Zero(triplet_dim(sites), triplet_dim(sites));
  return d;
}

double SpinBlock2Rdm::total_trace() const {
  return singlet.trace().real() + 3.0 * triplet.trace().real();
}

void SpinBlock2Rdm::validate() const {
  if (sites < 2) throw Error("SpinBlock2Rdm: need at least two sites");
  if (particles < 0) throw Error("SpinBlock2Rdm: negative particle number");
  if (singlet.rows() != singlet_dim(sites) || singlet.cols() != singlet_dim(sites)) {
    throw Error("SpinBlock2Rdm: singlet block has wrong dimension");
  }
  if (triplet.rows() != triplet_dim(sites) || triplet.cols() != triplet_dim(sites)) {
    throw Error("SpinBlock2Rdm: triplet block has wrong dimension");
  }
  require_hermitian(singlet, "SpinBlock2Rdm singlet");
  require_hermitian(triplet, "SpinBlock2Rdm triplet");
}

void SpinBlock2Rdm::symmetrize() {
  singlet = hermitian_part(singlet);
  triplet = hermitian_part(triplet);
}

Matrix block_partial_trace(const Matrix& compact, const PairBasis& basis) {
  return partial_trace_second(basis.expand(compact), basis.sites());
}

OneRdm contract_2rdm(const SpinBlock2Rdm& d) {
  if (d.particles <= 1) {
    throw Error("contract_2rdm: need at least two particles");
  }
  const PairBasis sb(d.sites, PairBlock::singlet);
  const PairBasis tb(d.sites, PairBlock::triplet);
  const Matrix sum =
      0.5 * block_partial_trace(d.singlet, sb) + 1.5 * block_partial_trace(d.triplet, tb);
  return {d.particles, sum / static_cast<double>(d.particles - 1)};
}

Matrix build_contraction_map(int sites, PairBlock block) {
  if (sites < 2) throw Error("build_contraction_map: need at least two sites");
  const PairBasis basis(sites, block);
  const int n = basis.dim();
  const RealMatrix& b = basis.isometry();
  Matrix map = Matrix::Zero(sites * sites, n * n);
  // Tr_2(B E_pq B^T)_{ik} = sum_m B_{(i,m),p} B_{(k,m),q}
  for (int q = 0; q < n; ++q) {
    for (int p = 0; p < n; ++p) {
      const Eigen::Index col = p + static_cast<Eigen::Index>(q) * n;
      for (int i = 0; i < sites; ++i) {
        for (int k = 0; k < sites; ++k) {
          double acc = 0.0;
          for (int m = 0; m < sites; ++m) acc += b(i * sites + m, p) * b(k * sites + m, q);
          if (acc != 0.0) map(i + k * sites, col) = acc;
        }
      }
    }
  }
  return map;
}

Matrix kernel_projector(const Matrix& a) {
  const Eigen::Index n = a.cols();
  Matrix p = Matrix::Identity(n, n);
  if (a.rows() == 0 || n == 0) return p;
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinV);
  const RealVector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return p;
  const double tol = sv(0) * static_cast<double>(std::max(a.rows(), n)) *
                     std::numeric_limits<double>::epsilon();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  const auto v = svd.matrixV().leftCols(rank);
  p.noalias() -= v * v.adjoint();
  return hermitian_part(p);
}

}  // namespace td2rdm
