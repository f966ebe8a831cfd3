#include "td2rdm/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

namespace td2rdm {

namespace {

std::vector<std::uint64_t> masks_with_popcount(int bits, int count) {
  std::vector<std::uint64_t> out;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << bits); ++m) {
    if (std::popcount(m) == count) out.push_back(m);
  }
  return out;
}

int orbitals_of(const HubbardConfig& cfg) { return 2 * cfg.sites; }

// All strictly increasing p-tuples over r orbitals.
std::vector<std::vector<int>> sorted_tuples(int r, int p) {
  std::vector<std::vector<int>> out;
  std::vector<int> t(static_cast<std::size_t>(p));
  auto rec = [&](auto&& self, int pos, int start) -> void {
    if (pos == p) {
      out.push_back(t);
      return;
    }
    for (int a = start; a < r; ++a) {
      t[static_cast<std::size_t>(pos)] = a;
      self(self, pos + 1, a + 1);
    }
  };
  rec(rec, 0, 0);
  return out;
}

// Expand a Gram matrix over sorted tuples to all ordered tuples with
// permutation signs. Tuples with repeated entries give zero.
Matrix expand_antisymmetric(const Matrix& gram, const std::vector<std::vector<int>>& tuples, int r,
                            int p) {
  Eigen::Index full = 1;
  for (int i = 0; i < p; ++i) full *= r;
  Matrix out = Matrix::Zero(full, full);

  // For every ordered tuple with distinct entries: (sorted index, sign).
  std::vector<std::pair<long, int>> lookup(static_cast<std::size_t>(full), {-1, 0});
  std::vector<long> sorted_index(static_cast<std::size_t>(full), -1);
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    long flat = 0;
    for (int a : tuples[k]) flat = flat * r + a;
    sorted_index[static_cast<std::size_t>(flat)] = static_cast<long>(k);
  }
  for (Eigen::Index flat = 0; flat < full; ++flat) {
    std::vector<int> t(static_cast<std::size_t>(p));
    Eigen::Index rest = flat;
    for (int i = p - 1; i >= 0; --i) {
      t[static_cast<std::size_t>(i)] = static_cast<int>(rest % r);
      rest /= r;
    }
    int sign = 1;
    bool repeated = false;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        if (t[static_cast<std::size_t>(i)] == t[static_cast<std::size_t>(j)]) repeated = true;
        if (t[static_cast<std::size_t>(i)] > t[static_cast<std::size_t>(j)]) sign = -sign;
      }
    if (repeated) continue;
    std::sort(t.begin(), t.end());
    long sorted_flat = 0;
    for (int a : t) sorted_flat = sorted_flat * r + a;
    lookup[static_cast<std::size_t>(flat)] = {sorted_index[static_cast<std::size_t>(sorted_flat)],
                                              sign};
  }
  for (Eigen::Index x = 0; x < full; ++x) {
    const auto [kx, sx] = lookup[static_cast<std::size_t>(x)];
    if (kx < 0) continue;
    for (Eigen::Index y = 0; y < full; ++y) {
      const auto [ky, sy] = lookup[static_cast<std::size_t>(y)];
      if (ky < 0) continue;
      out(x, y) = static_cast<double>(sx * sy) * gram(kx, ky);
    }
  }
  return out;
}

}  // namespace

int fermion_sign(std::uint64_t mask, int orbital) {
  const std::uint64_t below = mask & ((std::uint64_t{1} << orbital) - 1);
  return std::popcount(below) % 2 == 0 ? 1 : -1;
}

Vector annihilate(const Vector& v, int orbital) {
  Vector out = Vector::Zero(v.size());
  const std::uint64_t bit = std::uint64_t{1} << orbital;
  for (Eigen::Index m = 0; m < v.size(); ++m) {
    const auto mask = static_cast<std::uint64_t>(m);
    if (!(mask & bit) || v(m) == 0.0) continue;
    out(static_cast<Eigen::Index>(mask ^ bit)) += static_cast<double>(fermion_sign(mask, orbital)) * v(m);
  }
  return out;
}

Vector create(const Vector& v, int orbital) {
  Vector out = Vector::Zero(v.size());
  const std::uint64_t bit = std::uint64_t{1} << orbital;
  for (Eigen::Index m = 0; m < v.size(); ++m) {
    const auto mask = static_cast<std::uint64_t>(m);
    if ((mask & bit) || v(m) == 0.0) continue;
    out(static_cast<Eigen::Index>(mask | bit)) += static_cast<double>(fermion_sign(mask, orbital)) * v(m);
  }
  return out;
}

// ---------------------------------------------------------------------------

FockBasis::FockBasis(int sites_, int n_up_, int n_down_)
    : sites(sites_), n_up(n_up_), n_down(n_down_) {
  if (sites < 1 || 2 * sites > 62) throw Error("FockBasis: unsupported site count");
  const auto ups = masks_with_popcount(sites, n_up);
  const auto downs = masks_with_popcount(sites, n_down);
  masks.reserve(ups.size() * downs.size());
  for (auto d : downs)
    for (auto u : ups) masks.push_back(u | (d << sites));
  std::sort(masks.begin(), masks.end());
}

long FockBasis::index(std::uint64_t mask) const {
  const auto it = std::lower_bound(masks.begin(), masks.end(), mask);
  if (it == masks.end() || *it != mask) return -1;
  return static_cast<long>(it - masks.begin());
}

HubbardOracle::HubbardOracle(const HubbardConfig& cfg, std::size_t dim_cap)
    : cfg_(cfg), basis_((cfg.validate(), cfg.sites), cfg.particles / 2, cfg.particles / 2) {
  if (basis_.dim() > dim_cap) {
    std::ostringstream msg;
    msg << "HubbardOracle: Hilbert space dimension " << basis_.dim() << " exceeds cap " << dim_cap;
    throw Error(msg.str());
  }
}

RealMatrix HubbardOracle::hamiltonian(bool trapped) const {
  const int m = cfg_.sites;
  const Matrix h1 = h1_matrix(cfg_, trapped ? -1.0 : 0.0);
  const auto dim = static_cast<Eigen::Index>(basis_.dim());
  RealMatrix h = RealMatrix::Zero(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const std::uint64_t mask = basis_.masks[static_cast<std::size_t>(col)];
    for (int spin = 0; spin < 2; ++spin) {
      for (int q = 0; q < m; ++q) {
        const int oq = spin_orbital(q, spin, m);
        if (!(mask & (std::uint64_t{1} << oq))) continue;
        const std::uint64_t after_q = mask ^ (std::uint64_t{1} << oq);
        const int sq = fermion_sign(mask, oq);
        for (int p = 0; p < m; ++p) {
          const double hpq = h1(p, q).real();
          if (hpq == 0.0) continue;
          const int op = spin_orbital(p, spin, m);
          if (after_q & (std::uint64_t{1} << op)) continue;
          const std::uint64_t target = after_q | (std::uint64_t{1} << op);
          const long row = basis_.index(target);
          h(row, col) += hpq * sq * fermion_sign(after_q, op);
        }
      }
    }
    for (int i = 0; i < m; ++i) {
      const bool up = mask & (std::uint64_t{1} << spin_orbital(i, 0, m));
      const bool down = mask & (std::uint64_t{1} << spin_orbital(i, 1, m));
      if (up && down) h(col, col) += cfg_.interaction;
    }
  }
  return h;
}

GroundState HubbardOracle::ground_state() const {
  const RealMatrix h = hamiltonian(true);
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw Error("ground_state: eigensolver failed");
  GroundState gs;
  gs.energy = solver.eigenvalues()(0);
  gs.gap = solver.eigenvalues().size() > 1 ? solver.eigenvalues()(1) - gs.energy : 0.0;
  RealVector v = solver.eigenvectors().col(0);
  Eigen::Index largest = 0;
  v.cwiseAbs().maxCoeff(&largest);
  if (v(largest) < 0.0) v = -v;
  gs.state = v.cast<Complex>();
  return gs;
}

Vector HubbardOracle::to_full_space(const Vector& psi) const {
  if (static_cast<std::size_t>(psi.size()) != basis_.dim()) {
    throw Error("to_full_space: state does not match basis");
  }
  Vector full = Vector::Zero(Eigen::Index{1} << orbitals_of(cfg_));
  for (std::size_t k = 0; k < basis_.dim(); ++k) {
    full(static_cast<Eigen::Index>(basis_.masks[k])) = psi(static_cast<Eigen::Index>(k));
  }
  return full;
}

Matrix HubbardOracle::rdm(const Vector& psi, int order) const {
  if (order < 1 || order > 3) throw Error("rdm: order must be 1, 2 or 3");
  const int r = orbitals_of(cfg_);
  const Vector full = to_full_space(psi);
  const auto tuples = sorted_tuples(r, order);
  // phi_x = a_{xp} .. a_{x1} psi
  Matrix phi(full.size(), static_cast<Eigen::Index>(tuples.size()));
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    Vector v = full;
    for (int a : tuples[k]) v = annihilate(v, a);
    phi.col(static_cast<Eigen::Index>(k)) = v;
  }
  // D_{xy} = <phi_y | phi_x>
  const Matrix gram = (phi.adjoint() * phi).transpose();
  return expand_antisymmetric(gram, tuples, r, order);
}

Matrix HubbardOracle::hole_rdm2(const Vector& psi) const {
  const int r = orbitals_of(cfg_);
  const Vector full = to_full_space(psi);
  const auto tuples = sorted_tuples(r, 2);
  // chi_ab = a^+_b a^+_a psi, Q_{(ab),(cd)} = <chi_ab | chi_cd>
  Matrix chi(full.size(), static_cast<Eigen::Index>(tuples.size()));
  for (std::size_t k = 0; k < tuples.size(); ++k) {
    chi.col(static_cast<Eigen::Index>(k)) = create(create(full, tuples[k][0]), tuples[k][1]);
  }
  const Matrix gram = chi.adjoint() * chi;
  return expand_antisymmetric(gram, tuples, r, 2);
}

SpinBlock2Rdm HubbardOracle::spin_blocks(const Vector& psi) const {
  return spin_blocks_from_spinorbital(rdm(psi, 2), cfg_.sites, cfg_.particles);
}

SpinBlock2Rdm HubbardOracle::hole_spin_blocks(const Vector& psi) const {
  return spin_blocks_from_spinorbital(hole_rdm2(psi), cfg_.sites, cfg_.particles);
}

Matrix HubbardOracle::one_rdm(const Vector& psi) const {
  return rdm(psi, 1).topLeftCorner(cfg_.sites, cfg_.sites);
}

std::vector<double> HubbardOracle::site_densities(const Vector& psi) const {
  const int m = cfg_.sites;
  std::vector<double> n(static_cast<std::size_t>(m), 0.0);
  for (std::size_t k = 0; k < basis_.dim(); ++k) {
    const double w = std::norm(psi(static_cast<Eigen::Index>(k)));
    for (int i = 0; i < m; ++i)
      for (int spin = 0; spin < 2; ++spin)
        if (basis_.masks[k] & (std::uint64_t{1} << spin_orbital(i, spin, m)))
          n[static_cast<std::size_t>(i)] += w;
  }
  return n;
}

double HubbardOracle::interaction_energy(const Vector& psi) const {
  const int m = cfg_.sites;
  double sum = 0.0;
  for (std::size_t k = 0; k < basis_.dim(); ++k) {
    int doubles = 0;
    for (int i = 0; i < m; ++i) {
      const std::uint64_t both =
          (std::uint64_t{1} << spin_orbital(i, 0, m)) | (std::uint64_t{1} << spin_orbital(i, 1, m));
      if ((basis_.masks[k] & both) == both) ++doubles;
    }
    sum += doubles * std::norm(psi(static_cast<Eigen::Index>(k)));
  }
  return cfg_.interaction * sum;
}

double HubbardOracle::eta_expectation(const Vector& psi) const {
  // eta^- = sum_j (-1)^j a_{j up} a_{j down};  <eta^+ eta^-> = |eta^- psi|^2
  const int m = cfg_.sites;
  const Vector full = to_full_space(psi);
  Vector out = Vector::Zero(full.size());
  for (int j = 0; j < m; ++j) {
    const double sign = j % 2 == 0 ? 1.0 : -1.0;
    out += sign * annihilate(annihilate(full, spin_orbital(j, 1, m)), spin_orbital(j, 0, m));
  }
  return out.squaredNorm();
}

double HubbardOracle::s_squared(const Vector& psi) const {
  // S^2 = S^- S^+ + S_z (S_z + 1) with S_z = (n_up - n_down) / 2
  const int m = cfg_.sites;
  const Vector full = to_full_space(psi);
  Vector raised = Vector::Zero(full.size());
  for (int i = 0; i < m; ++i) {
    raised += create(annihilate(full, spin_orbital(i, 1, m)), spin_orbital(i, 0, m));
  }
  const double sz = 0.5 * (basis_.n_up - basis_.n_down);
  return raised.squaredNorm() + sz * (sz + 1.0);
}

double HubbardOracle::energy(const Vector& psi, bool trapped) const {
  const RealMatrix h = hamiltonian(trapped);
  return psi.dot(h.cast<Complex>() * psi).real();
}

ExactPropagator::ExactPropagator(const HubbardOracle& oracle, const Vector& psi0) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(oracle.hamiltonian(false));
  if (solver.info() != Eigen::Success) throw Error("ExactPropagator: eigensolver failed");
  energies_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
  coefficients_ = vectors_.cast<Complex>().adjoint() * psi0;
}

Vector ExactPropagator::state_at(double t) const {
  Vector c(coefficients_.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    c(k) = coefficients_(k) * std::exp(Complex(0.0, -energies_(k) * t));
  }
  return vectors_.cast<Complex>() * c;
}

}  // namespace td2rdm
