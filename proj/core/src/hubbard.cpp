#include "td2rdm/hubbard.hpp"

#include <cmath>
#include <sstream>

namespace td2rdm {

void HubbardConfig::validate() const {
  if (sites < 2) throw Error("HubbardConfig: need at least two sites");
  if (particles < 0 || particles % 2 != 0) {
    throw Error("HubbardConfig: particle number must be even and non-negative");
  }
  if (particles > 2 * sites) throw Error("HubbardConfig: too many particles");
  if (!(hopping > 0.0)) throw Error("HubbardConfig: hopping must be positive");
  if (!std::isfinite(interaction) || !std::isfinite(trap)) {
    throw Error("HubbardConfig: non-finite parameters");
  }
}

double trap_potential(const HubbardConfig& cfg, int site, double t) {
  if (t >= 0.0) return 0.0;
  const double x = static_cast<double>(site) - 0.5 * (cfg.sites - 1);
  return 0.5 * cfg.trap * cfg.trap * x * x;
}

Matrix h1_matrix(const HubbardConfig& cfg, double t) {
  cfg.validate();
  const int m = cfg.sites;
  Matrix h = Matrix::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) {
    h(i, i + 1) = -cfg.hopping;
    h(i + 1, i) = -cfg.hopping;
  }
  for (int i = 0; i < m; ++i) h(i, i) = trap_potential(cfg, i, t);
  return h;
}

Matrix w12_singlet(const HubbardConfig& cfg) {
  const PairBasis basis(cfg.sites, PairBlock::singlet);
  Matrix w = Matrix::Zero(basis.dim(), basis.dim());
  for (int i = 0; i < cfg.sites; ++i) {
    const int k = basis.index(i, i);
    w(k, k) = cfg.interaction;
  }
  return w;
}

double interaction_energy(const Matrix& singlet, const HubbardConfig& cfg) {
  const PairBasis basis(cfg.sites, PairBlock::singlet);
  if (singlet.rows() != basis.dim()) throw Error("interaction_energy: wrong block dimension");
  double sum = 0.0;
  for (int i = 0; i < cfg.sites; ++i) {
    const int k = basis.index(i, i);
    sum += singlet(k, k).real();
  }
  return 0.5 * cfg.interaction * sum;
}

double eta_expectation(const Matrix& singlet, int sites) {
  const PairBasis basis(sites, PairBlock::singlet);
  if (singlet.rows() != basis.dim()) throw Error("eta_expectation: wrong block dimension");
  Complex sum = 0.0;
  for (int i = 0; i < sites; ++i) {
    for (int j = 0; j < sites; ++j) {
      const double sign = (i + j) % 2 == 0 ? 1.0 : -1.0;
      sum += sign * singlet(basis.index(j, j), basis.index(i, i));
    }
  }
  return 0.5 * sum.real();
}

ConservedOperators conserved_ops(const HubbardConfig& cfg) {
  const PairBasis basis(cfg.sites, PairBlock::singlet);
  const int n = basis.dim();
  ConservedOperators ops{Matrix::Zero(n, n), Matrix::Zero(n, n)};
  Vector parity = Vector::Zero(n);
  for (int i = 0; i < cfg.sites; ++i) {
    const int k = basis.index(i, i);
    ops.interaction(k, k) = 0.5 * cfg.interaction;
    parity(k) = i % 2 == 0 ? 1.0 : -1.0;
  }
  ops.eta = 0.5 * parity * parity.adjoint();
  return ops;
}

Observables observables(const SpinBlock2Rdm& d, const HubbardConfig& cfg, double t) {
  Observables obs;
  const OneRdm gamma = contract_2rdm(d);
  obs.site_densities.resize(static_cast<std::size_t>(cfg.sites));
  for (int i = 0; i < cfg.sites; ++i) {
    obs.site_densities[static_cast<std::size_t>(i)] = 2.0 * gamma.matrix(i, i).real();
  }
  obs.interaction_energy = interaction_energy(d.singlet, cfg);
  obs.eta = eta_expectation(d.singlet, cfg.sites);
  const Matrix h = h1_matrix(cfg, t);
  obs.total_energy = 2.0 * (h * gamma.matrix).trace().real() + obs.interaction_energy;
  return obs;
}

// ---------------------------------------------------------------------------
// Spin-orbital <-> spin-block conversion.
//
// With A the opposite-spin block and Sw the site-pair swap, antisymmetry gives
//   D^{dn up}_{dn up} = Sw A Sw,  D^{up dn}_{dn up} = -A Sw,  D^{dn up}_{up dn} = -Sw A,
// and the singlet / m=0 triplet combinations are (1 +- Sw) A (1 +- Sw) / 2.
// For S^2 = 0 the up-up and down-down blocks equal the triplet block.

namespace {

struct PairIndexer {
  int sites;
  int orbitals() const { return 2 * sites; }
  Eigen::Index so(int site, int spin) const { return spin_orbital(site, spin, sites); }
  Eigen::Index full(int p, int q) const { return static_cast<Eigen::Index>(p) * orbitals() + q; }
  Eigen::Index site_pair(int i, int j) const { return static_cast<Eigen::Index>(i) * sites + j; }
};

Matrix extract_spin_block(const Matrix& full, const PairIndexer& ix, int s1, int s2, int s3,
                          int s4) {
  const int m = ix.sites;
  Matrix out(m * m, m * m);
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2)
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = 0; j2 < m; ++j2)
          out(ix.site_pair(i1, i2), ix.site_pair(j1, j2)) =
              full(ix.full(static_cast<int>(ix.so(i1, s1)), static_cast<int>(ix.so(i2, s2))),
                   ix.full(static_cast<int>(ix.so(j1, s3)), static_cast<int>(ix.so(j2, s4))));
  return out;
}

Matrix swap_matrix(int sites) {
  Matrix sw = Matrix::Zero(sites * sites, sites * sites);
  for (int i = 0; i < sites; ++i)
    for (int j = 0; j < sites; ++j) sw(i * sites + j, j * sites + i) = 1.0;
  return sw;
}

}  // namespace

SpinBlock2Rdm spin_blocks_from_opposite_spin(const Matrix& a, int sites, int particles) {
  const PairBasis sb(sites, PairBlock::singlet);
  const PairBasis tb(sites, PairBlock::triplet);
  SpinBlock2Rdm d;
  d.sites = sites;
  d.particles = particles;
  d.singlet = 2.0 * sb.compress(a);
  d.triplet = 2.0 * tb.compress(a);
  return d;
}

Matrix opposite_spin_block(const SpinBlock2Rdm& d) {
  const PairBasis sb(d.sites, PairBlock::singlet);
  const PairBasis tb(d.sites, PairBlock::triplet);
  return 0.5 * (sb.expand(d.singlet) + tb.expand(d.triplet));
}

SpinBlock2Rdm spin_blocks_from_spinorbital(const Matrix& full, int sites, int particles,
                                           double tol) {
  const PairIndexer ix{sites};
  const int r = ix.orbitals();
  if (full.rows() != r * r || full.cols() != r * r) {
    throw Error("spin_blocks_from_spinorbital: expected a (2M)^2 x (2M)^2 matrix");
  }
  const Matrix a = extract_spin_block(full, ix, 0, 1, 0, 1);
  const Matrix down_up = extract_spin_block(full, ix, 1, 0, 1, 0);
  const Matrix up_up = extract_spin_block(full, ix, 0, 0, 0, 0);
  const Matrix down_down = extract_spin_block(full, ix, 1, 1, 1, 1);
  const Matrix sw = swap_matrix(sites);

  SpinBlock2Rdm d = spin_blocks_from_opposite_spin(a, sites, particles);
  const PairBasis tb(sites, PairBlock::triplet);
  const Matrix t_full = tb.expand(d.triplet);

  auto check = [&](const Matrix& x, const Matrix& y, const char* what) {
    const double err = x.size() == 0 ? 0.0 : (x - y).cwiseAbs().maxCoeff();
    if (err > tol) {
      std::ostringstream msg;
      msg << "spin_blocks_from_spinorbital: input not in the S^2 = 0 structure (" << what
          << " differs by " << err << ")";
      throw Error(msg.str());
    }
  };
  check(up_up, t_full, "up-up vs m=0 triplet");
  check(down_down, t_full, "down-down vs m=0 triplet");
  check(down_up, sw * a * sw, "spin-flipped opposite-spin block");
  // Singlet-triplet coherences vanish for a spin singlet.
  const Matrix ps = 0.5 * (Matrix::Identity(sites * sites, sites * sites) + sw);
  const Matrix pa = 0.5 * (Matrix::Identity(sites * sites, sites * sites) - sw);
  check(ps * a * pa, Matrix::Zero(sites * sites, sites * sites), "singlet-triplet coherence");
  return d;
}

Matrix spinorbital_from_spin_blocks(const SpinBlock2Rdm& d) {
  const PairIndexer ix{d.sites};
  const int m = d.sites;
  const int r = ix.orbitals();
  const PairBasis tb(m, PairBlock::triplet);
  const Matrix a = opposite_spin_block(d);
  const Matrix t_full = tb.expand(d.triplet);
  Matrix full = Matrix::Zero(r * r, r * r);
  auto at = [&](int i1, int s1, int i2, int s2, int j1, int s3, int j2, int s4) -> Complex& {
    return full(ix.full(static_cast<int>(ix.so(i1, s1)), static_cast<int>(ix.so(i2, s2))),
                ix.full(static_cast<int>(ix.so(j1, s3)), static_cast<int>(ix.so(j2, s4))));
  };
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2)
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = 0; j2 < m; ++j2) {
          const Complex t = t_full(ix.site_pair(i1, i2), ix.site_pair(j1, j2));
          at(i1, 0, i2, 0, j1, 0, j2, 0) = t;
          at(i1, 1, i2, 1, j1, 1, j2, 1) = t;
          at(i1, 0, i2, 1, j1, 0, j2, 1) = a(ix.site_pair(i1, i2), ix.site_pair(j1, j2));
          at(i1, 1, i2, 0, j1, 1, j2, 0) = a(ix.site_pair(i2, i1), ix.site_pair(j2, j1));
          at(i1, 0, i2, 1, j1, 1, j2, 0) = -a(ix.site_pair(i1, i2), ix.site_pair(j2, j1));
          at(i1, 1, i2, 0, j1, 0, j2, 1) = -a(ix.site_pair(i2, i1), ix.site_pair(j1, j2));
        }
  return full;
}

Matrix spinorbital_one_rdm(const Matrix& per_spin) {
  const Eigen::Index m = per_spin.rows();
  Matrix g = Matrix::Zero(2 * m, 2 * m);
  g.topLeftCorner(m, m) = per_spin;
  g.bottomRightCorner(m, m) = per_spin;
  return g;
}

}  // namespace td2rdm
