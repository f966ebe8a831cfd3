#include "td2rdm/purifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace td2rdm {

namespace {

// I (x) I - gamma (x) I - I (x) gamma over ordered site pairs.
Matrix hole_one_body_part(const Matrix& gamma) {
  const Eigen::Index m = gamma.rows();
  Matrix out = Matrix::Zero(m * m, m * m);
  for (Eigen::Index i1 = 0; i1 < m; ++i1)
    for (Eigen::Index i2 = 0; i2 < m; ++i2) {
      const Eigen::Index row = i1 * m + i2;
      out(row, row) += 1.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        out(row, j * m + i2) -= gamma(i1, j);
        out(row, i1 * m + j) -= gamma(i2, j);
      }
    }
  return out;
}

void require_same_shape(const SpinBlock2Rdm& a, const SpinBlock2Rdm& b, const char* what) {
  if (a.sites != b.sites || a.singlet.rows() != b.singlet.rows() ||
      a.triplet.rows() != b.triplet.rows()) {
    throw Error(std::string(what) + ": block dimensions differ");
  }
}

Vector stack_blocks(const SpinBlock2Rdm& b) {
  const Eigen::Index ns = b.singlet.size();
  Vector v(ns + b.triplet.size());
  v.head(ns) = vectorize(b.singlet);
  v.tail(b.triplet.size()) = vectorize(b.triplet);
  return v;
}

void unstack_blocks(const Vector& v, SpinBlock2Rdm& b) {
  const Eigen::Index ds = b.singlet.rows();
  const Eigen::Index dt = b.triplet.rows();
  b.singlet = hermitian_part(unvectorize(v.head(ds * ds), ds, ds));
  b.triplet = hermitian_part(unvectorize(v.tail(dt * dt), dt, dt));
}

// Raw singlet operators lifted to the stacked space, joint-kernel projected
// and orthonormalized.
std::vector<Vector> joint_conserved(const Matrix& pk, const ConservedOperatorSet& ys,
                                    Eigen::Index singlet_size) {
  std::vector<Vector> basis;
  for (const Matrix& x : ys.raw) {
    if (x.size() != singlet_size) throw Error("purify: conserved operator has wrong dimension");
    Vector lifted = Vector::Zero(pk.cols());
    lifted.head(singlet_size) = vectorize(x);
    Vector v = pk * lifted;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& y : basis) v -= y.dot(v) * y;
    const double norm = v.norm();
    if (norm < kGramSchmidtDropTol) continue;
    basis.push_back(v / norm);
  }
  return basis;
}

Vector project_stacked(const Matrix& pk, const std::vector<Vector>& ys, const Vector& u) {
  Vector out = pk * u;
  for (const Vector& y : ys) out -= y.dot(out) * y;
  return out;
}

}  // namespace

SpinBlock2Rdm hole_from_particle(const SpinBlock2Rdm& d, const Matrix& gamma) {
  d.validate();
  if (gamma.rows() != d.sites || gamma.cols() != d.sites) {
    throw Error("hole_from_particle: 1RDM has wrong dimension");
  }
  const Matrix one = hole_one_body_part(gamma);
  const PairBasis sb(d.sites, PairBlock::singlet);
  const PairBasis tb(d.sites, PairBlock::triplet);
  SpinBlock2Rdm q;
  q.sites = d.sites;
  q.particles = d.particles;
  q.singlet = hermitian_part(2.0 * sb.compress(one) + d.singlet);
  q.triplet = hermitian_part(2.0 * tb.compress(one) + d.triplet);
  return q;
}

SpinBlock2Rdm hole_from_particle(const SpinBlock2Rdm& d) {
  if (d.particles == 0) return hole_from_particle(d, Matrix::Zero(d.sites, d.sites));
  return hole_from_particle(d, contract_2rdm(d).matrix);
}

MVector MVector::from_particle(const SpinBlock2Rdm& d) { return {d, hole_from_particle(d)}; }

SpinBlock2Rdm dq_couple(const SpinBlock2Rdm& d_def, const SpinBlock2Rdm& q_def) {
  require_same_shape(d_def, q_def, "dq_couple");
  SpinBlock2Rdm out = d_def;
  out.singlet = 0.5 * (d_def.singlet + q_def.singlet);
  out.triplet = 0.5 * (d_def.triplet + q_def.triplet);
  return out;
}

// ---------------------------------------------------------------------------

ConservedOperatorSet build_conserved_set(const std::vector<Matrix>& xs,
                                         const Matrix& contraction_map) {
  if (xs.empty()) throw Error("build_conserved_set: no operators given");
  const Eigen::Index dim = xs.front().rows();
  if (contraction_map.cols() != dim * dim) {
    throw Error("build_conserved_set: contraction map does not match block dimension");
  }
  const Matrix pk = kernel_projector(contraction_map);
  ConservedOperatorSet set;
  std::vector<Vector> basis;
  for (const Matrix& x : xs) {
    if (x.rows() != dim || x.cols() != dim) {
      throw Error("build_conserved_set: operators have different dimensions");
    }
    require_hermitian(x, "build_conserved_set");
    set.raw.push_back(x);
    Vector v = pk * vectorize(x);
    // Two passes of modified Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& y : basis) v -= y.dot(v) * y;
    const double norm = v.norm();
    if (norm < kGramSchmidtDropTol) continue;
    v /= norm;
    basis.push_back(v);
    set.ortho.push_back(hermitian_part(unvectorize(v, dim, dim)));
  }
  return set;
}

ConservedOperatorSet hubbard_conserved_set(const HubbardConfig& cfg) {
  const ConservedOperators ops = conserved_ops(cfg);
  return build_conserved_set({ops.interaction, ops.eta},
                             build_contraction_map(cfg.sites, PairBlock::singlet));
}

Matrix project_conserved(const Matrix& m, const ConservedOperatorSet& ys) {
  Matrix out = m;
  for (const Matrix& y : ys.ortho) out -= hs_inner(y, m) * y;
  return out;
}

Matrix appendix_b_update(const Matrix& singlet_def_k, int sites) {
  const PairBasis basis(sites, PairBlock::singlet);
  if (singlet_def_k.rows() != basis.dim()) {
    throw Error("appendix_b_update: wrong singlet dimension");
  }
  const int m = sites;
  auto pi = [m](int i, int j) { return static_cast<Eigen::Index>(i) * m + j; };
  const Matrix full = basis.expand(singlet_def_k);
  Complex diag_sum = 0.0;
  Complex pair_sum = 0.0;
  for (int l = 0; l < m; ++l) diag_sum += full(pi(l, l), pi(l, l));
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) {
      if (k == l) continue;
      const double sign = (k + l) % 2 == 0 ? 1.0 : -1.0;
      pair_sum += sign * full(pi(k, k), pi(l, l));
    }
  const double mm1 = static_cast<double>(m) * (m - 1);
  Matrix out = full;
  for (int i = 0; i < m; ++i) {
    out(pi(i, i), pi(i, i)) -= diag_sum / static_cast<double>(m);
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double sign = (i + j) % 2 == 0 ? 1.0 : -1.0;
      out(pi(i, j), pi(i, j)) += diag_sum / mm1;
      out(pi(i, j), pi(j, i)) += diag_sum / mm1;
      out(pi(i, i), pi(j, j)) -= sign * pair_sum / mm1;
    }
  }
  return basis.compress(out);
}

// ---------------------------------------------------------------------------

double defect(const SpinBlock2Rdm& d, const SpinBlock2Rdm& q) {
  double lowest = 0.0;
  for (const Matrix* block : {&d.singlet, &d.triplet, &q.singlet, &q.triplet}) {
    lowest = std::min(lowest, min_eigenvalue(*block));
  }
  return lowest < 0.0 ? -lowest : 0.0;
}

double defect(const MVector& m) { return defect(m.d, m.q); }

void PurificationConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("PurificationConfig: alpha must be > 0");
  if (k_max < 1) throw Error("PurificationConfig: k_max must be >= 1");
  if (!std::isfinite(defect_tol)) throw Error("PurificationConfig: non-finite defect_tol");
}

double resolve_defect_tol(const PurificationConfig& cfg, int particles) {
  if (cfg.defect_tol > 0.0) return cfg.defect_tol;
  const double trace = static_cast<double>(particles) * (particles - 1);
  return 1e-12 * std::max(1.0, trace);
}

Purifier::Purifier(int sites)
    : sites_(sites),
      kernel_singlet_(kernel_projector(build_contraction_map(sites, PairBlock::singlet))),
      kernel_triplet_(kernel_projector(build_contraction_map(sites, PairBlock::triplet))),
      kernel_joint_(kernel_projector(build_joint_contraction_map(sites))) {}

Matrix build_joint_contraction_map(int sites) {
  const Matrix cs = build_contraction_map(sites, PairBlock::singlet);
  const Matrix ct = build_contraction_map(sites, PairBlock::triplet);
  Matrix map(cs.rows(), cs.cols() + ct.cols());
  map << 0.5 * cs, 1.5 * ct;
  return map;
}

SpinBlock2Rdm Purifier::project_update(const SpinBlock2Rdm& u,
                                       const ConservedOperatorSet& ys) const {
  u.validate();
  if (u.sites != sites_) throw Error("project_update: site count does not match purifier");
  const std::vector<Vector> joint = joint_conserved(kernel_joint_, ys, u.singlet.size());
  SpinBlock2Rdm out = u;
  unstack_blocks(project_stacked(kernel_joint_, joint, stack_blocks(u)), out);
  return out;
}

Matrix Purifier::kernel_project(const Matrix& block, PairBlock b) const {
  const Matrix& pk = kernel_projector_for(b);
  if (block.size() != pk.cols()) throw Error("kernel_project: wrong block dimension");
  return hermitian_part(unvectorize(pk * vectorize(block), block.rows(), block.cols()));
}

PurificationResult Purifier::purify(const MVector& m0, const ConservedOperatorSet& ys,
                                    const PurificationConfig& cfg) const {
  cfg.validate();
  m0.d.validate();
  m0.q.validate();
  require_same_shape(m0.d, m0.q, "purify");
  if (m0.d.sites != sites_) throw Error("purify: site count does not match purifier");
  const double tol = resolve_defect_tol(cfg, m0.d.particles);

  PurificationResult best{m0, {}};
  PurificationReport& report = best.report;
  MVector m = m0;
  double current = defect(m);
  report.defect_initial = current;
  report.per_iteration_defects.push_back(current);
  double best_defect = current;

  const std::vector<Vector> joint = joint_conserved(kernel_joint_, ys, m.d.singlet.size());
  SpinBlock2Rdm update = m.d;
  int k = 0;
  while (current > tol && k < cfg.k_max) {
    for (PairBlock b : {PairBlock::singlet, PairBlock::triplet}) {
      const Matrix d_def = negative_part(m.d.block(b)).defective;
      const Matrix q_def = negative_part(m.q.block(b)).defective;
      update.block(b) = 0.5 * (d_def + q_def);
    }
    unstack_blocks(project_stacked(kernel_joint_, joint, stack_blocks(update)), update);
    for (PairBlock b : {PairBlock::singlet, PairBlock::triplet}) {
      m.d.block(b) = hermitian_part(m.d.block(b) - cfg.alpha * update.block(b));
      m.q.block(b) = hermitian_part(m.q.block(b) - cfg.alpha * update.block(b));
    }
    ++k;
    if (!m.d.singlet.allFinite() || !m.d.triplet.allFinite() || !m.q.singlet.allFinite() ||
        !m.q.triplet.allFinite()) {
      std::ostringstream msg;
      msg << "purify: non-finite entries at iteration " << k;
      throw Error(msg.str());
    }
    current = defect(m);
    report.per_iteration_defects.push_back(current);
    if (current < best_defect) {
      best_defect = current;
      best.m = m;
    }
  }
  report.iterations_used = k;
  report.defect_final = best_defect;
  report.converged = best_defect <= tol;
  return best;
}

}  // namespace td2rdm
