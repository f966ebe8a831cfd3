#include "td2rdm/generic_purifier.hpp"

#include <algorithm>
#include <sstream>

namespace td2rdm {

BlockLayout::BlockLayout(int sites_)
    : sites(sites_), singlet_dim(td2rdm::singlet_dim(sites_)),
      triplet_dim(td2rdm::triplet_dim(sites_)) {}

Vector BlockLayout::stack(const SpinBlock2Rdm& d) const {
  if (d.singlet.rows() != singlet_dim || d.triplet.rows() != triplet_dim) {
    throw Error("BlockLayout::stack: block dimensions do not match layout");
  }
  Vector x(size());
  const Eigen::Index ns = singlet_dim * singlet_dim;
  x.head(ns) = vectorize(d.singlet);
  x.tail(size() - ns) = vectorize(d.triplet);
  return x;
}

SpinBlock2Rdm BlockLayout::unstack(const Vector& x, int particles) const {
  if (x.size() != size()) throw Error("BlockLayout::unstack: wrong vector length");
  const Eigen::Index ns = singlet_dim * singlet_dim;
  SpinBlock2Rdm d;
  d.sites = sites;
  d.particles = particles;
  d.singlet = unvectorize(x.head(ns), singlet_dim, singlet_dim);
  d.triplet = unvectorize(x.tail(size() - ns), triplet_dim, triplet_dim);
  return d;
}

std::vector<AffineConstraint> q_condition_constraints(const SpinBlock2Rdm& d) {
  const BlockLayout layout(d.sites);
  const SpinBlock2Rdm q = hole_from_particle(d);
  const Eigen::Index ns = layout.singlet_dim * layout.singlet_dim;
  const Eigen::Index nt = layout.triplet_dim * layout.triplet_dim;

  AffineConstraint singlet{q.singlet - d.singlet, Matrix::Zero(ns, layout.size()), "Q singlet"};
  singlet.map.leftCols(ns).setIdentity();
  AffineConstraint triplet{q.triplet - d.triplet, Matrix::Zero(nt, layout.size()), "Q triplet"};
  triplet.map.rightCols(nt).setIdentity();
  return {singlet, triplet};
}

namespace {

Matrix stacked_maps(const std::vector<AffineConstraint>& constraints, Eigen::Index dim) {
  Eigen::Index rows = 0;
  for (const auto& c : constraints) {
    const Eigen::Index k = c.offset.rows();
    if (c.offset.cols() != k || c.map.rows() != k * k || c.map.cols() != dim) {
      throw Error("constraint '" + c.name + "' has inconsistent shape");
    }
    rows += k * k;
  }
  Matrix l(rows, dim);
  Eigen::Index row = 0;
  for (const auto& c : constraints) {
    l.middleRows(row, c.map.rows()) = c.map;
    row += c.map.rows();
  }
  return l;
}

// Orthonormal basis of the directions an update must not have.
Matrix forbidden_directions(const BlockLayout& layout, const ConservedOperatorSet& ys,
                            bool preserve_contraction) {
  const Eigen::Index ns = layout.singlet_dim * layout.singlet_dim;
  std::vector<Vector> cols;
  auto row_space = [&](const Matrix& a, Eigen::Index offset) {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinV);
    const RealVector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return;
    const double tol = sv(0) * 1e-12;
    for (Eigen::Index i = 0; i < sv.size() && sv(i) > tol; ++i) {
      Vector v = Vector::Zero(layout.size());
      v.segment(offset, a.cols()) = svd.matrixV().col(i);
      cols.push_back(v);
    }
  };
  if (preserve_contraction) row_space(build_joint_contraction_map(layout.sites), 0);
  for (const Matrix& y : ys.raw) {
    if (y.rows() != layout.singlet_dim) throw Error("generic_purify: Y operator has wrong dimension");
    Vector v = Vector::Zero(layout.size());
    v.head(ns) = vectorize(y);
    cols.push_back(v);
  }
  if (cols.empty()) return Matrix(layout.size(), 0);
  Matrix g(layout.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) g.col(static_cast<Eigen::Index>(i)) = cols[i];
  Eigen::BDCSVD<Matrix> svd(g, Eigen::ComputeThinU);
  const RealVector& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > sv(0) * 1e-10) ++rank;
  return svd.matrixU().leftCols(rank);
}

double defect_of(const SpinBlock2Rdm& d, const std::vector<Matrix>& ms) {
  double lowest = std::min({0.0, min_eigenvalue(d.singlet), min_eigenvalue(d.triplet)});
  for (const Matrix& m : ms) lowest = std::min(lowest, min_eigenvalue(m));
  return lowest < 0.0 ? -lowest : 0.0;
}

}  // namespace

Matrix assemble_projector(const std::vector<AffineConstraint>& constraints, Eigen::Index dim) {
  const Matrix l = stacked_maps(constraints, dim);
  const Matrix c = Matrix::Identity(dim, dim) + l.adjoint() * l;
  Matrix top(dim + l.rows(), dim);
  top.topRows(dim).setIdentity();
  top.bottomRows(l.rows()) = l;
  const Matrix cinv_top = c.ldlt().solve(top.adjoint());
  return top * cinv_top;
}

GenericPurificationResult generic_purify(const SpinBlock2Rdm& d0,
                                         const std::vector<AffineConstraint>& constraints,
                                         const ConservedOperatorSet& ys,
                                         const PurificationConfig& cfg,
                                         const GenericPurifyOptions& opts) {
  cfg.validate();
  d0.validate();
  const BlockLayout layout(d0.sites);
  const Eigen::Index n = layout.size();
  const Matrix l = stacked_maps(constraints, n);
  const auto c_ldlt = (Matrix::Identity(n, n) + l.adjoint() * l).ldlt();
  const Matrix forbidden = forbidden_directions(layout, ys, opts.preserve_contraction);
  const double tol = resolve_defect_tol(cfg, d0.particles);

  Vector x = layout.stack(d0);
  auto constraint_values = [&](const Vector& xv) {
    std::vector<Matrix> ms;
    ms.reserve(constraints.size());
    for (const auto& c : constraints) {
      const Eigen::Index k = c.offset.rows();
      ms.push_back(hermitian_part(c.offset + unvectorize(c.map * xv, k, k)));
    }
    return ms;
  };

  GenericPurificationResult best{d0, {}};
  PurificationReport& report = best.report;
  SpinBlock2Rdm d = d0;
  std::vector<Matrix> ms = constraint_values(x);
  double current = defect_of(d, ms);
  report.defect_initial = current;
  report.per_iteration_defects.push_back(current);
  double best_defect = current;

  int k = 0;
  while (current > tol && k < cfg.k_max) {
    SpinBlock2Rdm d_def = d;
    d_def.singlet = negative_part(d.singlet).defective;
    d_def.triplet = negative_part(d.triplet).defective;
    Vector z = layout.stack(d_def);
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const Matrix m_def = negative_part(ms[i]).defective;
      z.noalias() += constraints[i].map.adjoint() * vectorize(m_def);
    }
    z = c_ldlt.solve(z);
    if (forbidden.cols() > 0) z -= forbidden * (forbidden.adjoint() * z);
    x -= cfg.alpha * z;

    d = layout.unstack(x, d0.particles);
    d.symmetrize();
    x = layout.stack(d);
    ++k;
    if (!x.allFinite()) {
      std::ostringstream msg;
      msg << "generic_purify: non-finite entries at iteration " << k;
      throw Error(msg.str());
    }
    ms = constraint_values(x);
    current = defect_of(d, ms);
    report.per_iteration_defects.push_back(current);
    if (current < best_defect) {
      best_defect = current;
      best.d = d;
    }
  }
  report.iterations_used = k;
  report.defect_final = best_defect;
  report.converged = best_defect <= tol;
  return best;
}

}  // namespace td2rdm
