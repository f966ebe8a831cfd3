#include "td2rdm/reconstruct.hpp"

#include <array>
#include <cmath>

namespace td2rdm {

namespace {

Eigen::Index pair_index(int a, int b, int r) { return static_cast<Eigen::Index>(a) * r + b; }

int orbitals_of(const Matrix& two_body) {
  const auto r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(two_body.rows()))));
  if (static_cast<Eigen::Index>(r) * r != two_body.rows() || two_body.rows() != two_body.cols()) {
    throw Error("reconstruct: two-body matrix is not over ordered orbital pairs");
  }
  return r;
}

// (1 (x) g) X for a two-body X.
Matrix apply_second_left(const Matrix& g, const Matrix& x, int r) {
  const Eigen::Index r3 = static_cast<Eigen::Index>(r) * r * r;
  Matrix out(x.rows(), x.cols());
  Eigen::Map<Matrix>(out.data(), r, r3).noalias() =
      g * Eigen::Map<const Matrix>(x.data(), r, r3);
  return out;
}

Matrix swap_rows(const Matrix& x, int r) {
  Matrix out(x.rows(), x.cols());
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) out.row(pair_index(a, b, r)) = x.row(pair_index(b, a, r));
  return out;
}

// (g (x) 1) X = Sw (1 (x) g) Sw X
Matrix apply_first_left(const Matrix& g, const Matrix& x, int r) {
  return swap_rows(apply_second_left(g, swap_rows(x, r), r), r);
}

// G(x) = (x (x) 1 + 1 (x) x)(1 - Sw)
Matrix g_map(const Matrix& x, int r) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(r) * r, static_cast<Eigen::Index>(r) * r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int c = 0; c < r; ++c)
        for (int d = 0; d < r; ++d) {
          Complex v = 0.0;
          if (b == d) v += x(a, c);
          if (a == c) v += x(b, d);
          if (b == c) v -= x(a, d);
          if (a == d) v -= x(b, c);
          out(pair_index(a, b, r), pair_index(c, d, r)) = v;
        }
  return out;
}

Matrix partial_trace_two_body(const Matrix& x, int r) {
  Matrix out = Matrix::Zero(r, r);
  for (int a = 0; a < r; ++a)
    for (int c = 0; c < r; ++c)
      for (int e = 0; e < r; ++e) out(a, c) += x(pair_index(a, e, r), pair_index(c, e, r));
  return out;
}

}  // namespace

Matrix wedge_one_body(const Matrix& gamma_so) {
  const auto r = static_cast<int>(gamma_so.rows());
  Matrix out(static_cast<Eigen::Index>(r) * r, static_cast<Eigen::Index>(r) * r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int c = 0; c < r; ++c)
        for (int d = 0; d < r; ++d)
          out(pair_index(a, b, r), pair_index(c, d, r)) =
              gamma_so(a, c) * gamma_so(b, d) - gamma_so(a, d) * gamma_so(b, c);
  return out;
}

Matrix cumulant_delta12_full(const Matrix& gamma_so, const Matrix& d2_full) {
  if (d2_full.rows() != gamma_so.rows() * gamma_so.rows()) {
    throw Error("cumulant_delta12_full: dimension mismatch");
  }
  return d2_full - wedge_one_body(gamma_so);
}

SpinBlock2Rdm cumulant_delta12(const OneRdm& d1, const SpinBlock2Rdm& d12) {
  const int m = d12.sites;
  if (d1.matrix.rows() != m) throw Error("cumulant_delta12: 1RDM dimension mismatch");
  Matrix gg(m * m, m * m);
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2)
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = 0; j2 < m; ++j2)
          gg(pair_index(i1, i2, m), pair_index(j1, j2, m)) = d1.matrix(i1, j1) * d1.matrix(i2, j2);
  SpinBlock2Rdm out = d12;
  out.singlet -= 2.0 * PairBasis(m, PairBlock::singlet).compress(gg);
  out.triplet -= 2.0 * PairBasis(m, PairBlock::triplet).compress(gg);
  return out;
}

Complex valdemoro_element(const Matrix& g, const Matrix& delta, int a, int b, int e, int c, int d,
                          int f) {
  const auto r = static_cast<int>(g.rows());
  const std::array<int, 3> x{a, b, e};
  const std::array<int, 3> y{c, d, f};
  auto gm = [&](int i, int j) { return g(x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]); };
  Complex value = gm(0, 0) * (gm(1, 1) * gm(2, 2) - gm(1, 2) * gm(2, 1)) -
                  gm(0, 1) * (gm(1, 0) * gm(2, 2) - gm(1, 2) * gm(2, 0)) +
                  gm(0, 2) * (gm(1, 0) * gm(2, 1) - gm(1, 1) * gm(2, 0));
  // Remaining pair after dropping position i, original order kept.
  static constexpr std::array<std::array<std::size_t, 2>, 3> rest{{{1, 2}, {0, 2}, {0, 1}}};
  for (std::size_t i = 0; i < 3; ++i) {
    const Eigen::Index row = pair_index(x[rest[i][0]], x[rest[i][1]], r);
    for (std::size_t j = 0; j < 3; ++j) {
      const Eigen::Index col = pair_index(y[rest[j][0]], y[rest[j][1]], r);
      const double sign = (i + j) % 2 == 0 ? 1.0 : -1.0;
      value += sign * delta(row, col) * g(x[i], y[j]);
    }
  }
  return value;
}

ThreeRdm valdemoro_d123(const Matrix& gamma_so, const Matrix& delta_full) {
  const auto r = static_cast<int>(gamma_so.rows());
  if (orbitals_of(delta_full) != r) throw Error("valdemoro_d123: dimension mismatch");
  ThreeRdm out{r, Matrix(static_cast<Eigen::Index>(r) * r * r, static_cast<Eigen::Index>(r) * r * r)};
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int e = 0; e < r; ++e)
        for (int c = 0; c < r; ++c)
          for (int d = 0; d < r; ++d)
            for (int f = 0; f < r; ++f)
              out.data(out.index(a, b, e), out.index(c, d, f)) =
                  valdemoro_element(gamma_so, delta_full, a, b, e, c, d, f);
  return out;
}

ThreeRdm valdemoro_d123(const OneRdm& d1, const SpinBlock2Rdm& d12) {
  const Matrix g = spinorbital_one_rdm(d1.matrix);
  return valdemoro_d123(g, cumulant_delta12_full(g, spinorbital_from_spin_blocks(d12)));
}

Matrix valdemoro_partial_trace(const Matrix& g, const Matrix& delta) {
  const auto r = static_cast<int>(g.rows());
  if (orbitals_of(delta) != r) throw Error("valdemoro_partial_trace: dimension mismatch");
  const Complex n = g.trace();
  const Matrix g2 = g * g;
  const Matrix d1 = partial_trace_two_body(delta, r);

  Matrix out = n * (wedge_one_body(g) + delta);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int c = 0; c < r; ++c)
        for (int d = 0; d < r; ++d) {
          out(pair_index(a, b, r), pair_index(c, d, r)) +=
              -g(a, c) * g2(b, d) + g(a, d) * g2(b, c) + g(b, c) * g2(a, d) - g(b, d) * g2(a, c) +
              g(a, c) * d1(b, d) - g(a, d) * d1(b, c) - g(b, c) * d1(a, d) + g(b, d) * d1(a, c);
        }
  // (g (x) 1 + 1 (x) g) Delta + Delta (g (x) 1 + 1 (x) g); right products via transposes.
  const Matrix gt = g.transpose();
  const Matrix dt = delta.transpose();
  out -= apply_first_left(g, delta, r) + apply_second_left(g, delta, r);
  out -= (apply_first_left(gt, dt, r) + apply_second_left(gt, dt, r)).transpose();
  return out;
}

Matrix partial_trace_3(const ThreeRdm& x) {
  const int r = x.orbitals;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(r) * r, static_cast<Eigen::Index>(r) * r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int c = 0; c < r; ++c)
        for (int d = 0; d < r; ++d) {
          Complex s = 0.0;
          for (int e = 0; e < r; ++e) s += x(a, b, e, c, d, e);
          out(pair_index(a, b, r), pair_index(c, d, r)) = s;
        }
  return out;
}

Complex lift_element(const Matrix& z, int r, int a, int b, int e, int c, int d, int f) {
  auto zz = [&](int p, int q, int s, int t) { return z(pair_index(p, q, r), pair_index(s, t, r)); };
  Complex v = 0.0;
  if (e == f) v += zz(a, b, c, d);
  if (a == f) v -= zz(e, b, c, d);
  if (b == f) v -= zz(a, e, c, d);
  if (e == c) v -= zz(a, b, f, d);
  if (e == d) v -= zz(a, b, c, f);
  if (a == c) v += zz(e, b, f, d);
  if (a == d) v += zz(e, b, c, f);
  if (b == c) v += zz(a, e, f, d);
  if (b == d) v += zz(a, e, c, f);
  return v / 9.0;
}

ThreeRdm lift_two_body(const Matrix& z, int r) {
  if (orbitals_of(z) != r) throw Error("lift_two_body: dimension mismatch");
  ThreeRdm out{r, Matrix(static_cast<Eigen::Index>(r) * r * r, static_cast<Eigen::Index>(r) * r * r)};
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b)
      for (int e = 0; e < r; ++e)
        for (int c = 0; c < r; ++c)
          for (int d = 0; d < r; ++d)
            for (int f = 0; f < r; ++f)
              out.data(out.index(a, b, e), out.index(c, d, f)) = lift_element(z, r, a, b, e, c, d, f);
  return out;
}

Matrix tr3_lift(const Matrix& z, int r) {
  return ((r - 4.0) * z + g_map(partial_trace_two_body(z, r), r)) / 9.0;
}

Matrix lift_coefficients(const Matrix& delta, int r) {
  if (r < 4) throw Error("lift_coefficients: need at least four orbitals");
  if (orbitals_of(delta) != r) throw Error("lift_coefficients: dimension mismatch");
  // Split into contraction-free, one-body and trace parts; T T^dagger acts on
  // them as (r-4)/9, 2(r-3)/9 and (r-2)/3.
  const Matrix x = partial_trace_two_body(delta, r);
  const Complex t = x.trace();
  const Matrix trace_part = g_map(Matrix::Identity(r, r), r) * (t / (2.0 * r * (r - 1)));
  const Matrix traceless = (x - (t / static_cast<double>(r)) * Matrix::Identity(r, r)) / (r - 2.0);
  const Matrix one_body_part = g_map(traceless, r);
  const Matrix free_part = delta - one_body_part - trace_part;

  Matrix z = one_body_part * (9.0 / (2.0 * (r - 3))) + trace_part * (3.0 / (r - 2.0));
  if (r > 4) z += free_part * (9.0 / (r - 4.0));
  return z;
}

ThreeRdm fix_contraction_d123(const ThreeRdm& raw, const Matrix& d2_full, int particles) {
  const int r = raw.orbitals;
  const Matrix delta = static_cast<double>(particles - 2) * d2_full - partial_trace_3(raw);
  ThreeRdm out = raw;
  out.data += lift_two_body(lift_coefficients(delta, r), r).data;
  return out;
}

Matrix collision_from_three_rdm(const ThreeRdm& d3, int sites, double interaction) {
  const int m = sites;
  if (d3.orbitals != 2 * m) throw Error("collision_from_three_rdm: orbital count mismatch");
  Matrix c = Matrix::Zero(m * m, m * m);
  if (interaction == 0.0) return c;
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2)
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = 0; j2 < m; ++j2) {
          const int a = spin_orbital(i1, 0, m), b = spin_orbital(i2, 1, m);
          const int cc = spin_orbital(j1, 0, m), d = spin_orbital(j2, 1, m);
          const int abar = spin_orbital(i1, 1, m), bbar = spin_orbital(i2, 0, m);
          const int cbar = spin_orbital(j1, 1, m), dbar = spin_orbital(j2, 0, m);
          c(pair_index(i1, i2, m), pair_index(j1, j2, m)) =
              interaction * (d3(a, b, abar, cc, d, abar) + d3(a, b, bbar, cc, d, bbar) -
                             d3(a, b, cbar, cc, d, cbar) - d3(a, b, dbar, cc, d, dbar));
        }
  return c;
}

// ---------------------------------------------------------------------------

CollisionEvaluator::CollisionEvaluator(int sites) : sites_(sites) {
  if (sites < 2) throw Error("CollisionEvaluator: need at least two sites");
}

ThreeRdm CollisionEvaluator::reconstructed(const SpinBlock2Rdm& d) const {
  const Matrix d2 = spinorbital_from_spin_blocks(d);
  const Matrix g = spinorbital_one_rdm(contract_2rdm(d).matrix);
  const ThreeRdm raw = valdemoro_d123(g, cumulant_delta12_full(g, d2));
  return fix_contraction_d123(raw, d2, d.particles);
}

Matrix CollisionEvaluator::operator()(const SpinBlock2Rdm& d, double interaction) const {
  const int m = sites_;
  const int r = 2 * m;
  if (d.sites != m) throw Error("CollisionEvaluator: site count mismatch");
  Matrix c = Matrix::Zero(m * m, m * m);
  if (interaction == 0.0) return c;

  const Matrix d2 = spinorbital_from_spin_blocks(d);
  const Matrix g = spinorbital_one_rdm(contract_2rdm(d).matrix);
  const Matrix delta = cumulant_delta12_full(g, d2);
  const Matrix mismatch =
      static_cast<double>(d.particles - 2) * d2 - valdemoro_partial_trace(g, delta);
  const Matrix z = lift_coefficients(mismatch, r);

  auto element = [&](int a, int b, int e, int cc, int dd, int f) {
    return valdemoro_element(g, delta, a, b, e, cc, dd, f) + lift_element(z, r, a, b, e, cc, dd, f);
  };
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2)
      for (int j1 = 0; j1 < m; ++j1)
        for (int j2 = 0; j2 < m; ++j2) {
          const int a = spin_orbital(i1, 0, m), b = spin_orbital(i2, 1, m);
          const int cc = spin_orbital(j1, 0, m), dd = spin_orbital(j2, 1, m);
          const int abar = spin_orbital(i1, 1, m), bbar = spin_orbital(i2, 0, m);
          const int cbar = spin_orbital(j1, 1, m), dbar = spin_orbital(j2, 0, m);
          c(pair_index(i1, i2, m), pair_index(j1, j2, m)) =
              interaction * (element(a, b, abar, cc, dd, abar) + element(a, b, bbar, cc, dd, bbar) -
                             element(a, b, cbar, cc, dd, cbar) - element(a, b, dbar, cc, dd, dbar));
        }
  return c;
}

}  // namespace td2rdm
