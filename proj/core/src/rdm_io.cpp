#include "td2rdm/rdm_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace td2rdm {

namespace {

constexpr const char* kMagic = "td2rdm-spin-blocks";

void write_block(std::ostream& out, const char* name, const Matrix& m) {
  out << "block " << name << ' ' << m.rows() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << i << ' ' << j << ' ' << m(i, j).real() << ' ' << m(i, j).imag() << '\n';
}

[[noreturn]] void parse_error(int line, const std::string& what) {
  std::ostringstream msg;
  msg << "spin-block file, line " << line << ": " << what;
  throw Error(msg.str());
}

struct LineReader {
  std::istream& in;
  int line = 0;

  bool next(std::istringstream& fields) {
    std::string text;
    while (std::getline(in, text)) {
      ++line;
      if (text.empty() || text[0] == '#') continue;
      fields = std::istringstream(text);
      return true;
    }
    return false;
  }
};

Matrix read_block(LineReader& reader, const std::string& expected_name, Eigen::Index expected_dim) {
  std::istringstream fields;
  if (!reader.next(fields)) parse_error(reader.line, "missing block header '" + expected_name + "'");
  std::string keyword, name;
  Eigen::Index dim = -1;
  if (!(fields >> keyword >> name >> dim) || keyword != "block") {
    parse_error(reader.line, "expected 'block <name> <dim>'");
  }
  if (name != expected_name) parse_error(reader.line, "expected block '" + expected_name + "'");
  if (dim != expected_dim) parse_error(reader.line, "block dimension does not match site count");
  Matrix m(dim, dim);
  std::vector<bool> seen(static_cast<std::size_t>(dim * dim), false);
  for (Eigen::Index k = 0; k < dim * dim; ++k) {
    if (!reader.next(fields)) parse_error(reader.line, "truncated block '" + name + "'");
    Eigen::Index i = -1, j = -1;
    double re = 0.0, im = 0.0;
    if (!(fields >> i >> j >> re >> im)) parse_error(reader.line, "expected 'i j re im'");
    if (i < 0 || j < 0 || i >= dim || j >= dim) parse_error(reader.line, "index out of range");
    const auto flat = static_cast<std::size_t>(i * dim + j);
    if (seen[flat]) parse_error(reader.line, "duplicate entry");
    seen[flat] = true;
    m(i, j) = Complex(re, im);
  }
  return m;
}

double field_to_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << "trajectory CSV, line " << line << ": cannot parse '" << s << "'";
    throw Error(msg.str());
  }
}

}  // namespace

void write_spin_blocks(std::ostream& out, const SpinBlock2Rdm& d) {
  d.validate();
  const auto old_precision = out.precision(17);
  out << kMagic << " 1\n";
  out << "sites " << d.sites << '\n';
  out << "particles " << d.particles << '\n';
  write_block(out, "singlet", d.singlet);
  write_block(out, "triplet", d.triplet);
  out.precision(old_precision);
}

SpinBlock2Rdm read_spin_blocks(std::istream& in) {
  LineReader reader{in};
  std::istringstream fields;
  std::string word;
  int version = 0;
  if (!reader.next(fields) || !(fields >> word >> version) || word != kMagic || version != 1) {
    parse_error(reader.line, "not a spin-block 2RDM file");
  }
  SpinBlock2Rdm d;
  if (!reader.next(fields) || !(fields >> word >> d.sites) || word != "sites" || d.sites < 2) {
    parse_error(reader.line, "expected 'sites <M>' with M >= 2");
  }
  if (!reader.next(fields) || !(fields >> word >> d.particles) || word != "particles" ||
      d.particles < 0) {
    parse_error(reader.line, "expected 'particles <N>'");
  }
  d.singlet = read_block(reader, "singlet", singlet_dim(d.sites));
  d.triplet = read_block(reader, "triplet", triplet_dim(d.sites));
  d.validate();
  return d;
}

void save_spin_blocks(const std::string& path, const SpinBlock2Rdm& d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_spin_blocks(out, d);
  if (!out) throw Error("write to '" + path + "' failed");
}

SpinBlock2Rdm load_spin_blocks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_spin_blocks(in);
}

// ---------------------------------------------------------------------------

std::vector<std::string> trajectory_columns(int sites) {
  std::vector<std::string> cols{"t"};
  for (int i = 1; i <= sites; ++i) cols.push_back("n_" + std::to_string(i));
  for (const char* c : {"E_total", "E_int", "eta", "defect_before", "defect_after", "purif_iters"})
    cols.emplace_back(c);
  return cols;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records,
                          int sites) {
  const auto cols = trajectory_columns(sites);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& r : records) {
    if (static_cast<int>(r.site_densities.size()) != sites) {
      throw Error("write_trajectory_csv: record has wrong number of site densities");
    }
    out << r.t;
    for (double n : r.site_densities) out << ',' << n;
    out << ',' << r.total_energy << ',' << r.interaction_energy << ',' << r.eta << ','
        << r.defect_before << ',' << r.defect_after << ',' << r.purification_iterations << '\n';
  }
  out.precision(old_precision);
}

std::vector<TrajectoryRecord> read_trajectory_csv(std::istream& in) {
  std::string text;
  if (!std::getline(in, text)) throw Error("trajectory CSV: empty input");
  std::vector<std::string> header;
  {
    std::istringstream hs(text);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  const int sites = static_cast<int>(header.size()) - 7;
  if (sites < 1 || header != trajectory_columns(sites)) {
    throw Error("trajectory CSV: unexpected header");
  }
  std::vector<TrajectoryRecord> records;
  int line = 1;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    std::vector<double> v;
    std::istringstream ls(text);
    std::string cell;
    while (std::getline(ls, cell, ',')) v.push_back(field_to_double(cell, line));
    if (v.size() != header.size()) {
      std::ostringstream msg;
      msg << "trajectory CSV, line " << line << ": expected " << header.size() << " fields";
      throw Error(msg.str());
    }
    TrajectoryRecord r;
    r.t = v[0];
    r.site_densities.assign(v.begin() + 1, v.begin() + 1 + sites);
    const std::size_t k = 1 + static_cast<std::size_t>(sites);
    r.total_energy = v[k];
    r.interaction_energy = v[k + 1];
    r.eta = v[k + 2];
    r.defect_before = v[k + 3];
    r.defect_after = v[k + 4];
    r.purification_iterations = static_cast<int>(v[k + 5]);
    records.push_back(std::move(r));
  }
  return records;
}

TrajectoryCheck validate_trajectory(const std::vector<TrajectoryRecord>& records, int particles,
                                    double density_tol) {
  TrajectoryCheck check;
  auto fail = [&](std::size_t row, const std::string& what) {
    std::ostringstream msg;
    msg << "row " << row << ": " << what;
    check.problems.push_back(msg.str());
    check.ok = false;
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    double sum = 0.0;
    bool finite = std::isfinite(r.t) && std::isfinite(r.total_energy) &&
                  std::isfinite(r.interaction_energy) && std::isfinite(r.eta) &&
                  std::isfinite(r.defect_before) && std::isfinite(r.defect_after);
    for (double n : r.site_densities) {
      finite = finite && std::isfinite(n);
      sum += n;
    }
    if (!finite) fail(i, "non-finite value");
    if (std::abs(sum - particles) > density_tol * std::max(1, particles)) {
      fail(i, "site densities do not sum to N");
    }
    if (r.defect_before < 0.0 || r.defect_after < 0.0) fail(i, "negative defect");
    if (r.purification_iterations > 0 && r.defect_after > r.defect_before) {
      fail(i, "defect grew during purification");
    }
    if (r.purification_iterations < 0) fail(i, "negative iteration count");
    if (i > 0 && !(r.t > records[i - 1].t)) fail(i, "times not ascending");
  }
  return check;
}

}  // namespace td2rdm
