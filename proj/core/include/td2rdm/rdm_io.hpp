#pragma once

// Text formats.
//
// Spin-block 2RDM:
//   td2rdm-spin-blocks 1
//   sites <M>
//   particles <N>
//   block singlet <dim>
//   <i> <j> <re> <im>        (dim^2 rows, 17 significant digits)
//   block triplet <dim>
//   ...
//
// Trajectory CSV columns:
//   t, n_1..n_M, E_total, E_int, eta, defect_before, defect_after, purif_iters

#include <iosfwd>
#include <string>
#include <vector>

#include "td2rdm/dynamics.hpp"

namespace td2rdm {

void write_spin_blocks(std::ostream& out, const SpinBlock2Rdm& d);
SpinBlock2Rdm read_spin_blocks(std::istream& in);

void save_spin_blocks(const std::string& path, const SpinBlock2Rdm& d);
SpinBlock2Rdm load_spin_blocks(const std::string& path);

std::vector<std::string> trajectory_columns(int sites);
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records,
                          int sites);
std::vector<TrajectoryRecord> read_trajectory_csv(std::istream& in);

struct TrajectoryCheck {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Re-checks the record invariants: finite values, densities summing to N,
/// defect_after <= defect_before whenever purification ran, ascending times.
TrajectoryCheck validate_trajectory(const std::vector<TrajectoryRecord>& records, int particles,
                                    double density_tol = 1e-8);

}  // namespace td2rdm
