#ifndef AVGFLOW_EVALUATION_HPP
#define AVGFLOW_EVALUATION_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/molecule.hpp"

namespace avgflow {

// RMSD after centering both structures and optimally rotating B onto A.
double rmsd_kabsch(const Coords& a, const Coords& b);

// Coverage thresholds from the reference evaluation protocol.
inline constexpr double kDeltaDrugs = 0.75;
inline constexpr double kDeltaQm9 = 0.5;

struct MetricReport {
  double cov_r = 0.0;  // percent
  double cov_p = 0.0;  // percent
  double amr_r = 0.0;
  double amr_p = 0.0;
  double delta = kDeltaDrugs;
  int k = 0;  // generated count
  int l = 0;  // ground-truth count
};

// Precision scans generated -> truth; recall swaps the roles. Coverage counts
// minima strictly below delta.
MetricReport coverage_amr(std::span<const Coords> generated,
                          std::span<const Coords> truth, double delta);

// K x L matrix of pairwise Kabsch RMSDs; parallel version is bit-identical to
// the serial reference.
Eigen::MatrixXd rmsd_matrix_serial(std::span<const Coords> generated,
                                   std::span<const Coords> truth);
Eigen::MatrixXd rmsd_matrix(std::span<const Coords> generated,
                            std::span<const Coords> truth);

std::string report_table(const MetricReport& r);

}  // namespace avgflow

#endif
