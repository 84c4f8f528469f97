#include "avgflow/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "avgflow/interpolants.hpp"

namespace avgflow {

double rmsd_kabsch(const Coords& a, const Coords& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("rmsd: atom count mismatch");
  const Coords ac = centered(a);
  const Coords bc = centered(b);
  Coords aligned;
  try {
    const so3::Mat3 r = kabsch_rotation(ac, bc);
    aligned = bc * r.transpose();
  } catch (const std::runtime_error&) {
    aligned = bc;  // rank-deficient covariance: fall back to unrotated
  }
  return std::sqrt((ac - aligned).squaredNorm() / static_cast<double>(a.rows()));
}

Eigen::MatrixXd rmsd_matrix_serial(std::span<const Coords> generated,
                                   std::span<const Coords> truth) {
  Eigen::MatrixXd m(generated.size(), truth.size());
  for (std::size_t i = 0; i < generated.size(); ++i)
    for (std::size_t j = 0; j < truth.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rmsd_kabsch(generated[i], truth[j]);
  return m;
}

Eigen::MatrixXd rmsd_matrix(std::span<const Coords> generated,
                            std::span<const Coords> truth) {
  if (!generated.empty()) {
    const auto n = generated[0].rows();
    for (const Coords& c : generated)
      if (c.rows() != n) throw std::invalid_argument("rmsd_matrix: atom count mismatch");
    for (const Coords& c : truth)
      if (c.rows() != n) throw std::invalid_argument("rmsd_matrix: atom count mismatch");
  }
  Eigen::MatrixXd m(generated.size(), truth.size());
  const auto total = static_cast<std::int64_t>(generated.size() * truth.size());
  const auto cols = static_cast<std::int64_t>(truth.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t idx = 0; idx < total; ++idx)
    m(idx / cols, idx % cols) = rmsd_kabsch(generated[idx / cols], truth[idx % cols]);
  return m;
}

MetricReport coverage_amr(std::span<const Coords> generated,
                          std::span<const Coords> truth, double delta) {
  if (generated.empty() || truth.empty())
    throw std::invalid_argument("coverage_amr: empty conformer list");
  const Eigen::MatrixXd m = rmsd_matrix(generated, truth);

  MetricReport rep;
  rep.delta = delta;
  rep.k = static_cast<int>(generated.size());
  rep.l = static_cast<int>(truth.size());

  int hit_p = 0;
  double amr_p = 0.0;
  for (int i = 0; i < rep.k; ++i) {
    const double best = m.row(i).minCoeff();
    if (best < delta) ++hit_p;
    amr_p += best;
  }
  int hit_r = 0;
  double amr_r = 0.0;
  for (int j = 0; j < rep.l; ++j) {
    const double best = m.col(j).minCoeff();
    if (best < delta) ++hit_r;
    amr_r += best;
  }
  rep.cov_p = 100.0 * hit_p / rep.k;
  rep.amr_p = amr_p / rep.k;
  rep.cov_r = 100.0 * hit_r / rep.l;
  rep.amr_r = amr_r / rep.l;
  return rep;
}

std::string report_table(const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-10s %8s %8s %8s %8s %6s %6s %7s\n"
                "%-10s %8.2f %8.2f %8.4f %8.4f %6d %6d %7.3f\n",
                "", "COV-R%", "COV-P%", "AMR-R", "AMR-P", "K", "L", "delta",
                "metrics", r.cov_r, r.cov_p, r.amr_r, r.amr_p, r.k, r.l, r.delta);
  return buf;
}

}  // namespace avgflow
