#include "avgflow/interpolants.hpp"

#include <stdexcept>

#include "avgflow/rng.hpp"
#include "avgflow/sampling.hpp"

namespace avgflow {

Coords linear_interpolant(const Coords& x0, const Coords& x1, double t) {
  if (x0.rows() != x1.rows())
    throw std::invalid_argument("linear_interpolant: shape mismatch");
  if (t < 0.0 || t > 1.0)
    throw std::invalid_argument("linear_interpolant: t must be in [0, 1]");
  return (1.0 - t) * x0 + t * x1;
}

Coords integration_interpolant(const Coords& x0, const ConformerEnsemble& ensemble,
                               const MetricSpec& metric, double t, int steps,
                               int quad_nodes) {
  if (t < 0.0 || t >= 1.0)
    throw std::invalid_argument("integration_interpolant: t must be in [0, 1)");
  if (steps < 1)
    throw std::invalid_argument("integration_interpolant: steps must be >= 1");
  if (t == 0.0) return x0;
  OracleField field(ensemble, metric, quad_nodes);
  return euler_steps(field, x0, 0.0, t, steps);
}

so3::Mat3 kabsch_rotation(const Coords& p, const Coords& q) {
  if (p.rows() != q.rows()) throw std::invalid_argument("kabsch: shape mismatch");
  if (p.rows() < 1) throw std::invalid_argument("kabsch: empty input");
  const so3::Mat3 h = p.transpose() * q;
  Eigen::JacobiSVD<so3::Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  const double scale = std::max(sv(0), 1.0);
  if (sv(1) <= 1e-12 * scale)
    throw std::runtime_error("kabsch: covariance rank < 2");
  const double d =
      ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) ? -1.0 : 1.0;
  return svd.matrixU() * Eigen::Vector3d(1.0, 1.0, d).asDiagonal() *
         svd.matrixV().transpose();
}

BaselineTarget baseline_target(BaselineKind kind, const Coords& x0, const Coords& x1) {
  if (x0.rows() != x1.rows())
    throw std::invalid_argument("baseline_target: shape mismatch");
  BaselineTarget out;
  if (kind == BaselineKind::KabschOT) {
    const so3::Mat3 r = kabsch_rotation(x0, x1);
    out.x1 = x1 * r.transpose();
  } else {
    out.x1 = x1;
  }
  out.velocity = out.x1 - x0;
  return out;
}

Coords sample_prior(int n_atoms, Rng& rng) {
  if (n_atoms < 1) throw std::invalid_argument("sample_prior: n_atoms must be >= 1");
  Coords x = rng.normal_coords(n_atoms);
  center_inplace(x);
  return x;
}

Coords sample_prior(int n_atoms, std::uint64_t seed) {
  Rng rng(seed, "prior");
  return sample_prior(n_atoms, rng);
}

}  // namespace avgflow
