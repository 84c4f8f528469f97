#ifndef AVGFLOW_METRIC_HPP
#define AVGFLOW_METRIC_HPP

#include <Eigen/Dense>

#include "avgflow/molecule.hpp"

namespace avgflow {

// Graph-Laplacian bilinear form on per-atom scalars:
//   sum_i deg_i u_i v_i - sum_{(i,j) in E} (u_i v_j + u_j v_i), over sigma_t^2.
// Symmetric positive-semidefinite; zero on constant vectors.
double harmonic_metric_apply(const MoleculeGraph& graph,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                             double sigma_t);

// Selects the bilinear form Sigma applied column-wise to coordinates, plus the
// noise schedule sigma_t = (1 - t) sigma0 + t sigma1.
struct MetricSpec {
  enum class Kind { Euclidean, Harmonic };

  Kind kind = Kind::Euclidean;
  const MoleculeGraph* graph = nullptr;  // required for Harmonic
  double sigma0 = 1.0;
  double sigma1 = 0.0;
  // Test hook: run the harmonic code path with the Laplacian replaced by the
  // identity form.
  bool identity_laplacian = false;

  static MetricSpec euclidean(double s0 = 1.0, double s1 = 0.0);
  static MetricSpec harmonic(const MoleculeGraph& g, double s0 = 1.0, double s1 = 0.0);

  double sigma(double t) const { return (1.0 - t) * sigma0 + t * sigma1; }

  // <u, Sigma v> / sigma_t^2 for per-atom scalar vectors.
  double apply(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double t) const;

  // Sigma x / sigma_t^2 applied to each coordinate column.
  Coords apply_columns(const Coords& x, double t) const;

  // tr(x^T Sigma y) / sigma_t^2.
  double inner(const Coords& x, const Coords& y, double t) const;

  void validate(int n_atoms) const;
};

}  // namespace avgflow

#endif
