#include "avgflow/metric.hpp"

#include <stdexcept>

namespace avgflow {

double harmonic_metric_apply(const MoleculeGraph& graph,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                             double sigma_t) {
  if (u.size() != graph.n_atoms || v.size() != graph.n_atoms)
    throw std::invalid_argument("harmonic_metric_apply: vector size mismatch");
  double acc = 0.0;
  for (int i = 0; i < graph.n_atoms; ++i) acc += graph.degree[i] * u(i) * v(i);
  for (const Edge& e : graph.edges) acc -= u(e.i) * v(e.j) + u(e.j) * v(e.i);
  return acc / (sigma_t * sigma_t);
}

MetricSpec MetricSpec::euclidean(double s0, double s1) {
  MetricSpec m;
  m.kind = Kind::Euclidean;
  m.sigma0 = s0;
  m.sigma1 = s1;
  return m;
}

MetricSpec MetricSpec::harmonic(const MoleculeGraph& g, double s0, double s1) {
  MetricSpec m;
  m.kind = Kind::Harmonic;
  m.graph = &g;
  m.sigma0 = s0;
  m.sigma1 = s1;
  return m;
}

double MetricSpec::apply(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                         double t) const {
  const double st = sigma(t);
  if (kind == Kind::Euclidean || identity_laplacian) return u.dot(v) / (st * st);
  return harmonic_metric_apply(*graph, u, v, st);
}

Coords MetricSpec::apply_columns(const Coords& x, double t) const {
  const double st = sigma(t);
  const double inv = 1.0 / (st * st);
  if (kind == Kind::Euclidean || identity_laplacian) return x * inv;
  Coords out(x.rows(), 3);
  for (int i = 0; i < x.rows(); ++i)
    out.row(i) = graph->degree[i] * x.row(i);
  for (const Edge& e : graph->edges) {
    out.row(e.i) -= x.row(e.j);
    out.row(e.j) -= x.row(e.i);
  }
  return out * inv;
}

double MetricSpec::inner(const Coords& x, const Coords& y, double t) const {
  const double st = sigma(t);
  if (kind == Kind::Euclidean || identity_laplacian)
    return x.cwiseProduct(y).sum() / (st * st);
  double acc = 0.0;
  for (int i = 0; i < x.rows(); ++i)
    acc += graph->degree[i] * x.row(i).dot(y.row(i));
  for (const Edge& e : graph->edges)
    acc -= x.row(e.i).dot(y.row(e.j)) + x.row(e.j).dot(y.row(e.i));
  return acc / (st * st);
}

void MetricSpec::validate(int n_atoms) const {
  if (sigma0 <= 0.0) throw std::invalid_argument("metric: sigma0 must be positive");
  if (sigma1 < 0.0) throw std::invalid_argument("metric: sigma1 must be nonnegative");
  if (kind == Kind::Harmonic) {
    if (graph == nullptr) throw std::invalid_argument("metric: harmonic needs a graph");
    if (graph->n_atoms != n_atoms)
      throw std::invalid_argument("metric: graph node count mismatch");
  }
}

}  // namespace avgflow
