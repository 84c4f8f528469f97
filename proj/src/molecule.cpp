#include "avgflow/molecule.hpp"

#include <algorithm>
#include <stdexcept>

namespace avgflow {

namespace {

std::vector<std::vector<int>> adjacency(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(n);
  for (const Edge& e : edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  return adj;
}

std::vector<std::vector<int>> connected_components(int n, const std::vector<Edge>& edges) {
  const auto adj = adjacency(n, edges);
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<int> stack = {s};
    comp[s] = static_cast<int>(comps.size());
    std::vector<int> members;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      members.push_back(v);
      for (int w : adj[v])
        if (comp[w] < 0) {
          comp[w] = comp[s];
          stack.push_back(w);
        }
    }
    std::sort(members.begin(), members.end());
    comps.push_back(std::move(members));
  }
  return comps;
}

}  // namespace

Eigen::MatrixXd laplacian_positional_encoding(int n_atoms,
                                              const std::vector<Edge>& edges,
                                              int width) {
  if (width <= 0) throw std::invalid_argument("laplacian_pe: width must be positive");
  Eigen::MatrixXd pe = Eigen::MatrixXd::Zero(n_atoms, width);

  for (const auto& members : connected_components(n_atoms, edges)) {
    const int m = static_cast<int>(members.size());
    if (m == 1) continue;  // isolated atom: all-zero encoding

    std::vector<int> local(n_atoms, -1);
    for (int k = 0; k < m; ++k) local[members[k]] = k;

    Eigen::VectorXd deg = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(m, m);
    for (const Edge& e : edges) {
      const int a = local[e.i], b = local[e.j];
      if (a < 0 || b < 0) continue;
      adj(a, b) = adj(b, a) = 1.0;
      deg(a) += 1.0;
      deg(b) += 1.0;
    }
    const Eigen::VectorXd dinv = deg.array().sqrt().inverse();
    Eigen::MatrixXd lsym =
        Eigen::MatrixXd::Identity(m, m) -
        dinv.asDiagonal() * adj * dinv.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lsym);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("laplacian_pe: eigendecomposition failed");

    // Skip the trivial constant eigenvector (eigenvalue 0).
    const int avail = std::min(width, m - 1);
    for (int k = 0; k < avail; ++k) {
      Eigen::VectorXd v = es.eigenvectors().col(k + 1);
      for (int r = 0; r < m; ++r) {
        if (std::abs(v(r)) > 1e-8) {
          if (v(r) < 0) v = -v;
          break;
        }
      }
      for (int r = 0; r < m; ++r) pe(members[r], k) = v(r);
    }
  }
  return pe;
}

void validate_graph(const MoleculeGraph& g) {
  if (g.n_atoms <= 0) throw std::invalid_argument("graph: n_atoms must be positive");
  if (static_cast<int>(g.atom_type.size()) != g.n_atoms)
    throw std::invalid_argument("graph: atom_type size mismatch");
  std::vector<int> deg(g.n_atoms, 0);
  for (const Edge& e : g.edges) {
    if (e.i < 0 || e.i >= g.n_atoms || e.j < 0 || e.j >= g.n_atoms)
      throw std::invalid_argument("graph: edge index out of range");
    if (e.i == e.j) throw std::invalid_argument("graph: self-loop");
    ++deg[e.i];
    ++deg[e.j];
  }
  if (g.degree != deg)
    throw std::invalid_argument("graph: degrees inconsistent with edge list");
}

MoleculeGraph make_graph(int n_atoms, std::vector<int> atom_type,
                         std::vector<Edge> edges, int pe_width) {
  MoleculeGraph g;
  g.n_atoms = n_atoms;
  g.atom_type = std::move(atom_type);
  for (Edge& e : edges)
    if (e.i > e.j) std::swap(e.i, e.j);
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  g.edges = std::move(edges);
  g.degree.assign(n_atoms, 0);
  for (const Edge& e : g.edges) {
    ++g.degree[e.i];
    ++g.degree[e.j];
  }
  validate_graph(g);
  g.laplacian_pe = laplacian_positional_encoding(n_atoms, g.edges, pe_width);
  return g;
}

ConformerEnsemble make_ensemble(std::vector<Coords> conformers,
                                Eigen::VectorXd weights) {
  if (conformers.empty())
    throw std::invalid_argument("ensemble: needs at least one conformer");
  const auto n = conformers[0].rows();
  for (Coords& c : conformers) {
    if (c.rows() != n) throw std::invalid_argument("ensemble: atom count mismatch");
    if (!c.allFinite()) throw std::invalid_argument("ensemble: non-finite coordinates");
    // Skip centering when the centroid is already at roundoff level; this
    // keeps load -> save -> load a byte-exact fixed point.
    const double drift = c.colwise().mean().cwiseAbs().maxCoeff();
    if (drift > 1e-13 * (1.0 + c.cwiseAbs().maxCoeff())) center_inplace(c);
  }
  if (weights.size() == 0)
    weights = Eigen::VectorXd::Ones(static_cast<int>(conformers.size()));
  if (weights.size() != static_cast<Eigen::Index>(conformers.size()))
    throw std::invalid_argument("ensemble: weight count mismatch");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("ensemble: negative weight");
  if (!(weights.array() > 0.0).any())
    throw std::invalid_argument("ensemble: all weights zero");
  ConformerEnsemble e;
  e.conformers = std::move(conformers);
  e.weights = std::move(weights);
  return e;
}

ConformerEnsemble single_conformer(const ConformerEnsemble& e, int index) {
  if (index < 0 || index >= e.size())
    throw std::out_of_range("single_conformer: index out of range");
  ConformerEnsemble out;
  out.conformers = {e.conformers[index]};
  out.weights = Eigen::VectorXd::Ones(1);
  return out;
}

}  // namespace avgflow
