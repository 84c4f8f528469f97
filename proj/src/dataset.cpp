#include "avgflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "avgflow/evaluation.hpp"
#include "avgflow/rng.hpp"

namespace avgflow {

namespace {

using nlohmann::ordered_json;

double rest_length(BondType t) {
  switch (t) {
    case BondType::Single: return 1.5;
    case BondType::Double: return 1.34;
    case BondType::Triple: return 1.2;
    case BondType::Aromatic: return 1.4;
    default: return 1.5;
  }
}

// Gradient-descent relaxation: bond springs toward rest lengths plus a soft
// repulsion keeping non-bonded pairs apart.
void relax(Coords& x, const std::vector<Edge>& edges, int iters) {
  const int n = static_cast<int>(x.rows());
  const double lr = 0.05;
  for (int it = 0; it < iters; ++it) {
    Coords g = Coords::Zero(n, 3);
    for (const Edge& e : edges) {
      const Eigen::RowVector3d d = x.row(e.i) - x.row(e.j);
      const double len = std::max(d.norm(), 1e-9);
      const double f = 2.0 * (len - rest_length(e.type)) / len;
      g.row(e.i) += f * d;
      g.row(e.j) -= f * d;
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const Eigen::RowVector3d d = x.row(i) - x.row(j);
        const double len = std::max(d.norm(), 1e-9);
        const double rmin = 1.1;
        if (len < rmin) {
          const double f = -2.0 * (rmin - len) / len;
          g.row(i) += f * d;
          g.row(j) -= f * d;
        }
      }
    x -= lr * g;
  }
  center_inplace(x);
}

// Bridge edges found by DFS low-links; only these admit a clean subtree
// rotation.
std::vector<int> bridge_edges(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, edge idx)
  for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
    adj[edges[k].i].push_back({edges[k].j, k});
    adj[edges[k].j].push_back({edges[k].i, k});
  }
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<int> bridges;
  int timer = 0;
  // iterative DFS
  struct Frame { int v, parent_edge; std::size_t next; };
  for (int s = 0; s < n; ++s) {
    if (disc[s] >= 0) continue;
    std::vector<Frame> stack = {{s, -1, 0}};
    disc[s] = low[s] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.v].size()) {
        auto [w, ei] = adj[f.v][f.next++];
        if (ei == f.parent_edge) continue;
        if (disc[w] < 0) {
          disc[w] = low[w] = timer++;
          stack.push_back({w, ei, 0});
        } else {
          low[f.v] = std::min(low[f.v], disc[w]);
        }
      } else {
        const int v = f.v;
        const int pe = f.parent_edge;
        stack.pop_back();
        if (!stack.empty()) {
          const int u = stack.back().v;
          low[u] = std::min(low[u], low[v]);
          if (low[v] > disc[u]) bridges.push_back(pe);
        }
      }
    }
  }
  return bridges;
}

// Atoms on the far side of bridge edge (i -> j), found without crossing it.
std::vector<int> far_side(int n, const std::vector<Edge>& edges, int bridge_idx) {
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (int k = 0; k < static_cast<int>(edges.size()); ++k) {
    adj[edges[k].i].push_back({edges[k].j, k});
    adj[edges[k].j].push_back({edges[k].i, k});
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack = {edges[bridge_idx].j};
  seen[edges[bridge_idx].j] = 1;
  std::vector<int> out;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    out.push_back(v);
    for (auto [w, ei] : adj[v]) {
      if (ei == bridge_idx || seen[w]) continue;
      seen[w] = 1;
      stack.push_back(w);
    }
  }
  return out;
}

Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Coords perturb_conformer(const Coords& base, const std::vector<Edge>& edges, Rng& rng) {
  const int n = static_cast<int>(base.rows());
  Coords x = base;
  const std::vector<int> bridges = bridge_edges(n, edges);
  // keep only bridges with at least one atom strictly on each side
  std::vector<int> usable;
  for (int b : bridges) {
    const auto side = far_side(n, edges, b);
    if (static_cast<int>(side.size()) > 1 && static_cast<int>(side.size()) < n)
      usable.push_back(b);
  }
  if (usable.empty()) {
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) x(i, c) += 0.3 * rng.normal();
  } else {
    const int twists = 1 + static_cast<int>(rng.uniform_int(0, std::min<std::int64_t>(2, usable.size() - 1)));
    for (int k = 0; k < twists; ++k) {
      const int b = usable[rng.uniform_int(0, usable.size() - 1)];
      const Edge& e = edges[b];
      const double angle = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.4, 2.6);
      const Eigen::Vector3d pivot = x.row(e.i);
      const Eigen::Vector3d axis = (x.row(e.j) - x.row(e.i)).transpose();
      if (axis.norm() < 1e-9) continue;
      const Eigen::Matrix3d r = axis_rotation(axis, angle);
      for (int v : far_side(n, edges, b)) {
        const Eigen::Vector3d p = x.row(v).transpose() - pivot;
        x.row(v) = (pivot + r * p).transpose();
      }
    }
  }
  relax(x, edges, 60);
  return x;
}

}  // namespace

Dataset gen_synthetic_dataset(const GenConfig& cfg) {
  if (cfg.n_molecules < 1 || cfg.atoms_min < 2 || cfg.atoms_max < cfg.atoms_min ||
      cfg.conformers_min < 1 || cfg.conformers_max < cfg.conformers_min)
    throw std::invalid_argument("gen_synthetic_dataset: infeasible ranges");

  Dataset ds;
  for (int mol = 0; mol < cfg.n_molecules; ++mol) {
    Rng rng(cfg.seed, "dataset", static_cast<std::uint64_t>(mol));
    const int n = static_cast<int>(rng.uniform_int(cfg.atoms_min, cfg.atoms_max));
    const int nconf = static_cast<int>(rng.uniform_int(cfg.conformers_min, cfg.conformers_max));

    // Random tree with degree cap 4, chain-biased; occasional ring closure.
    std::vector<Edge> edges;
    std::vector<int> deg(n, 0);
    for (int i = 1; i < n; ++i) {
      int parent = i - 1;
      if (rng.uniform() > 0.55) {
        for (int tries = 0; tries < 8; ++tries) {
          const int cand = static_cast<int>(rng.uniform_int(0, i - 1));
          if (deg[cand] < 4) { parent = cand; break; }
        }
      }
      if (deg[parent] >= 4) {
        for (int cand = i - 1; cand >= 0; --cand)
          if (deg[cand] < 4) { parent = cand; break; }
      }
      const double r = rng.uniform();
      const BondType bt = r < 0.7   ? BondType::Single
                          : r < 0.85 ? BondType::Double
                          : r < 0.95 ? BondType::Aromatic
                                     : BondType::Triple;
      edges.push_back({parent, i, bt});
      ++deg[parent];
      ++deg[i];
    }
    if (n >= 5 && rng.uniform() < 0.35) {
      const int a = static_cast<int>(rng.uniform_int(0, n - 1));
      const int b = static_cast<int>(rng.uniform_int(0, n - 1));
      const bool adjacent = std::any_of(edges.begin(), edges.end(), [&](const Edge& e) {
        return (e.i == std::min(a, b) && e.j == std::max(a, b));
      });
      if (a != b && !adjacent && std::abs(a - b) >= 3 && deg[a] < 4 && deg[b] < 4) {
        edges.push_back({std::min(a, b), std::max(a, b), BondType::Single});
        ++deg[a];
        ++deg[b];
      }
    }

    std::vector<int> types(n);
    for (int i = 0; i < n; ++i) types[i] = static_cast<int>(rng.uniform_int(0, 5));

    Coords base = 0.8 * rng.normal_coords(n);
    for (int i = 0; i < n; ++i) base.row(i) += Eigen::RowVector3d(0.9 * i, 0, 0);
    relax(base, edges, 250);

    std::vector<Coords> confs = {base};
    for (int c = 1; c < nconf; ++c) {
      Coords cand;
      bool ok = false;
      for (int attempt = 0; attempt < 12 && !ok; ++attempt) {
        cand = perturb_conformer(base, edges, rng);
        ok = true;
        for (const Coords& prev : confs)
          if (rmsd_kabsch(cand, prev) <= 0.1) { ok = false; break; }
      }
      if (!ok) {
        // last resort: strong jiggle, always distinct
        cand = base;
        for (int i = 0; i < n; ++i)
          for (int k = 0; k < 3; ++k) cand(i, k) += 0.5 * rng.normal();
        relax(cand, edges, 40);
      }
      confs.push_back(cand);
    }

    Molecule m;
    char name[32];
    std::snprintf(name, sizeof(name), "mol_%03d", mol);
    m.name = name;
    m.graph = make_graph(n, std::move(types), edges, cfg.pe_width);
    m.ensemble = make_ensemble(std::move(confs));
    ds.molecules.push_back(std::move(m));
  }
  return ds;
}

std::string dataset_to_json(const Dataset& ds) {
  ordered_json root;
  root["schema_version"] = ds.schema_version;
  root["molecules"] = ordered_json::array();
  for (const Molecule& m : ds.molecules) {
    ordered_json jm;
    jm["name"] = m.name;
    jm["n_atoms"] = m.graph.n_atoms;
    jm["atom_type"] = m.graph.atom_type;
    ordered_json edges = ordered_json::array();
    for (const Edge& e : m.graph.edges)
      edges.push_back({e.i, e.j, static_cast<int>(e.type)});
    jm["edges"] = std::move(edges);
    ordered_json confs = ordered_json::array();
    for (const Coords& c : m.ensemble.conformers) {
      ordered_json jc = ordered_json::array();
      for (int i = 0; i < c.rows(); ++i)
        jc.push_back({c(i, 0), c(i, 1), c(i, 2)});
      confs.push_back(std::move(jc));
    }
    jm["conformers"] = std::move(confs);
    ordered_json w = ordered_json::array();
    for (int i = 0; i < m.ensemble.weights.size(); ++i)
      w.push_back(m.ensemble.weights(i));
    jm["weights"] = std::move(w);
    root["molecules"].push_back(std::move(jm));
  }
  return root.dump(1) + "\n";
}

Dataset dataset_from_json(const std::string& text, int pe_width) {
  const auto root = nlohmann::json::parse(text);
  if (!root.contains("schema_version"))
    throw std::runtime_error("dataset: missing schema_version");
  if (root["schema_version"].get<int>() != kDatasetSchemaVersion)
    throw std::runtime_error("dataset: unsupported schema version");

  Dataset ds;
  for (const auto& jm : root.at("molecules")) {
    Molecule m;
    m.name = jm.at("name").get<std::string>();
    const int n = jm.at("n_atoms").get<int>();
    auto types = jm.at("atom_type").get<std::vector<int>>();
    std::vector<Edge> edges;
    for (const auto& je : jm.at("edges")) {
      const int bt = je.at(2).get<int>();
      if (bt < 0 || bt >= kBondTypeCount)
        throw std::runtime_error("dataset: bad bond type");
      edges.push_back({je.at(0).get<int>(), je.at(1).get<int>(), static_cast<BondType>(bt)});
    }
    std::vector<Coords> confs;
    for (const auto& jc : jm.at("conformers")) {
      Coords c(jc.size(), 3);
      for (std::size_t i = 0; i < jc.size(); ++i)
        for (int k = 0; k < 3; ++k) c(static_cast<int>(i), k) = jc[i][k].get<double>();
      if (c.rows() != n) throw std::runtime_error("dataset: conformer size mismatch");
      confs.push_back(std::move(c));
    }
    Eigen::VectorXd weights;
    if (jm.contains("weights")) {
      const auto w = jm["weights"].get<std::vector<double>>();
      weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    }
    m.graph = make_graph(n, std::move(types), std::move(edges), pe_width);
    m.ensemble = make_ensemble(std::move(confs), std::move(weights));
    ds.molecules.push_back(std::move(m));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  const std::string text = dataset_to_json(ds);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("save_dataset: write failed");
}

Dataset load_dataset(const std::string& path, int pe_width) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return dataset_from_json(text, pe_width);
}

}  // namespace avgflow
