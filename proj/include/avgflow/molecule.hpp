#ifndef AVGFLOW_MOLECULE_HPP
#define AVGFLOW_MOLECULE_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace avgflow {

// N x 3 coordinates, one row per atom.
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3>;

enum class BondType : int { None = 0, Single = 1, Double = 2, Triple = 3, Aromatic = 4 };
inline constexpr int kBondTypeCount = 5;

struct Edge {
  int i = 0;
  int j = 0;
  BondType type = BondType::Single;
};

// 2D molecular graph with precomputed degrees and Laplacian positional
// encodings. Edges store each bond once (i < j).
struct MoleculeGraph {
  int n_atoms = 0;
  std::vector<int> atom_type;
  std::vector<Edge> edges;
  std::vector<int> degree;
  Eigen::MatrixXd laplacian_pe;  // n_atoms x pe_width
};

inline constexpr int kDefaultPeWidth = 8;

// Eigenvectors of the symmetric normalized Laplacian for the lowest nontrivial
// eigenvalues, computed per connected component, zero-padded, sign-fixed by
// the first component above threshold.
Eigen::MatrixXd laplacian_positional_encoding(int n_atoms,
                                              const std::vector<Edge>& edges,
                                              int width);

// Validates indices, derives degrees and the positional encoding.
MoleculeGraph make_graph(int n_atoms, std::vector<int> atom_type,
                         std::vector<Edge> edges, int pe_width = kDefaultPeWidth);

void validate_graph(const MoleculeGraph& g);

// Target coordinate sets x_hat with nonnegative weights q_hat. Conformers are
// centered to zero centroid on construction.
struct ConformerEnsemble {
  std::vector<Coords> conformers;
  Eigen::VectorXd weights;

  int n_atoms() const { return conformers.empty() ? 0 : static_cast<int>(conformers[0].rows()); }
  int size() const { return static_cast<int>(conformers.size()); }
};

ConformerEnsemble make_ensemble(std::vector<Coords> conformers,
                                Eigen::VectorXd weights = {});

// Single-conformer view used for per-epoch conformer subsampling.
ConformerEnsemble single_conformer(const ConformerEnsemble& e, int index);

inline void center_inplace(Coords& x) { x.rowwise() -= x.colwise().mean(); }

inline Coords centered(Coords x) {
  center_inplace(x);
  return x;
}

}  // namespace avgflow

#endif
