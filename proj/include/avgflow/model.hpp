#ifndef AVGFLOW_MODEL_HPP
#define AVGFLOW_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "avgflow/molecule.hpp"

namespace avgflow {

inline constexpr int kAtomTypeVocab = 8;
inline constexpr int kRbfCount = 8;
inline constexpr double kRbfMax = 4.0;

struct ModelConfig {
  int hidden_width = 64;
  int n_layers = 3;
  int time_embed_width = 16;  // even
  int pe_width = kDefaultPeWidth;
  bool use_pair_bias = true;

  int feature_width() const { return kAtomTypeVocab + 1 + pe_width; }
  int input_width() const { return feature_width() + 3; }
  int edge_feature_width() const { return kBondTypeCount + kRbfCount; }
  void validate() const;
};

std::int64_t param_count(const ModelConfig& cfg);

// Message passing over the fully connected graph with pairwise-distance and
// bond-type edge bias and sinusoidal time conditioning. Parameters live in
// one flat vector with a deterministic layout (see ParamLayout in model.cpp).
struct VectorFieldNet {
  ModelConfig config;
  Eigen::VectorXd params;
};

// Deterministic initialization; the output layer starts at zero so the
// untrained field is identically zero.
VectorFieldNet init_net(const ModelConfig& cfg, std::uint64_t seed);

// Per-node features: one-hot atom type, degree / 6, Laplacian PE.
Eigen::MatrixXd featurize(const MoleculeGraph& graph);

Coords forward(const VectorFieldNet& net, const MoleculeGraph& graph,
               const Coords& x, double t);

// Forward with cached intermediates for the hand-rolled backward pass.
struct ForwardCache;
Coords forward_cached(const VectorFieldNet& net, const MoleculeGraph& graph,
                      const Coords& x, double t, ForwardCache& cache);

// d <output, cotangent> / d params.
Eigen::VectorXd backward(const VectorFieldNet& net, const ForwardCache& cache,
                         const Coords& cotangent);

struct ForwardCache {
  Eigen::MatrixXd z;       // n x input_width
  Eigen::VectorXd temb;    // time embedding
  Eigen::MatrixXd epair;   // (n*n) x edge_feature_width, diagonal rows zero
  std::vector<Eigen::MatrixXd> h;  // n_layers+1 node states, n x H
  std::vector<Eigen::MatrixXd> g;  // per-layer gates, (n*n) x H
  std::vector<Eigen::MatrixXd> s;  // per-layer projected messages, n x H
  std::vector<Eigen::MatrixXd> m;  // per-layer aggregated messages, n x H
  std::vector<Eigen::MatrixXd> u;  // per-layer updates (tanh output), n x H
};

// Versioned binary checkpoint: config header, parameter payload, optional EMA
// payload, trailing checksum. Exact layout documented in the README.
void save_checkpoint(const VectorFieldNet& net, const std::string& path,
                     const Eigen::VectorXd* ema = nullptr);

struct Checkpoint {
  VectorFieldNet net;
  bool has_ema = false;
  Eigen::VectorXd ema;
};

Checkpoint load_checkpoint(const std::string& path);

// Load and require the stored config to match `expected`.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace avgflow

#endif
