#ifndef AVGFLOW_TRAINING_HPP
#define AVGFLOW_TRAINING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avgflow/dataset.hpp"
#include "avgflow/interpolants.hpp"
#include "avgflow/metric.hpp"
#include "avgflow/model.hpp"
#include "avgflow/rng.hpp"
#include "avgflow/sampling.hpp"

namespace avgflow {

enum class Objective { AvgFlow, CondOT, KabschOT };
enum class TSamplerKind { Uniform, Exponential };

// Inverse-CDF draw from p(t) proportional to exp(lambda t) on [0, 1];
// Uniform ignores lambda.
double sample_t(TSamplerKind kind, double lambda, Rng& rng);

struct LrSchedule {
  enum class Kind { Cosine, Piecewise };
  Kind kind = Kind::Cosine;
  double peak = 2e-4;
  double end = 1e-6;
  int warmup_steps = 200;
  // Piecewise: (first step, rate) knots in ascending step order.
  std::vector<std::pair<int, double>> pieces;

  double at(int step, int total_steps) const;
};

struct TrainConfig {
  Objective objective = Objective::AvgFlow;
  InterpolantKind interpolant = InterpolantKind::integrated(20);
  LrSchedule lr;
  int batch_size = 8;
  int epochs = 200;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  TSamplerKind t_sampler = TSamplerKind::Uniform;
  double t_lambda = -1.2;
  double grad_clip = 1.0;
  double weight_decay = 1e-4;
  // Per-epoch single-conformer subsampling is the default; the flag switches
  // the target to the full ensemble summation.
  bool full_ensemble = false;
  // Draw a Haar rotation for the data endpoint of linear interpolants and
  // baseline objectives. The averaged-flow target itself is rotation
  // invariant, so this only widens the query distribution.
  bool rotation_augment = true;
  double val_fraction = 0.1;
  int val_queries = 4;
  MetricSpec::Kind metric_kind = MetricSpec::Kind::Euclidean;
  double sigma0 = 1.0;
  double sigma1 = 0.0;
  ModelConfig model;
  int quad_nodes = so3::kDefaultQuadNodes;
};

// Decoupled-weight-decay adaptive moments.
class AdamW {
 public:
  AdamW(Eigen::Index dim, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

 private:
  Eigen::VectorXd m_, v_;
  double wd_, b1_, b2_, eps_;
  int t_ = 0;
};

// Exponential moving average of parameters. The raw accumulator follows
// e <- d e + (1-d) theta from e0 = theta0; the debiased read-out removes the
// initialization weight, which matters at small step counts.
class Ema {
 public:
  Ema(const Eigen::VectorXd& init, double decay);
  void update(const Eigen::VectorXd& params);
  Eigen::VectorXd value(bool debias = true) const;
  int steps() const { return steps_; }

 private:
  Eigen::VectorXd acc_, init_;
  double decay_;
  int steps_ = 0;
};

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

// Mean-squared velocity regression (1/n) ||v_theta(x_t, t) - target||^2 with
// the analytic parameter gradient.
LossGrad velocity_loss(const VectorFieldNet& net, const MoleculeGraph& graph,
                       double t, const Coords& x_t, const Coords& target);

// Averaged-flow objective: target = u_t(x_t), a constant with respect to the
// parameters. `predictor_override` replaces the network output (oracle
// injection hook); the gradient is then zero.
LossGrad avgflow_loss(const VectorFieldNet& net, const MoleculeGraph& graph,
                      const ConformerEnsemble& ensemble, const MetricSpec& metric,
                      double t, const Coords& x_t,
                      int quad_nodes = so3::kDefaultQuadNodes,
                      const VectorField* predictor_override = nullptr);

struct LossCurveRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

void write_loss_curve_csv(const std::string& path,
                          const std::vector<LossCurveRow>& curve);

struct TrainResult {
  VectorFieldNet net;       // raw final parameters
  Eigen::VectorXd ema;      // debiased EMA parameters
  std::vector<LossCurveRow> curve;
  double initial_val_loss = 0.0;
  double final_val_loss = 0.0;
  std::vector<int> val_molecules;
};

// Stage 1: averaged-flow (or baseline-objective) training on a dataset.
// Deterministic given the seed for any worker count. Validation error is
// always measured against the exact averaged-flow field on a fixed query set,
// regardless of the training objective.
TrainResult train_stage1(const Dataset& ds, const TrainConfig& cfg);

struct ReflowPair {
  int mol_index = 0;
  Coords x0;
  Coords x1;
};

struct ReflowPairSet {
  std::vector<ReflowPair> pairs;
  int steps = 100;
  std::uint64_t seed = 0;
  std::string teacher_id;
  bool teacher_ema = true;
};

std::string net_id(const Eigen::VectorXd& params);

// Draws x0 from the prior and integrates the teacher field with the shared
// Euler kernel.
ReflowPairSet generate_reflow_pairs(const VectorFieldNet& teacher, const Dataset& ds,
                                    int steps, int pairs_per_graph,
                                    std::uint64_t seed, bool teacher_is_ema = true);

void save_pairs(const ReflowPairSet& pairs, const std::string& path);
ReflowPairSet load_pairs(const std::string& path);

// Chord-regression loss used by both reflow and distillation; distillation is
// this loss at t = 0.
LossGrad reflow_pair_loss(const VectorFieldNet& net, const MoleculeGraph& graph,
                          const ReflowPair& pair, double t);

TrainResult train_reflow(const VectorFieldNet& init, const Dataset& ds,
                         const ReflowPairSet& pairs, const TrainConfig& cfg);
TrainResult train_distill(const VectorFieldNet& init, const Dataset& ds,
                          const ReflowPairSet& pairs, const TrainConfig& cfg);

}  // namespace avgflow

#endif
