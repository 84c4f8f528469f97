#ifndef AVGFLOW_FLOW_TARGET_HPP
#define AVGFLOW_FLOW_TARGET_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "avgflow/metric.hpp"
#include "avgflow/molecule.hpp"
#include "avgflow/so3_partition.hpp"

namespace avgflow {

// Query point of the flow field. t stays strictly below 1; the target divides
// by (1 - t).
struct FlowQuery {
  double t = 0.0;
  Coords x;
};

// t is additionally clamped to this bound inside the target computation.
inline constexpr double kMaxTargetTime = 1.0 - 1e-4;

// log sum_i w_i exp(a_i), max-shifted; zero-weight entries are masked out.
double weighted_logsumexp(std::span<const double> values,
                          std::span<const double> weights = {});

// The SO(3)-averaged flow field u_t(x): the posterior expectation of the
// rotated conformer, obtained in closed form through the gradient of the
// SO(3) log-partition per conformer, minus x, over (1 - t).
Coords avg_flow_target(const FlowQuery& q, const ConformerEnsemble& ensemble,
                       const MetricSpec& metric,
                       int quad_nodes = so3::kDefaultQuadNodes);

// Brute-force cross-check of avg_flow_target: self-normalized importance
// estimate over Haar-uniform rotations, with component-wise standard errors
// from the delta method.
struct McFlowResult {
  Coords velocity;
  Coords std_error;
  double effective_samples = 0.0;
};

McFlowResult mc_avg_flow(const FlowQuery& q, const ConformerEnsemble& ensemble,
                         const MetricSpec& metric, int num_samples,
                         std::uint64_t seed);

// Batched evaluation. The parallel kernel writes each result to its own slot
// and is bit-identical to the serial reference for any thread count.
struct TargetJob {
  FlowQuery query;
  const ConformerEnsemble* ensemble = nullptr;
  const MetricSpec* metric = nullptr;
};

void avg_flow_target_batch_serial(std::span<const TargetJob> jobs,
                                  std::span<Coords> out,
                                  int quad_nodes = so3::kDefaultQuadNodes);
void avg_flow_target_batch(std::span<const TargetJob> jobs, std::span<Coords> out,
                           int quad_nodes = so3::kDefaultQuadNodes);

}  // namespace avgflow

#endif
