#ifndef AVGFLOW_ORACLE_CHECK_HPP
#define AVGFLOW_ORACLE_CHECK_HPP

#include <cstdint>
#include <vector>

#include "avgflow/dataset.hpp"
#include "avgflow/flow_target.hpp"

namespace avgflow {

// Closed form vs Monte-Carlo cross-validation suite. Each instance draws a
// molecule, a time in {0.2, 0.5, 0.8}, alternating metric kind, and an
// on-path query, then compares every velocity component of avg_flow_target
// against mc_avg_flow in units of the reported standard error.
struct OracleCheckInstance {
  int molecule = 0;
  double t = 0.0;
  MetricSpec::Kind metric = MetricSpec::Kind::Euclidean;
  double max_z = 0.0;
  double ess = 0.0;
};

struct OracleCheckReport {
  std::vector<OracleCheckInstance> instances;
  double max_z = 0.0;
  bool pass = false;
};

// fault_scale != 1 perturbs the closed form (negative control).
OracleCheckReport run_oracle_check(const Dataset& ds, int instances, int samples,
                                   std::uint64_t seed, double fault_scale = 1.0,
                                   int quad_nodes = so3::kDefaultQuadNodes,
                                   double z_threshold = 3.0);

}  // namespace avgflow

#endif
