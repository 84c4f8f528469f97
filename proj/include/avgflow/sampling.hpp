#ifndef AVGFLOW_SAMPLING_HPP
#define AVGFLOW_SAMPLING_HPP

#include <vector>

#include "avgflow/flow_target.hpp"
#include "avgflow/molecule.hpp"

namespace avgflow {

struct VectorFieldNet;

// Time-dependent per-atom velocity field.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual Coords eval(const Coords& x, double t) const = 0;
};

// Exact averaged-flow field; also serves as the oracle-injection hook in
// training and as the teacher-free field for integration interpolants.
class OracleField final : public VectorField {
 public:
  OracleField(const ConformerEnsemble& ensemble, const MetricSpec& metric,
              int quad_nodes = so3::kDefaultQuadNodes)
      : ensemble_(&ensemble), metric_(&metric), quad_nodes_(quad_nodes) {}
  Coords eval(const Coords& x, double t) const override {
    return avg_flow_target(FlowQuery{t, x}, *ensemble_, *metric_, quad_nodes_);
  }

 private:
  const ConformerEnsemble* ensemble_;
  const MetricSpec* metric_;
  int quad_nodes_;
};

// Ordered (t, coordinates) pairs produced by a sampler over [0, 1].
struct Trajectory {
  std::vector<double> times;
  std::vector<Coords> states;
};

// Fixed-step Euler from t0 to t1. One kernel shared by the sampler and the
// training-time integration interpolant so both produce identical states at
// identical discretizations. Appends intermediate states to `record` when
// given.
Coords euler_steps(const VectorField& field, Coords x, double t0, double t1,
                   int steps, Trajectory* record = nullptr);

Trajectory euler_sample(const VectorField& field, const Coords& x0, int steps);
Trajectory euler_sample(const VectorFieldNet& net, const MoleculeGraph& graph,
                        const Coords& x0, int steps);

Trajectory midpoint_sample(const VectorField& field, const Coords& x0, int steps);
Trajectory midpoint_sample(const VectorFieldNet& net, const MoleculeGraph& graph,
                           const Coords& x0, int steps);

// Mean over interior times of the per-atom distance between the state and the
// time-matched chord, normalized by the per-atom chord length. Zero iff the
// trajectory is the straight chord. A zero-length chord yields the absolute
// deviation and sets `degenerate`.
double straightness(const Trajectory& traj, bool* degenerate = nullptr);

}  // namespace avgflow

#endif
