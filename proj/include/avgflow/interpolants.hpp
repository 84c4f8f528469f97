#ifndef AVGFLOW_INTERPOLANTS_HPP
#define AVGFLOW_INTERPOLANTS_HPP

#include <cstdint>

#include "avgflow/metric.hpp"
#include "avgflow/molecule.hpp"
#include "avgflow/so3_partition.hpp"

namespace avgflow {

struct InterpolantKind {
  enum class Kind { Linear, Integrated };
  Kind kind = Kind::Linear;
  int steps = 20;  // Euler steps when Integrated

  static InterpolantKind linear() { return {Kind::Linear, 0}; }
  static InterpolantKind integrated(int steps = 20) { return {Kind::Integrated, steps}; }
};

// x_t = (1 - t) x0 + t x1, so x_0 is noise and x_1 is data.
Coords linear_interpolant(const Coords& x0, const Coords& x1, double t);

// x_t obtained by Euler-integrating the exact averaged-flow field from 0 to t
// with uniform step t/steps. Shares the sampler's Euler kernel.
Coords integration_interpolant(const Coords& x0, const ConformerEnsemble& ensemble,
                               const MetricSpec& metric, double t, int steps,
                               int quad_nodes = so3::kDefaultQuadNodes);

// Proper rotation R (det +1) minimizing ||P - Q R^T||_F for centered P, Q.
so3::Mat3 kabsch_rotation(const Coords& p, const Coords& q);

enum class BaselineKind { CondOT, KabschOT };

// Conditional-OT style training pair: the (possibly Kabsch-aligned) data
// endpoint and the constant chord velocity x1 - x0.
struct BaselineTarget {
  Coords x1;        // endpoint actually used by the interpolant
  Coords velocity;  // x1 - x0
};

BaselineTarget baseline_target(BaselineKind kind, const Coords& x0, const Coords& x1);

// Standard normal coordinates centered to zero centroid.
Coords sample_prior(int n_atoms, std::uint64_t seed);
class Rng;
Coords sample_prior(int n_atoms, Rng& rng);

}  // namespace avgflow

#endif
