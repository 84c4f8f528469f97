#include "avgflow/sampling.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "avgflow/model.hpp"

namespace avgflow {

namespace {

void check_state(const Coords& x, int step) {
  if (!x.allFinite()) {
    std::ostringstream msg;
    msg << "integration produced a non-finite state at step " << step;
    throw std::runtime_error(msg.str());
  }
}

class NetFieldAdapter final : public VectorField {
 public:
  NetFieldAdapter(const VectorFieldNet& net, const MoleculeGraph& graph)
      : net_(&net), graph_(&graph) {}
  Coords eval(const Coords& x, double t) const override {
    return forward(*net_, *graph_, x, t);
  }

 private:
  const VectorFieldNet* net_;
  const MoleculeGraph* graph_;
};

}  // namespace

Coords euler_steps(const VectorField& field, Coords x, double t0, double t1,
                   int steps, Trajectory* record) {
  if (steps < 1) throw std::invalid_argument("euler_steps: steps must be >= 1");
  const double h = (t1 - t0) / steps;
  if (record) {
    record->times.push_back(t0);
    record->states.push_back(x);
  }
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    x += h * field.eval(x, t);
    check_state(x, k + 1);
    if (record) {
      record->times.push_back(k + 1 == steps ? t1 : t0 + (k + 1) * h);
      record->states.push_back(x);
    }
  }
  return x;
}

Trajectory euler_sample(const VectorField& field, const Coords& x0, int steps) {
  Trajectory traj;
  euler_steps(field, x0, 0.0, 1.0, steps, &traj);
  return traj;
}

Trajectory euler_sample(const VectorFieldNet& net, const MoleculeGraph& graph,
                        const Coords& x0, int steps) {
  return euler_sample(NetFieldAdapter(net, graph), x0, steps);
}

Trajectory midpoint_sample(const VectorField& field, const Coords& x0, int steps) {
  if (steps < 1) throw std::invalid_argument("midpoint_sample: steps must be >= 1");
  Trajectory traj;
  const double h = 1.0 / steps;
  Coords x = x0;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Coords xm = x + 0.5 * h * field.eval(x, t);
    x += h * field.eval(xm, t + 0.5 * h);
    check_state(x, k + 1);
    traj.times.push_back(k + 1 == steps ? 1.0 : (k + 1) * h);
    traj.states.push_back(x);
  }
  return traj;
}

Trajectory midpoint_sample(const VectorFieldNet& net, const MoleculeGraph& graph,
                           const Coords& x0, int steps) {
  return midpoint_sample(NetFieldAdapter(net, graph), x0, steps);
}

double straightness(const Trajectory& traj, bool* degenerate) {
  const auto m = traj.states.size();
  if (m < 3) throw std::invalid_argument("straightness: need at least 3 states");
  if (traj.times.size() != m)
    throw std::invalid_argument("straightness: times/states size mismatch");
  const Coords& first = traj.states.front();
  const Coords& last = traj.states.back();
  const double t0 = traj.times.front();
  const double t1 = traj.times.back();

  const double chord = (last - first).rowwise().norm().mean();
  if (degenerate) *degenerate = (chord <= 0.0);

  double acc = 0.0;
  for (std::size_t k = 1; k + 1 < m; ++k) {
    const double s = (traj.times[k] - t0) / (t1 - t0);
    const Coords ref = (1.0 - s) * first + s * last;
    acc += (traj.states[k] - ref).rowwise().norm().mean();
  }
  acc /= static_cast<double>(m - 2);
  return chord > 0.0 ? acc / chord : acc;
}

}  // namespace avgflow
