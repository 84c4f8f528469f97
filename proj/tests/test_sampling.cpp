#include <doctest.h>

#include <cmath>

#include "avgflow/interpolants.hpp"
#include "avgflow/model.hpp"
#include "avgflow/rng.hpp"
#include "avgflow/sampling.hpp"

using namespace avgflow;

namespace {

class ConstField final : public VectorField {
 public:
  explicit ConstField(const Coords& c) : c_(c) {}
  Coords eval(const Coords&, double) const override { return c_; }

 private:
  Coords c_;
};

class LinearField final : public VectorField {
 public:
  Coords eval(const Coords& x, double) const override { return -0.8 * x; }
};

class NanField final : public VectorField {
 public:
  Coords eval(const Coords& x, double t) const override {
    if (t > 0.5) return Coords::Constant(x.rows(), 3, std::nan(""));
    return -x;
  }
};

}  // namespace

TEST_CASE("euler_sample basics") {
  Rng rng(61, "euler");
  const Coords x0 = centered(rng.normal_coords(4));
  const Coords c = rng.normal_coords(4);
  const ConstField field(c);

  // steps=1 is the one-step distillation map
  const Trajectory one = euler_sample(field, x0, 1);
  CHECK(one.states.size() == 2);
  CHECK((one.states.back() - (x0 + c)).cwiseAbs().maxCoeff() < 1e-14);

  // constant field: straight line, endpoint x0 + c, trajectory has steps+1 states
  const Trajectory traj = euler_sample(field, x0, 10);
  CHECK(traj.states.size() == 11);
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == 1.0);
  CHECK((traj.states.back() - (x0 + c)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(straightness(traj) < 1e-12);

  CHECK_THROWS(euler_sample(field, x0, 0));
}

TEST_CASE("euler with the exact single-conformer field lands on the conformer") {
  Rng rng(62, "oraclefield");
  const Coords xh = centered(rng.normal_coords(6));
  const ConformerEnsemble ens = make_ensemble({xh});
  const MetricSpec metric = MetricSpec::euclidean();
  const OracleField field(ens, metric);
  const Coords x0 = sample_prior(6, rng);
  const Trajectory traj = euler_sample(field, x0, 100);

  // endpoint matches the conformer up to a rotation
  const so3::Mat3 r = kabsch_rotation(traj.states.back(), xh);
  const double rmsd =
      std::sqrt((traj.states.back() - xh * r.transpose()).squaredNorm() / 6.0);
  CHECK(rmsd < 0.05);
}

TEST_CASE("midpoint_sample matches Euler on constant fields, beats it on linear") {
  Rng rng(63, "midpoint");
  const Coords x0 = centered(rng.normal_coords(4));
  const ConstField cf(rng.normal_coords(4));
  const Trajectory te = euler_sample(cf, x0, 7);
  const Trajectory tm = midpoint_sample(cf, x0, 7);
  for (std::size_t k = 0; k < te.states.size(); ++k)
    CHECK((te.states[k] - tm.states[k]).cwiseAbs().maxCoeff() < 1e-13);

  const LinearField lf;
  const Coords exact = std::exp(-0.8) * x0;
  const double err_e = (euler_sample(lf, x0, 16).states.back() - exact).norm();
  const double err_m = (midpoint_sample(lf, x0, 16).states.back() - exact).norm();
  CHECK(err_m < err_e);

  // O(h^2) self-refinement: quadrupling steps cuts the midpoint error ~16x
  const Coords ref = midpoint_sample(lf, x0, 1000).states.back();
  const double e16 = (midpoint_sample(lf, x0, 16).states.back() - ref).norm();
  const double e64 = (midpoint_sample(lf, x0, 64).states.back() - ref).norm();
  CHECK(e16 / e64 > 10.0);
  CHECK(e16 / e64 < 24.0);
}

TEST_CASE("integration error reported with step index") {
  Rng rng(64, "nanstep");
  const NanField field;
  try {
    euler_sample(field, centered(rng.normal_coords(3)), 10);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("straightness: semicircular arc matches the analytic deviation") {
  const int pts = 101;
  const double r = 1.7;
  Trajectory traj;
  for (int k = 0; k < pts; ++k) {
    const double t = static_cast<double>(k) / (pts - 1);
    Coords s(1, 3);
    s << r * std::cos(M_PI * t), r * std::sin(M_PI * t), 0.0;
    traj.times.push_back(t);
    traj.states.push_back(s);
  }
  double expected = 0.0;
  for (int k = 1; k + 1 < pts; ++k) {
    const double t = static_cast<double>(k) / (pts - 1);
    const double dx = r * std::cos(M_PI * t) - r * (1.0 - 2.0 * t);
    const double dy = r * std::sin(M_PI * t);
    expected += std::sqrt(dx * dx + dy * dy);
  }
  expected /= (pts - 2) * (2.0 * r);
  CHECK(straightness(traj) == doctest::Approx(expected).epsilon(1e-12));

  // invariant under a global rotation of every state
  Rng rng(65, "strot");
  const Eigen::Matrix3d q = rng.rotation();
  Trajectory rot = traj;
  for (Coords& s : rot.states) s = s * q.transpose();
  CHECK(straightness(rot) == doctest::Approx(straightness(traj)).epsilon(1e-10));
}

TEST_CASE("straightness flags a zero-length chord") {
  Trajectory traj;
  Coords a = Coords::Zero(2, 3);
  Coords b = Coords::Ones(2, 3);
  traj.times = {0.0, 0.5, 1.0};
  traj.states = {a, b, a};
  bool degenerate = false;
  const double dev = straightness(traj, &degenerate);
  CHECK(degenerate);
  CHECK(dev == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));

  CHECK_THROWS(straightness(Trajectory{{0.0, 1.0}, {a, b}}));
}

TEST_CASE("sampler and integration interpolant share the Euler kernel bit-for-bit") {
  Rng rng(66, "shared");
  const ConformerEnsemble ens = make_ensemble({rng.normal_coords(5)});
  const MetricSpec metric = MetricSpec::euclidean();
  const OracleField field(ens, metric);
  const Coords x0 = sample_prior(5, rng);

  // 10 steps to t=0.5 with step 0.05 == the first 10 states of a 20-step
  // full-range integration
  const Coords xt = integration_interpolant(x0, ens, metric, 0.5, 10);
  Trajectory traj;
  euler_steps(field, x0, 0.0, 1.0, 20, &traj);
  CHECK((xt.array() == traj.states[10].array()).all());
}

TEST_CASE("sampling a net field is deterministic") {
  Rng rng(67, "netdet");
  ModelConfig cfg;
  cfg.hidden_width = 8;
  cfg.n_layers = 1;
  cfg.time_embed_width = 4;
  cfg.pe_width = 4;
  std::vector<Edge> edges = {{0, 1, BondType::Single}, {1, 2, BondType::Single}};
  const MoleculeGraph g = make_graph(3, {0, 1, 2}, edges, cfg.pe_width);
  VectorFieldNet net = init_net(cfg, 2);
  for (Eigen::Index i = 0; i < net.params.size(); ++i) net.params(i) += 0.1;
  const Coords x0 = sample_prior(3, rng);
  const Trajectory t1 = euler_sample(net, g, x0, 5);
  const Trajectory t2 = euler_sample(net, g, x0, 5);
  for (std::size_t k = 0; k < t1.states.size(); ++k)
    CHECK((t1.states[k].array() == t2.states[k].array()).all());
}
