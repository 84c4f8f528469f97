#include <doctest.h>

#include <cmath>
#include <vector>

#include "avgflow/flow_target.hpp"
#include "avgflow/interpolants.hpp"
#include "avgflow/oracle_check.hpp"
#include "avgflow/rng.hpp"
#include "oracles.hpp"

using namespace avgflow;

namespace {

ConformerEnsemble random_ensemble(int n, int nconf, Rng& rng) {
  std::vector<Coords> confs;
  for (int c = 0; c < nconf; ++c) confs.push_back(rng.normal_coords(n));
  return make_ensemble(std::move(confs));
}

MoleculeGraph path_graph(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, BondType::Single});
  return make_graph(n, std::vector<int>(n, 0), edges);
}

}  // namespace

TEST_CASE("weighted_logsumexp basics") {
  const std::vector<double> v0 = {0.0, 0.0};
  CHECK(weighted_logsumexp(v0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const std::vector<double> v1 = {3.7};
  const std::vector<double> w1 = {1.0};
  CHECK(weighted_logsumexp(v1, w1) == doctest::Approx(3.7).epsilon(1e-14));

  // masked zero-weight entries do not contribute, even at -inf-ish values
  const std::vector<double> v2 = {-1e6, 2.0};
  const std::vector<double> w2 = {0.0, 1.5};
  CHECK(weighted_logsumexp(v2, w2) ==
        doctest::Approx(2.0 + std::log(1.5)).epsilon(1e-14));

  const std::vector<double> zeros = {0.0, 0.0};
  CHECK_THROWS(weighted_logsumexp(v2, zeros));
  const std::vector<double> bad_len = {1.0};
  CHECK_THROWS(weighted_logsumexp(v2, bad_len));
}

TEST_CASE("weighted_logsumexp vs naive summation") {
  Rng rng(5, "lse");
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> v(10), w(10);
    for (int i = 0; i < 10; ++i) {
      v[i] = rng.uniform(-2.0, 2.0);
      w[i] = rng.uniform(0.1, 3.0);
    }
    double naive = 0.0;
    for (int i = 0; i < 10; ++i) naive += w[i] * std::exp(v[i]);
    CHECK(weighted_logsumexp(v, w) ==
          doctest::Approx(std::log(naive)).epsilon(1e-12));
  }
}

TEST_CASE("weighted_logsumexp stable at extreme magnitudes") {
  const std::vector<double> v = {-1e6, -1e6 + 1.0};
  const double got = weighted_logsumexp(v);
  CHECK(std::isfinite(got));
  // log(e^{-1e6} + e^{-1e6+1}) = -1e6 + 1 + log(1 + e^{-1})
  CHECK(got == doctest::Approx(-1e6 + 1.0 + std::log1p(std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("avg_flow_target at the origin is zero for centered data") {
  Rng rng(21, "origin");
  const ConformerEnsemble ens = random_ensemble(5, 2, rng);
  const MetricSpec metric = MetricSpec::euclidean();
  const Coords u = avg_flow_target({0.5, Coords::Zero(5, 3)}, ens, metric);
  CHECK(u.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single one-atom conformer at the origin gives u = -x / (1-t)") {
  ConformerEnsemble ens = make_ensemble({Coords::Zero(1, 3)});
  Coords x(1, 3);
  x << 0.3, -0.2, 0.5;
  const Coords u = avg_flow_target({0.4, x}, ens, MetricSpec::euclidean());
  CHECK((u + x / 0.6).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("avg_flow_target error paths") {
  Rng rng(22, "errors");
  const ConformerEnsemble ens = random_ensemble(4, 1, rng);
  const MetricSpec metric = MetricSpec::euclidean();
  CHECK_THROWS(avg_flow_target({1.0, Coords::Zero(4, 3)}, ens, metric));
  CHECK_THROWS(avg_flow_target({0.5, Coords::Zero(3, 3)}, ens, metric));
  ConformerEnsemble empty;
  empty.weights = Eigen::VectorXd::Ones(0);
  CHECK_THROWS(avg_flow_target({0.5, Coords::Zero(4, 3)}, empty, metric));
}

TEST_CASE("rotational equivariance of the target") {
  Rng rng(23, "equiv");
  const ConformerEnsemble ens = random_ensemble(6, 2, rng);
  const Coords x = centered(rng.normal_coords(6));
  const Eigen::Matrix3d q = rng.rotation();
  const MetricSpec metric = MetricSpec::euclidean();
  const Coords u_rot = avg_flow_target({0.5, x * q.transpose()}, ens, metric);
  const Coords u = avg_flow_target({0.5, x}, ens, metric) * q.transpose();
  CHECK((u_rot - u).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("conformer-weight scaling invariance") {
  Rng rng(24, "wscale");
  std::vector<Coords> confs = {rng.normal_coords(5), rng.normal_coords(5),
                               rng.normal_coords(5)};
  Eigen::Vector3d w(0.2, 1.0, 3.0);
  const ConformerEnsemble e1 = make_ensemble(confs, w);
  const ConformerEnsemble e2 = make_ensemble(confs, 7.3 * w);
  const Coords x = centered(rng.normal_coords(5));
  const MetricSpec metric = MetricSpec::euclidean();
  const Coords u1 = avg_flow_target({0.6, x}, e1, metric);
  const Coords u2 = avg_flow_target({0.6, x}, e2, metric);
  CHECK((u1 - u2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single conformer, t -> 1: posterior concentrates on the Kabsch rotation") {
  Rng rng(25, "kabsch_limit");
  const Coords xh = centered(rng.normal_coords(6));
  const Coords x = centered(rng.normal_coords(6));
  const ConformerEnsemble ens = make_ensemble({xh});
  const double t = 0.999;
  const Coords u = avg_flow_target({t, x}, ens, MetricSpec::euclidean());
  const Coords endpoint = (1.0 - t) * u + x;
  const so3::Mat3 rk = kabsch_rotation(x, xh);
  const Coords kab = xh * rk.transpose();
  CHECK((endpoint - kab).cwiseAbs().maxCoeff() < 1e-3 * kab.cwiseAbs().maxCoeff());
}

TEST_CASE("closed form within MC error bars on random instances") {
  // Compact version of the acceptance-1 suite.
  GenConfig gc;
  gc.n_molecules = 6;
  gc.atoms_min = 3;
  gc.atoms_max = 8;
  gc.conformers_min = 1;
  gc.conformers_max = 3;
  gc.seed = 91;
  const Dataset ds = gen_synthetic_dataset(gc);
  const OracleCheckReport rep = run_oracle_check(ds, 6, 40000, 914);
  CHECK(rep.pass);
  CHECK(rep.max_z <= 3.0);
  for (const auto& inst : rep.instances) CHECK(inst.ess >= 10.0);
}

TEST_CASE("fault injection flips the oracle check to failure") {
  GenConfig gc;
  gc.n_molecules = 4;
  gc.atoms_min = 4;
  gc.atoms_max = 6;
  gc.seed = 92;
  const Dataset ds = gen_synthetic_dataset(gc);
  const OracleCheckReport rep = run_oracle_check(ds, 4, 30000, 77, /*fault=*/1.05);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("mc_avg_flow basics") {
  Rng rng(26, "mc");
  const ConformerEnsemble ens = random_ensemble(4, 2, rng);
  const MetricSpec metric = MetricSpec::euclidean();

  CHECK_THROWS(mc_avg_flow({0.5, Coords::Zero(4, 3)}, ens, metric, 100, 1));

  // x = 0: zero velocity within error bars
  const McFlowResult r = mc_avg_flow({0.5, Coords::Zero(4, 3)}, ens, metric, 20000, 3);
  CHECK((r.velocity.cwiseAbs().array() <= 4.0 * r.std_error.array() + 1e-12).all());

  // doubling samples shrinks the error bars by about sqrt(2)
  const Coords x = centered(rng.normal_coords(4));
  const McFlowResult a = mc_avg_flow({0.4, x}, ens, metric, 30000, 5);
  const McFlowResult b = mc_avg_flow({0.4, x}, ens, metric, 60000, 5);
  const double ratio = a.std_error.mean() / b.std_error.mean();
  CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("harmonic_metric_apply examples and dense oracle") {
  const MoleculeGraph g2 = path_graph(2);
  Eigen::VectorXd u(2), v(2);
  u << 1, -1;
  v << 1, -1;
  CHECK(harmonic_metric_apply(g2, u, v, 1.0) == doctest::Approx(4.0));

  // constant vectors sit in the Laplacian null space
  Eigen::VectorXd c = Eigen::VectorXd::Constant(2, 2.5);
  CHECK(std::abs(harmonic_metric_apply(g2, c, c, 0.7)) < 1e-14);

  Rng rng(27, "laplacian");
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 6;
    std::vector<Edge> edges;
    for (int i = 1; i < n; ++i)
      edges.push_back({static_cast<int>(rng.uniform_int(0, i - 1)), i, BondType::Single});
    const MoleculeGraph g = make_graph(n, std::vector<int>(n, 0), edges);
    const Eigen::MatrixXd l = oracles::dense_laplacian(n, g.edges);
    Eigen::VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    const double st = 0.8;
    CHECK(harmonic_metric_apply(g, a, b, st) ==
          doctest::Approx(a.dot(l * b) / (st * st)).epsilon(1e-12));
  }
}

TEST_CASE("harmonic target equals Euclidean under the identity-form hook") {
  Rng rng(28, "hook");
  const int n = 5;
  const MoleculeGraph g = path_graph(n);
  const ConformerEnsemble ens = random_ensemble(n, 2, rng);
  const Coords x = centered(rng.normal_coords(n));

  MetricSpec harmonic = MetricSpec::harmonic(g);
  harmonic.identity_laplacian = true;
  const MetricSpec euclid = MetricSpec::euclidean();
  const Coords u1 = avg_flow_target({0.3, x}, ens, harmonic);
  const Coords u2 = avg_flow_target({0.3, x}, ens, euclid);
  CHECK((u1 - u2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("harmonic metric agrees between closed form and MC") {
  Rng rng(29, "harm_mc");
  const int n = 5;
  const MoleculeGraph g = path_graph(n);
  const ConformerEnsemble ens = random_ensemble(n, 2, rng);
  const MetricSpec metric = MetricSpec::harmonic(g);
  const Coords x0 = sample_prior(n, rng);
  const Coords x1 = ens.conformers[0] * rng.rotation().transpose();
  const FlowQuery q{0.5, linear_interpolant(x0, x1, 0.5)};
  const Coords u = avg_flow_target(q, ens, metric);
  const McFlowResult mc = mc_avg_flow(q, ens, metric, 60000, 17);
  const double z =
      ((u - mc.velocity).cwiseAbs().cwiseQuotient(mc.std_error.cwiseMax(1e-300)))
          .maxCoeff();
  CHECK(z <= 3.5);
}

TEST_CASE("batched target: parallel kernel bit-identical to serial reference") {
  Rng rng(30, "batch");
  const ConformerEnsemble ens = random_ensemble(6, 3, rng);
  const MetricSpec metric = MetricSpec::euclidean();
  std::vector<Coords> xs;
  for (int i = 0; i < 24; ++i) xs.push_back(centered(rng.normal_coords(6)));
  std::vector<TargetJob> jobs;
  for (const Coords& x : xs)
    jobs.push_back(TargetJob{FlowQuery{0.45, x}, &ens, &metric});
  std::vector<Coords> serial(jobs.size()), parallel(jobs.size());
  avg_flow_target_batch_serial(jobs, serial);
  avg_flow_target_batch(jobs, parallel);
  for (std::size_t i = 0; i < jobs.size(); ++i)
    CHECK((serial[i].array() == parallel[i].array()).all());
}
