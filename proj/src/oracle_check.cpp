#include "avgflow/oracle_check.hpp"

#include <stdexcept>

#include "avgflow/interpolants.hpp"
#include "avgflow/rng.hpp"

namespace avgflow {

OracleCheckReport run_oracle_check(const Dataset& ds, int instances, int samples,
                                   std::uint64_t seed, double fault_scale,
                                   int quad_nodes, double z_threshold) {
  if (ds.molecules.empty()) throw std::invalid_argument("oracle_check: empty dataset");
  if (instances < 1) throw std::invalid_argument("oracle_check: instances must be >= 1");

  constexpr double kTimes[] = {0.2, 0.5, 0.8};
  OracleCheckReport report;

  for (int i = 0; i < instances; ++i) {
    Rng rng(seed, "oracle_check", static_cast<std::uint64_t>(i));
    const int mi = static_cast<int>(rng.uniform_int(0, ds.molecules.size() - 1));
    const Molecule& mol = ds.molecules[mi];
    const int n = mol.graph.n_atoms;

    OracleCheckInstance inst;
    inst.molecule = mi;
    inst.t = kTimes[i % 3];
    inst.metric = (i % 2 == 0) ? MetricSpec::Kind::Euclidean : MetricSpec::Kind::Harmonic;
    const MetricSpec metric = inst.metric == MetricSpec::Kind::Euclidean
                                  ? MetricSpec::euclidean()
                                  : MetricSpec::harmonic(mol.graph);

    // On-path query: linear interpolant toward a rotated conformer keeps the
    // Monte-Carlo importance weights well conditioned at large t.
    const Coords x0 = sample_prior(n, rng);
    const int k = static_cast<int>(rng.uniform_int(0, mol.ensemble.size() - 1));
    const Eigen::Matrix3d r = rng.rotation();
    const Coords x1 = mol.ensemble.conformers[k] * r.transpose();
    const FlowQuery q{inst.t, linear_interpolant(x0, x1, inst.t)};

    Coords closed = avg_flow_target(q, mol.ensemble, metric, quad_nodes);
    closed *= fault_scale;
    const McFlowResult mc =
        mc_avg_flow(q, mol.ensemble, metric, samples, rng.next_u64());

    inst.ess = mc.effective_samples;
    inst.max_z = ((closed - mc.velocity).cwiseAbs().cwiseQuotient(
                      mc.std_error.cwiseMax(1e-300)))
                     .maxCoeff();
    report.max_z = std::max(report.max_z, inst.max_z);
    report.instances.push_back(inst);
  }
  report.pass = report.max_z <= z_threshold;
  return report;
}

}  // namespace avgflow
