// Side-by-side timing of the OpenMP kernels against their serial reference
// implementations: batched target evaluation, the RMSD matrix, and batched
// loss gradients.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "avgflow/dataset.hpp"
#include "avgflow/evaluation.hpp"
#include "avgflow/flow_target.hpp"
#include "avgflow/rng.hpp"
#include "avgflow/training.hpp"

using namespace avgflow;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   t0)
      .count();
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %12.2f %12.2f %9.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif
  std::printf("%-28s %12s %12s %9s\n", "kernel", "serial_ms", "parallel_ms", "speedup");

  Rng rng(99, "bench_kernels");

  // Batched averaged-flow targets: 256 queries, 8 conformers, 24 atoms.
  {
    std::vector<Coords> confs;
    for (int c = 0; c < 8; ++c) confs.push_back(centered(rng.normal_coords(24)));
    ConformerEnsemble ens;
    ens.conformers = confs;
    ens.weights = Eigen::VectorXd::Ones(8);
    const MetricSpec metric = MetricSpec::euclidean();
    std::vector<Coords> queries;
    for (int b = 0; b < 256; ++b) queries.push_back(centered(rng.normal_coords(24)));
    std::vector<TargetJob> jobs;
    for (const Coords& q : queries)
      jobs.push_back(TargetJob{FlowQuery{0.5, q}, &ens, &metric});
    std::vector<Coords> out1(jobs.size()), out2(jobs.size());

    auto t0 = std::chrono::steady_clock::now();
    avg_flow_target_batch_serial(jobs, out1);
    const double ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    avg_flow_target_batch(jobs, out2);
    const double par = ms_since(t0);
    row("avg_flow_target_batch", ser, par);
    for (std::size_t i = 0; i < out1.size(); ++i)
      if (out1[i] != out2[i]) {
        std::printf("MISMATCH in target batch at %zu\n", i);
        return 1;
      }
  }

  // RMSD matrix: 128 x 128 at 24 atoms.
  {
    std::vector<Coords> a, b;
    for (int i = 0; i < 128; ++i) a.push_back(centered(rng.normal_coords(24)));
    for (int i = 0; i < 128; ++i) b.push_back(centered(rng.normal_coords(24)));
    auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd m1 = rmsd_matrix_serial(a, b);
    const double ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd m2 = rmsd_matrix(a, b);
    const double par = ms_since(t0);
    row("rmsd_matrix", ser, par);
    if (m1 != m2) {
      std::printf("MISMATCH in rmsd matrix\n");
      return 1;
    }
  }

  // Batched training gradients through a stage-1 epoch on a small dataset.
  {
    GenConfig gc;
    gc.n_molecules = 12;
    gc.seed = 3;
    const Dataset ds = gen_synthetic_dataset(gc);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 12;
    cfg.interpolant = InterpolantKind::linear();
    cfg.lr.warmup_steps = 1;
    cfg.seed = 3;

    auto t0 = std::chrono::steady_clock::now();
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    const TrainResult r1 = train_stage1(ds, cfg);
    const double ser = ms_since(t0);
#ifdef _OPENMP
    omp_set_num_threads(omp_get_num_procs());
#endif
    t0 = std::chrono::steady_clock::now();
    const TrainResult r2 = train_stage1(ds, cfg);
    const double par = ms_since(t0);
    row("train_stage1 (2 epochs)", ser, par);
    if (r1.net.params != r2.net.params) {
      std::printf("MISMATCH: training not thread-count invariant\n");
      return 1;
    }
  }

  std::printf("all parallel kernels match their serial references\n");
  return 0;
}
