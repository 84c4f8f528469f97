#include <doctest.h>

#include <cmath>
#include <vector>

#include "avgflow/evaluation.hpp"
#include "avgflow/rng.hpp"

using namespace avgflow;

TEST_CASE("rmsd_kabsch basics") {
  Rng rng(101, "rmsd");
  const Coords a = centered(rng.normal_coords(6));

  // rotated copy -> 0
  const Eigen::Matrix3d r = rng.rotation();
  CHECK(rmsd_kabsch(a, a * r.transpose()) < 1e-8);

  // uniform translation removed by centering
  Coords b = a;
  b.rowwise() += Eigen::RowVector3d(1.0, -2.0, 0.5);
  CHECK(rmsd_kabsch(a, b) < 1e-10);

  CHECK_THROWS(rmsd_kabsch(a, Coords::Zero(5, 3)));
}

TEST_CASE("rmsd_kabsch never exceeds a rotation-grid minimum") {
  Rng rng(102, "rmsdgrid");
  for (int trial = 0; trial < 5; ++trial) {
    const Coords a = centered(rng.normal_coords(5));
    const Coords b = centered(rng.normal_coords(5));
    const double kab = rmsd_kabsch(a, b);
    Rng grid(103, "grid", static_cast<std::uint64_t>(trial));
    double best = 1e300;
    for (int i = 0; i < 20000; ++i) {
      const Eigen::Matrix3d r = grid.rotation();
      best = std::min(best, std::sqrt((a - b * r.transpose()).squaredNorm() / 5.0));
    }
    CHECK(kab <= best + 1e-12);
  }
}

TEST_CASE("coverage_amr hand-computed cases") {
  Rng rng(104, "cov");
  const Coords c = centered(rng.normal_coords(5));

  // identical sets, delta > 0
  {
    std::vector<Coords> gen = {c, c};
    std::vector<Coords> truth = {c, c};
    const MetricReport rep = coverage_amr(gen, truth, 0.5);
    CHECK(rep.cov_p == 100.0);
    CHECK(rep.cov_r == 100.0);
    CHECK(rep.amr_p < 1e-10);
    CHECK(rep.amr_r < 1e-10);
    CHECK(rep.k == 2);
    CHECK(rep.l == 2);
  }

  // truth = {C}, generated = {C, C_far} with rmsd d > delta
  {
    Coords far = c;
    far(0, 0) += 4.0;
    far = centered(far);
    const double d = rmsd_kabsch(far, c);
    const double delta = 0.5 * d;
    std::vector<Coords> gen = {c, far};
    std::vector<Coords> truth = {c};
    const MetricReport rep = coverage_amr(gen, truth, delta);
    CHECK(rep.cov_p == doctest::Approx(50.0));
    CHECK(rep.amr_p == doctest::Approx(d / 2.0).epsilon(1e-9));
    CHECK(rep.cov_r == doctest::Approx(100.0));
    CHECK(rep.amr_r == doctest::Approx(0.0).epsilon(1e-9));
  }

  // delta = 0: strict inequality counts nothing short of exact matches
  {
    Coords nudged = c;
    nudged(0, 0) += 1e-3;
    std::vector<Coords> gen = {nudged};
    std::vector<Coords> truth = {c};
    const MetricReport rep = coverage_amr(gen, truth, 0.0);
    CHECK(rep.cov_p == 0.0);
    CHECK(rep.cov_r == 0.0);
  }
}

TEST_CASE("coverage_amr invariant under per-conformer rigid motions") {
  Rng rng(105, "covinv");
  std::vector<Coords> gen, truth;
  for (int i = 0; i < 3; ++i) gen.push_back(centered(rng.normal_coords(5)));
  for (int i = 0; i < 2; ++i) truth.push_back(centered(rng.normal_coords(5)));
  const MetricReport base = coverage_amr(gen, truth, 0.9);

  std::vector<Coords> gen2, truth2;
  for (const Coords& g : gen) {
    Coords moved = g * rng.rotation().transpose();
    moved.rowwise() += Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
    gen2.push_back(moved);
  }
  for (const Coords& t : truth) {
    Coords moved = t * rng.rotation().transpose();
    moved.rowwise() += Eigen::RowVector3d(rng.normal(), rng.normal(), rng.normal());
    truth2.push_back(moved);
  }
  const MetricReport rep = coverage_amr(gen2, truth2, 0.9);
  CHECK(rep.cov_p == doctest::Approx(base.cov_p));
  CHECK(rep.cov_r == doctest::Approx(base.cov_r));
  CHECK(rep.amr_p == doctest::Approx(base.amr_p).epsilon(1e-7));
  CHECK(rep.amr_r == doctest::Approx(base.amr_r).epsilon(1e-7));
}

TEST_CASE("adding truth conformers: AMR-P nonincreasing, COV-P nondecreasing") {
  Rng rng(106, "covmono");
  std::vector<Coords> gen;
  for (int i = 0; i < 4; ++i) gen.push_back(centered(rng.normal_coords(5)));
  std::vector<Coords> truth = {centered(rng.normal_coords(5))};
  MetricReport prev = coverage_amr(gen, truth, 0.8);
  for (int add = 0; add < 3; ++add) {
    truth.push_back(centered(rng.normal_coords(5)));
    const MetricReport rep = coverage_amr(gen, truth, 0.8);
    CHECK(rep.amr_p <= prev.amr_p + 1e-12);
    CHECK(rep.cov_p >= prev.cov_p - 1e-12);
    prev = rep;
  }
}

TEST_CASE("rmsd_matrix parallel kernel matches the serial reference") {
  Rng rng(107, "rmsdpar");
  std::vector<Coords> a, b;
  for (int i = 0; i < 7; ++i) a.push_back(centered(rng.normal_coords(6)));
  for (int i = 0; i < 5; ++i) b.push_back(centered(rng.normal_coords(6)));
  const Eigen::MatrixXd m1 = rmsd_matrix_serial(a, b);
  const Eigen::MatrixXd m2 = rmsd_matrix(a, b);
  CHECK((m1.array() == m2.array()).all());
}

TEST_CASE("report table renders") {
  MetricReport rep;
  rep.cov_r = 87.5;
  rep.cov_p = 62.5;
  rep.amr_r = 0.31;
  rep.amr_p = 0.55;
  rep.k = 8;
  rep.l = 4;
  const std::string table = report_table(rep);
  CHECK(table.find("COV-R") != std::string::npos);
  CHECK(table.find("87.50") != std::string::npos);
}
