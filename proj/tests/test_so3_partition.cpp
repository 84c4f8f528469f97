#include <doctest.h>

#include <cmath>

#include "avgflow/rng.hpp"
#include "avgflow/so3_partition.hpp"
#include "oracles.hpp"

using namespace avgflow;
using so3::Mat3;
using so3::SignedSpectrum;

TEST_CASE("bessel0_scaled basics") {
  CHECK(so3::bessel0_scaled(0.0) == 1.0);
  // even in x
  for (double x : {0.3, 2.0, 3.75, 7.5, 29.0})
    CHECK(so3::bessel0_scaled(-x) == so3::bessel0_scaled(x));
  // strictly positive
  for (double x = 0.0; x <= 30.0; x += 0.37) CHECK(so3::bessel0_scaled(x) > 0.0);
  CHECK_THROWS(so3::bessel0_scaled(std::nan("")));
}

TEST_CASE("bessel0_scaled vs 40-term power series at x = 2") {
  const double ref = oracles::i0e_series_terms(2.0, 40);
  CHECK(so3::bessel0_scaled(2.0) == doctest::Approx(ref).epsilon(1e-7));
}

TEST_CASE("bessel0_scaled continuous across the 3.75 regime boundary") {
  const double lo = so3::bessel0_scaled(3.75 - 1e-8);
  const double hi = so3::bessel0_scaled(3.75 + 1e-8);
  CHECK(std::abs(lo - hi) <= 1e-6);
}

TEST_CASE("signed_svdvals identity and reflection") {
  SignedSpectrum s = so3::signed_svdvals(Mat3::Identity());
  CHECK(s.s1 == doctest::Approx(1.0));
  CHECK(s.s2 == doctest::Approx(1.0));
  CHECK(s.s3 == doctest::Approx(1.0));

  Mat3 refl = Mat3::Identity();
  refl(2, 2) = -1.0;
  s = so3::signed_svdvals(refl);
  CHECK(s.s1 == doctest::Approx(1.0));
  CHECK(s.s2 == doctest::Approx(1.0));
  CHECK(s.s3 == doctest::Approx(-1.0));
}

TEST_CASE("signed_svdvals vs independent eigendecomposition of F^T F") {
  Rng rng(11, "svdvals");
  for (int trial = 0; trial < 20; ++trial) {
    Mat3 f;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(i, j) = rng.normal();
    const SignedSpectrum s = so3::signed_svdvals(f);

    Eigen::SelfAdjointEigenSolver<Mat3> es(f.transpose() * f);
    Eigen::Vector3d sv = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();  // ascending
    const double sign = f.determinant() < 0.0 ? -1.0 : 1.0;
    CHECK(s.s1 == doctest::Approx(sv(2)).epsilon(1e-10));
    CHECK(s.s2 == doctest::Approx(sv(1)).epsilon(1e-10));
    CHECK(s.s3 == doctest::Approx(sign * sv(0)).epsilon(1e-10));
    CHECK(s.s1 >= s.s2);
    CHECK(s.s2 >= std::abs(s.s3) - 1e-12);
  }
  CHECK_THROWS(so3::signed_svdvals(Mat3::Constant(std::nan(""))));
}

TEST_CASE("signed SVD reconstructs F") {
  Rng rng(12, "svdrec");
  for (int trial = 0; trial < 10; ++trial) {
    Mat3 f;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(i, j) = rng.normal();
    const so3::SignedSvd d = so3::signed_svd(f);
    const Mat3 rec = d.u *
                     Eigen::Vector3d(d.s.s1, d.s.s2, std::abs(d.s.s3)).asDiagonal() *
                     d.v.transpose();
    CHECK((rec - f).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("factor trivial cases") {
  CHECK(so3::factor(false, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(so3::factor(true, 0, 0, 0)) < 1e-12);
}

TEST_CASE("factor vs adaptive quadrature oracle") {
  struct Case { bool add_x; double s1, s2, s3; };
  for (const auto& c : {Case{false, 3, 2, 1}, Case{false, 3, 2, -1},
                        Case{true, 3, 2, 1}, Case{false, 0.3, 0.2, 0.1},
                        Case{false, 20, 10, 5}, Case{false, 20, 19, -18}}) {
    const double mine = so3::factor(c.add_x, c.s1, c.s2, c.s3);
    const double ref = oracles::adaptive_quadrature(
        [&](double x) { return oracles::factor_integrand(x, c.add_x, c.s1, c.s2, c.s3); },
        0.0, 1.0, 1e-13);
    CHECK(mine == doctest::Approx(ref).epsilon(1e-6));
  }
}

TEST_CASE("factor branches agree around the a = 1 switch") {
  // a = 2 (s1 + s3) sweeps through the switch point.
  for (double a = 0.8; a <= 1.2; a += 0.02) {
    const double s1 = 0.45 * a, s3 = 0.05 * a, s2 = 0.4 * a;
    const auto br = so3::factor_branches(false, s1, s2, s3);
    CHECK(std::abs(br.direct - br.graded) / std::abs(br.direct) < 1e-4);
  }
}

TEST_CASE("logcf at the origin and against sinh(s)/s") {
  CHECK(std::abs(so3::logcf({0, 0, 0})) < 1e-6);
  for (double s : {0.5, 2.0, 5.0, 10.0}) {
    const double ref = std::log(std::sinh(s) / s);
    CHECK(so3::logcf({s, 0, 0}) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("logcf vs Monte-Carlo over uniform rotations") {
  Rng rng(404, "logcf_mc");
  for (const SignedSpectrum s : {SignedSpectrum{5, 0, 0}, SignedSpectrum{2, 1, -0.5}}) {
    const Eigen::Vector3d diag(s.s1, s.s2, s.s3);
    const int m = 1000000;
    // two passes: max for stability, then the shifted mean and its variance
    double mx = -1e300;
    {
      Rng r2 = rng;
      for (int i = 0; i < m; ++i) {
        const Eigen::Matrix3d rot = r2.rotation();
        mx = std::max(mx, diag.dot(rot.diagonal()));
      }
    }
    double sum = 0.0, sum2 = 0.0;
    {
      Rng r2 = rng;
      for (int i = 0; i < m; ++i) {
        const Eigen::Matrix3d rot = r2.rotation();
        const double w = std::exp(diag.dot(rot.diagonal()) - mx);
        sum += w;
        sum2 += w * w;
      }
    }
    const double mean = sum / m;
    const double se_mean = std::sqrt((sum2 / m - mean * mean) / m);
    const double est = std::log(mean) + mx;
    const double se = se_mean / mean;  // delta method on log
    const double mine = so3::logcf(s);
    CHECK(std::abs(mine - est) <= 3.0 * se);
  }
}

TEST_CASE("grad_logcf symmetry at symmetric spectra") {
  const Eigen::Vector3d g0 = so3::grad_logcf({0, 0, 0});
  CHECK(g0(0) == doctest::Approx(g0(1)).epsilon(1e-10));
  CHECK(g0(1) == doctest::Approx(g0(2)).epsilon(1e-10));
  CHECK(std::abs(g0(0)) < 1e-10);  // gradient vanishes at the origin

  const Eigen::Vector3d g1 = so3::grad_logcf({1, 1, 1});
  CHECK(g1(0) == doctest::Approx(g1(1)).epsilon(1e-8));
  CHECK(g1(1) == doctest::Approx(g1(2)).epsilon(1e-8));
}

TEST_CASE("grad_logcf matches central finite differences") {
  const SignedSpectrum s{4, 1, 0};
  const Eigen::Vector3d g = so3::grad_logcf(s);
  const double h = 1e-5;
  const Eigen::Vector3d fd(
      (so3::logcf({s.s1 + h, s.s2, s.s3}) - so3::logcf({s.s1 - h, s.s2, s.s3})) / (2 * h),
      (so3::logcf({s.s1, s.s2 + h, s.s3}) - so3::logcf({s.s1, s.s2 - h, s.s3})) / (2 * h),
      (so3::logcf({s.s1, s.s2, s.s3 + h}) - so3::logcf({s.s1, s.s2, s.s3 - h})) / (2 * h));
  for (int i = 0; i < 3; ++i)
    CHECK(g(i) == doctest::Approx(fd(i)).epsilon(1e-5));
}

TEST_CASE("logcf monotonically nondecreasing in s1") {
  for (double s2 : {0.0, 1.0, 3.0}) {
    for (double s3 : {-0.5, 0.0, 0.5}) {
      if (std::abs(s3) > s2) continue;
      double prev = -1e300;
      for (double s1 = std::max(s2, std::abs(s3)); s1 < 12.0; s1 += 0.5) {
        const double v = so3::logcf({s1, s2, s3});
        CHECK(v >= prev - 1e-9);
        prev = v;
      }
    }
  }
}

TEST_CASE("logcF basics and Haar invariance") {
  CHECK(std::abs(so3::logcF(Mat3::Zero())) < 1e-6);

  Rng rng(77, "haar");
  for (int trial = 0; trial < 10; ++trial) {
    Mat3 f;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(i, j) = 2.0 * rng.normal();
    const Mat3 r = rng.rotation();
    CHECK(so3::logcF(r * f) == doctest::Approx(so3::logcF(f)).epsilon(1e-10));
    CHECK(so3::logcF(f * r) == doctest::Approx(so3::logcF(f)).epsilon(1e-10));
  }
}

TEST_CASE("grad_logcF matches entrywise finite differences") {
  Rng rng(78, "gradF");
  for (int trial = 0; trial < 5; ++trial) {
    Mat3 f;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(i, j) = 2.0 * rng.normal();
    // keep singular values well separated
    const SignedSpectrum s = so3::signed_svdvals(f);
    if (s.s1 - s.s2 < 0.3 || s.s2 - std::abs(s.s3) < 0.3) continue;

    bool degenerate = true;
    const Mat3 g = so3::grad_logcF(f, so3::kDefaultQuadNodes, &degenerate);
    CHECK_FALSE(degenerate);
    const double h = 1e-5;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Mat3 fp = f, fm = f;
        fp(i, j) += h;
        fm(i, j) -= h;
        const double fd = (so3::logcF(fp) - so3::logcF(fm)) / (2 * h);
        CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("grad_logcF orbit tangent directional derivative vanishes") {
  Rng rng(79, "orbit");
  Mat3 f;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f(i, j) = rng.normal();
  const Mat3 g = so3::grad_logcF(f);
  // left-rotation orbit tangents: F -> W F for skew W
  for (int axis = 0; axis < 3; ++axis) {
    Mat3 w = Mat3::Zero();
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    w(a, b) = 1.0;
    w(b, a) = -1.0;
    const double dir = (g.transpose() * (w * f)).trace();
    CHECK(std::abs(dir) < 1e-8);
  }
}

TEST_CASE("so3 operations are pure: repeat calls bit-identical") {
  const SignedSpectrum s{3.3, 1.7, -0.4};
  CHECK(so3::logcf(s) == so3::logcf(s));
  CHECK(so3::factor(true, 2, 1, 0.5) == so3::factor(true, 2, 1, 0.5));
  Mat3 f;
  f << 1, 2, 0, -1, 0.5, 3, 0.2, 0.1, -2;
  CHECK(so3::logcF(f) == so3::logcF(f));
  const Mat3 g1 = so3::grad_logcF(f), g2 = so3::grad_logcF(f);
  CHECK((g1.array() == g2.array()).all());
}

TEST_CASE("logcf rejects spectra beyond the quadrature range") {
  CHECK_THROWS((void)so3::logcf({1e308, 0, 0}));
}
