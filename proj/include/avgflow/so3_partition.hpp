#ifndef AVGFLOW_SO3_PARTITION_HPP
#define AVGFLOW_SO3_PARTITION_HPP

#include <Eigen/Dense>

namespace avgflow::so3 {

using Mat3 = Eigen::Matrix3d;

// Singular values of a 3x3 matrix F sorted descending, with the smallest
// one's sign flipped to sign(det F). Every F with spectrum (s1, s2, s3)
// satisfies s1 >= s2 >= |s3|.
struct SignedSpectrum {
  double s1 = 0.0;
  double s2 = 0.0;
  double s3 = 0.0;
};

// Full decomposition F = u * diag(s1, s2, sign * s3) * v^T with u, v proper
// factors from the SVD; `sign` records the det flip applied to s3.
struct SignedSvd {
  Mat3 u;
  Mat3 v;
  SignedSpectrum s;
  double sign = 1.0;
};

// Quadrature budget (total integrand evaluations per branch). 512 keeps
// parity with the reference implementation; raise it for accuracy studies.
inline constexpr int kDefaultQuadNodes = 512;

// Exponentially scaled modified Bessel function I0(x) * exp(-|x|), valid for
// all finite x. Two polynomial regimes split at |x| = 3.75.
double bessel0_scaled(double x);

SignedSpectrum signed_svdvals(const Mat3& f);
SignedSvd signed_svd(const Mat3& f);

// factor(add_x, s1, s2, s3) =
//   integral_0^1 (1 - 2x)^{add_x} * I0((s2-s3) x) * I0((s2+s3)(1-x))
//                * exp(-(s2-s3) x - (s2+s3)(1-x) - 2 (s1+s3) x) dx
// The trailing pair must satisfy s2 >= |s3|; callers permuting arguments for
// the gradient keep that ordering.
double factor(bool add_x, double s1, double s2, double s3,
              int nodes = kDefaultQuadNodes);

// Both quadrature branches evaluated at the same spectrum regardless of the
// a = 2(s1+s3) switch; used to test agreement around the switch point.
struct FactorBranches {
  double direct = 0.0;  // branch used when a <= 1
  double graded = 0.0;  // branch used when a > 1
};
FactorBranches factor_branches(bool add_x, double s1, double s2, double s3,
                               int nodes = kDefaultQuadNodes);

// log integral_SO(3) exp(tr(F R^T)) dR for any F with the given signed
// spectrum. Haar measure normalized to total mass 1, so logcf(0,0,0) = 0.
double logcf(const SignedSpectrum& s, int nodes = kDefaultQuadNodes);

// d logcf / d(s1, s2, s3). Matches finite differences of logcf.
Eigen::Vector3d grad_logcf(const SignedSpectrum& s, int nodes = kDefaultQuadNodes);

double logcF(const Mat3& f, int nodes = kDefaultQuadNodes);

// d logcF / dF, assembled as u * diag(g) * v^T with the rotation factors of
// the SVD held fixed. Near-repeated singular values reduce the accuracy of
// the factor assignment; `near_degenerate` reports that condition when
// requested.
Mat3 grad_logcF(const Mat3& f, int nodes = kDefaultQuadNodes,
                bool* near_degenerate = nullptr);

}  // namespace avgflow::so3

#endif
