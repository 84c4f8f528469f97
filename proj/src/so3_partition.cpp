#include "avgflow/so3_partition.hpp"

#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace avgflow::so3 {

namespace {

// 16-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 16> kGlX = {
    -9.89400934991649938510e-01, -9.44575023073232600268e-01,
    -8.65631202387831755196e-01, -7.55404408355002998654e-01,
    -6.17876244402643770570e-01, -4.58016777657227369680e-01,
    -2.81603550779258915426e-01, -9.50125098376374543907e-02,
    9.50125098376374543907e-02,  2.81603550779258915426e-01,
    4.58016777657227369680e-01,  6.17876244402643770570e-01,
    7.55404408355002998654e-01,  8.65631202387831755196e-01,
    9.44575023073232600268e-01,  9.89400934991649938510e-01};
constexpr std::array<double, 16> kGlW = {
    2.71524594117540374327e-02, 6.22535239386477062817e-02,
    9.51585116824925913992e-02, 1.24628971255534029550e-01,
    1.49595988816576763725e-01, 1.69156519395002619133e-01,
    1.82603415044923611532e-01, 1.89450610455068585436e-01,
    1.89450610455068585436e-01, 1.82603415044923611532e-01,
    1.69156519395002619133e-01, 1.49595988816576763725e-01,
    1.24628971255534029550e-01, 9.51585116824925913992e-02,
    6.22535239386477062817e-02, 2.71524594117540374327e-02};

void require_finite_spectrum(double s1, double s2, double s3) {
  if (!std::isfinite(s1) || !std::isfinite(s2) || !std::isfinite(s3))
    throw std::invalid_argument("so3: non-finite spectrum");
}

// Integrand of factor() in exponentially scaled form: every exp() argument is
// nonpositive when s2 >= |s3|, so no intermediate overflows.
inline double integrand(double x, bool add_x, double a, double b21, double b22) {
  const double head = add_x ? (1.0 - 2.0 * x) : 1.0;
  return head * bessel0_scaled(b21 * x) * bessel0_scaled(b22 * (1.0 - x)) *
         std::exp(-a * x);
}

double gl_run(const std::vector<double>& breaks, bool add_x, double a,
              double b21, double b22, int subdiv) {
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    const double w = (breaks[p + 1] - breaks[p]) / subdiv;
    for (int s = 0; s < subdiv; ++s) {
      const double lo = breaks[p] + s * w;
      const double mid = lo + 0.5 * w;
      const double half = 0.5 * w;
      double acc = 0.0;
      for (int i = 0; i < 16; ++i)
        acc += kGlW[i] * integrand(mid + half * kGlX[i], add_x, a, b21, b22);
      total += half * acc;
    }
  }
  return total;
}

// Uniform panels on [0, 1]; adequate while the exp(-a x) weight is mild.
double factor_direct(bool add_x, double a, double b21, double b22, int nodes) {
  const int panels = std::max(1, nodes / 16);
  std::vector<double> breaks = {0.0, 1.0};
  return gl_run(breaks, add_x, a, b21, b22, panels);
}

// Panels graded toward x = 0 where exp(-a x) concentrates the mass: widths
// 1/a, 2/a, 4/a, ... doubling out to 1.
double factor_graded(bool add_x, double a, double b21, double b22, int nodes) {
  const double a_ = std::max(a, 0.5);
  std::vector<double> breaks = {0.0};
  double w = 1.0 / a_;
  while (breaks.back() + w < 1.0) {
    breaks.push_back(breaks.back() + w);
    w *= 2.0;
  }
  breaks.push_back(1.0);
  const int panels = static_cast<int>(breaks.size()) - 1;
  const int subdiv = std::max(1, nodes / (16 * panels));
  return gl_run(breaks, add_x, a, b21, b22, subdiv);
}

}  // namespace

double bessel0_scaled(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("bessel0_scaled: non-finite input");
  // Abramowitz & Stegun 9.8.1 / 9.8.2 polynomial fits.
  constexpr std::array<double, 7> pa = {1.0,       3.5156229, 3.0899424,
                                        1.2067492, 0.2659732, 0.360768e-1,
                                        0.45813e-2};
  constexpr std::array<double, 9> pb = {0.39894228,   0.1328592e-1, 0.225319e-2,
                                        -0.157565e-2, 0.916281e-2,  -0.2057706e-1,
                                        0.2635537e-1, -0.1647633e-1, 0.392377e-2};
  const double ax = std::abs(x);
  if (ax <= 3.75) {
    const double t = (ax / 3.75) * (ax / 3.75);
    double acc = 0.0;
    for (int i = 6; i >= 0; --i) acc = acc * t + pa[i];
    return acc * std::exp(-ax);
  }
  const double t = 3.75 / ax;
  double acc = 0.0;
  for (int i = 8; i >= 0; --i) acc = acc * t + pb[i];
  return acc / std::sqrt(ax);
}

SignedSpectrum signed_svdvals(const Mat3& f) { return signed_svd(f).s; }

SignedSvd signed_svd(const Mat3& f) {
  if (!f.allFinite()) throw std::invalid_argument("signed_svd: non-finite matrix");
  Eigen::JacobiSVD<Mat3> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success)
    throw std::runtime_error("signed_svd: SVD did not converge");
  SignedSvd out;
  out.u = svd.matrixU();
  out.v = svd.matrixV();
  const Eigen::Vector3d sv = svd.singularValues();
  // det(F) = det(U V^T) * prod(singular values); zero determinant keeps +1.
  out.sign = ((out.u * out.v.transpose()).determinant() < 0.0) ? -1.0 : 1.0;
  out.s = SignedSpectrum{sv(0), sv(1), out.sign * sv(2)};
  return out;
}

double factor(bool add_x, double s1, double s2, double s3, int nodes) {
  require_finite_spectrum(s1, s2, s3);
  const double a = 2.0 * (s3 + s1);
  if (!std::isfinite(a) || 1.0 / std::max(a, 0.5) == 0.0)
    throw std::invalid_argument("factor: spectrum too large for the quadrature");
  const double b21 = s2 - s3;
  const double b22 = s2 + s3;
  return a > 1.0 ? factor_graded(add_x, a, b21, b22, nodes)
                 : factor_direct(add_x, a, b21, b22, nodes);
}

FactorBranches factor_branches(bool add_x, double s1, double s2, double s3,
                               int nodes) {
  require_finite_spectrum(s1, s2, s3);
  const double a = 2.0 * (s3 + s1);
  const double b21 = s2 - s3;
  const double b22 = s2 + s3;
  return FactorBranches{factor_direct(add_x, a, b21, b22, nodes),
                        factor_graded(add_x, a, b21, b22, nodes)};
}

double logcf(const SignedSpectrum& s, int nodes) {
  const double f = factor(false, s.s1, s.s2, s.s3, nodes);
  if (!(f > 0.0)) {
    std::ostringstream msg;
    msg << "logcf: factor underflowed to " << f << " at spectrum (" << s.s1
        << ", " << s.s2 << ", " << s.s3 << ")";
    throw std::runtime_error(msg.str());
  }
  return s.s1 + s.s2 + s.s3 + std::log(f);
}

Eigen::Vector3d grad_logcf(const SignedSpectrum& s, int nodes) {
  const double f = factor(false, s.s1, s.s2, s.s3, nodes);
  if (f == 0.0) throw std::runtime_error("grad_logcf: zero factor");
  // The integral is symmetric under permutations that keep the trailing pair
  // ordered with p >= |q|, so each component reuses factor() with its own
  // entry leading and the remaining two as the pair.
  return Eigen::Vector3d(factor(true, s.s1, s.s2, s.s3, nodes) / f,
                         factor(true, s.s2, s.s1, s.s3, nodes) / f,
                         factor(true, s.s3, s.s1, s.s2, nodes) / f);
}

double logcF(const Mat3& f, int nodes) { return logcf(signed_svdvals(f), nodes); }

Mat3 grad_logcF(const Mat3& f, int nodes, bool* near_degenerate) {
  const SignedSvd dec = signed_svd(f);
  if (near_degenerate) {
    const double scale = std::max(1.0, dec.s.s1);
    *near_degenerate = (dec.s.s1 - dec.s.s2 < 1e-7 * scale) ||
                       (dec.s.s2 - std::abs(dec.s.s3) < 1e-7 * scale);
  }
  Eigen::Vector3d g = grad_logcf(dec.s, nodes);
  g(2) *= dec.sign;  // chain rule through the sign flip on s3
  return dec.u * g.asDiagonal() * dec.v.transpose();
}

}  // namespace avgflow::so3
