#include "avgflow/flow_target.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "avgflow/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace avgflow {

namespace {

double clamped_time(double t) {
  if (t >= 1.0) throw std::invalid_argument("avg_flow_target: t must be < 1");
  if (t < 0.0) throw std::invalid_argument("avg_flow_target: t must be >= 0");
  return std::min(t, kMaxTargetTime);
}

void check_query(const FlowQuery& q, const ConformerEnsemble& ensemble,
                 const MetricSpec& metric) {
  if (ensemble.size() == 0) throw std::invalid_argument("avg_flow_target: empty ensemble");
  if (q.x.rows() != ensemble.n_atoms())
    throw std::invalid_argument("avg_flow_target: query/ensemble atom count mismatch");
  if (!q.x.allFinite()) throw std::invalid_argument("avg_flow_target: non-finite query");
  metric.validate(ensemble.n_atoms());
}

}  // namespace

double weighted_logsumexp(std::span<const double> values,
                          std::span<const double> weights) {
  if (values.empty()) throw std::invalid_argument("logsumexp: empty input");
  const bool weighted = !weights.empty();
  if (weighted && weights.size() != values.size())
    throw std::invalid_argument("logsumexp: length mismatch");

  double amax = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weighted) {
      if (weights[i] < 0.0) throw std::invalid_argument("logsumexp: negative weight");
      if (weights[i] == 0.0) continue;
    }
    amax = std::max(amax, values[i]);
    any = true;
  }
  if (!any) throw std::invalid_argument("logsumexp: all weights zero");
  if (!std::isfinite(amax)) amax = 0.0;

  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weighted && weights[i] == 0.0) continue;
    const double e = std::exp(values[i] - amax);
    sum += weighted ? weights[i] * e : e;
  }
  return std::log(sum) + amax;
}

Coords avg_flow_target(const FlowQuery& q, const ConformerEnsemble& ensemble,
                       const MetricSpec& metric, int quad_nodes) {
  check_query(q, ensemble, metric);
  const double t = clamped_time(q.t);
  const int n = ensemble.n_atoms();
  const int nconf = ensemble.size();

  // Sigma x / sigma_t^2 is shared by every conformer's coupling matrix.
  const Coords sx = metric.apply_columns(q.x, t);
  const double xx = q.x.cwiseProduct(sx).sum();  // <x, x>_Sigma / sigma_t^2

  std::vector<double> logs(nconf, -std::numeric_limits<double>::infinity());
  std::vector<so3::SignedSvd> decs(nconf);
  for (int k = 0; k < nconf; ++k) {
    if (ensemble.weights(k) == 0.0) continue;
    const Coords& xh = ensemble.conformers[k];
    const so3::Mat3 f = t * (xh.transpose() * sx);
    const double c = 0.5 * (xx + t * t * metric.inner(xh, xh, t));
    decs[k] = so3::signed_svd(f);
    logs[k] = so3::logcf(decs[k].s, quad_nodes) - c;
  }

  // Posterior over conformers = softmax of the per-conformer log-partitions.
  double amax = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < nconf; ++k)
    if (ensemble.weights(k) > 0.0) amax = std::max(amax, logs[k]);
  double z = 0.0;
  Coords avg_x1 = Coords::Zero(n, 3);
  for (int k = 0; k < nconf; ++k) {
    const double w = ensemble.weights(k);
    if (w == 0.0) continue;
    const double p = w * std::exp(logs[k] - amax);
    z += p;
    Eigen::Vector3d g = so3::grad_logcf(decs[k].s, quad_nodes);
    g(2) *= decs[k].sign;
    const so3::Mat3 grad = decs[k].u * g.asDiagonal() * decs[k].v.transpose();
    avg_x1 += p * (ensemble.conformers[k] * grad);
  }
  avg_x1 /= z;

  return (avg_x1 - q.x) / (1.0 - t);
}

McFlowResult mc_avg_flow(const FlowQuery& q, const ConformerEnsemble& ensemble,
                         const MetricSpec& metric, int num_samples,
                         std::uint64_t seed) {
  check_query(q, ensemble, metric);
  if (num_samples < 1000)
    throw std::invalid_argument("mc_avg_flow: num_samples must be >= 1000");
  const double t = clamped_time(q.t);
  const int n = ensemble.n_atoms();
  const int nconf = ensemble.size();

  // Stage 1: scan for the maximum log weight so the accumulation pass can
  // factor it out. Rotations are regenerated in stage 2 from the same stream.
  double max_logw = -std::numeric_limits<double>::infinity();
  for (int pass = 0; pass < 2; ++pass) {
    Rng rng(seed, "mc_rotations");
    Coords sum_a = Coords::Zero(n, 3);
    Coords sum_aa = Coords::Zero(n, 3);
    Coords sum_ab = Coords::Zero(n, 3);
    double sum_b = 0.0, sum_bb = 0.0;
    double pass_max = -std::numeric_limits<double>::infinity();

    for (int m = 0; m < num_samples; ++m) {
      const Eigen::Matrix3d r = rng.rotation();
      double b = 0.0;
      Coords a = Coords::Zero(n, 3);
      for (int k = 0; k < nconf; ++k) {
        const double wk = ensemble.weights(k);
        if (wk == 0.0) continue;
        const Coords xr = ensemble.conformers[k] * r.transpose();
        const Coords d = q.x - t * xr;
        const double logw =
            -0.5 * metric.inner(d, d, t) + std::log(wk);
        pass_max = std::max(pass_max, logw);
        if (pass == 0) continue;
        const double w = std::exp(logw - max_logw);
        b += w;
        a += w * ((xr - q.x) / (1.0 - t));
      }
      if (pass == 1) {
        sum_a += a;
        sum_aa += a.cwiseProduct(a);
        sum_b += b;
        sum_bb += b * b;
        sum_ab += a * b;
      }
    }
    if (pass == 0) {
      max_logw = pass_max;
      continue;
    }

    const double ess = sum_b * sum_b / sum_bb;
    if (ess < 10.0)
      throw std::runtime_error(
          "mc_avg_flow: effective sample size below 10; increase num_samples");

    McFlowResult res;
    res.velocity = sum_a / sum_b;
    res.effective_samples = ess;
    const double mmean = static_cast<double>(num_samples);
    const double b_mean = sum_b / mmean;
    // var(a_c - u_c b) estimated from raw second moments; the mean of the
    // residual is identically zero.
    Coords var = (sum_aa - 2.0 * res.velocity.cwiseProduct(sum_ab) +
                  res.velocity.cwiseProduct(res.velocity) * sum_bb) /
                 mmean;
    res.std_error = (var.cwiseMax(0.0) / mmean).cwiseSqrt() / b_mean;
    return res;
  }
  throw std::logic_error("unreachable");
}

void avg_flow_target_batch_serial(std::span<const TargetJob> jobs,
                                  std::span<Coords> out, int quad_nodes) {
  if (jobs.size() != out.size())
    throw std::invalid_argument("target_batch: output size mismatch");
  for (std::size_t i = 0; i < jobs.size(); ++i)
    out[i] = avg_flow_target(jobs[i].query, *jobs[i].ensemble, *jobs[i].metric,
                             quad_nodes);
}

void avg_flow_target_batch(std::span<const TargetJob> jobs, std::span<Coords> out,
                           int quad_nodes) {
  if (jobs.size() != out.size())
    throw std::invalid_argument("target_batch: output size mismatch");
  const auto count = static_cast<std::int64_t>(jobs.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      out[i] = avg_flow_target(jobs[i].query, *jobs[i].ensemble, *jobs[i].metric,
                               quad_nodes);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace avgflow
