#include "avgflow/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace avgflow {

namespace {

using Eigen::VectorXd;

MetricSpec build_metric(const TrainConfig& cfg, const MoleculeGraph& graph) {
  if (cfg.metric_kind == MetricSpec::Kind::Harmonic)
    return MetricSpec::harmonic(graph, cfg.sigma0, cfg.sigma1);
  return MetricSpec::euclidean(cfg.sigma0, cfg.sigma1);
}

struct ValInstance {
  int mol = 0;
  double t = 0.0;
  Coords x_t;
  Coords target;
};

// Fixed validation queries: linear-interpolant states with exact full-ensemble
// targets. Identical across objectives for a given seed, which makes
// objective comparisons read off the same ruler.
std::vector<ValInstance> build_validation(const Dataset& ds, const TrainConfig& cfg,
                                          const std::vector<int>& val_mols) {
  std::vector<ValInstance> out;
  for (const int mi : val_mols) {
    const Molecule& mol = ds.molecules[mi];
    const MetricSpec metric = build_metric(cfg, mol.graph);
    const int n = mol.graph.n_atoms;
    for (int q = 0; q < cfg.val_queries; ++q) {
      Rng rng(cfg.seed, "val_query", static_cast<std::uint64_t>(mi),
              static_cast<std::uint64_t>(q));
      ValInstance inst;
      inst.mol = mi;
      inst.t = rng.uniform(0.05, 0.95);
      const Coords x0 = sample_prior(n, rng);
      const int k = static_cast<int>(rng.uniform_int(0, mol.ensemble.size() - 1));
      const Eigen::Matrix3d r = rng.rotation();
      const Coords x1 = mol.ensemble.conformers[k] * r.transpose();
      inst.x_t = linear_interpolant(x0, x1, inst.t);
      inst.target = avg_flow_target(FlowQuery{inst.t, inst.x_t}, mol.ensemble,
                                    metric, cfg.quad_nodes);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

double validation_loss(const VectorFieldNet& net, const Dataset& ds,
                       const std::vector<ValInstance>& vals) {
  if (vals.empty()) return 0.0;
  double acc = 0.0;
  for (const ValInstance& v : vals) {
    const Coords pred = forward(net, ds.molecules[v.mol].graph, v.x_t, v.t);
    acc += (pred - v.target).squaredNorm() / v.target.rows();
  }
  return acc / static_cast<double>(vals.size());
}

double global_norm(const VectorXd& g) { return g.norm(); }

// Per-element gradients land in their own slots; the reduction below runs in
// index order so results do not depend on the worker count.
template <typename ElementFn>
LossGrad batched_loss(int count, Eigen::Index dim, const ElementFn& fn) {
  std::vector<LossGrad> slots(count);
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < count; ++i) {
    try {
      slots[i] = fn(i);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  LossGrad total{0.0, VectorXd::Zero(dim)};
  for (const LossGrad& s : slots) {
    total.loss += s.loss;
    total.grad += s.grad;
  }
  total.loss /= count;
  total.grad /= count;
  return total;
}

struct TrainState {
  VectorFieldNet net;
  AdamW opt;
  Ema ema;
  int step = 0;
};

[[noreturn]] void abort_divergence(int epoch, double loss, double initial) {
  std::ostringstream msg;
  msg << "training diverged at epoch " << epoch << ": loss " << loss << " exceeds 1000 x initial "
      << initial;
  throw std::runtime_error(msg.str());
}

}  // namespace

double sample_t(TSamplerKind kind, double lambda, Rng& rng) {
  const double u = rng.uniform();
  if (kind == TSamplerKind::Uniform) return u;
  if (lambda == 0.0)
    throw std::invalid_argument("sample_t: lambda must be nonzero for Exponential");
  return std::log1p(u * std::expm1(lambda)) / lambda;
}

double LrSchedule::at(int step, int total_steps) const {
  if (kind == Kind::Piecewise) {
    double rate = peak;
    for (const auto& [start, lr] : pieces)
      if (step >= start) rate = lr;
    return rate;
  }
  if (warmup_steps > 0 && step < warmup_steps)
    return peak * (step + 1) / static_cast<double>(warmup_steps);
  const int decay_span = std::max(1, total_steps - warmup_steps);
  const double frac = std::clamp(
      (step - warmup_steps) / static_cast<double>(decay_span), 0.0, 1.0);
  return end + 0.5 * (peak - end) * (1.0 + std::cos(M_PI * frac));
}

AdamW::AdamW(Eigen::Index dim, double weight_decay, double beta1, double beta2,
             double eps)
    : m_(VectorXd::Zero(dim)),
      v_(VectorXd::Zero(dim)),
      wd_(weight_decay),
      b1_(beta1),
      b2_(beta2),
      eps_(eps) {}

void AdamW::step(VectorXd& params, const VectorXd& grad, double lr) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1_, t_);
  const double c2 = 1.0 - std::pow(b2_, t_);
  const VectorXd mhat = m_ / c1;
  const VectorXd denom = ((v_ / c2).cwiseSqrt().array() + eps_).matrix();
  params -= lr * (mhat.cwiseQuotient(denom) + wd_ * params);
}

Ema::Ema(const VectorXd& init, double decay)
    : acc_(init), init_(init), decay_(decay) {
  if (decay <= 0.0 || decay >= 1.0)
    throw std::invalid_argument("ema: decay must be in (0, 1)");
}

void Ema::update(const VectorXd& params) {
  acc_ = decay_ * acc_ + (1.0 - decay_) * params;
  ++steps_;
}

VectorXd Ema::value(bool debias) const {
  if (!debias || steps_ == 0) return acc_;
  const double w0 = std::pow(decay_, steps_);
  return (acc_ - w0 * init_) / (1.0 - w0);
}

LossGrad velocity_loss(const VectorFieldNet& net, const MoleculeGraph& graph,
                       double t, const Coords& x_t, const Coords& target) {
  ForwardCache cache;
  const Coords pred = forward_cached(net, graph, x_t, t, cache);
  const Coords diff = pred - target;
  const double inv_n = 1.0 / static_cast<double>(x_t.rows());
  LossGrad out;
  out.loss = diff.squaredNorm() * inv_n;
  out.grad = backward(net, cache, (2.0 * inv_n) * diff);
  return out;
}

LossGrad avgflow_loss(const VectorFieldNet& net, const MoleculeGraph& graph,
                      const ConformerEnsemble& ensemble, const MetricSpec& metric,
                      double t, const Coords& x_t, int quad_nodes,
                      const VectorField* predictor_override) {
  const Coords target =
      avg_flow_target(FlowQuery{t, x_t}, ensemble, metric, quad_nodes);
  if (predictor_override) {
    const Coords pred = predictor_override->eval(x_t, t);
    LossGrad out;
    out.loss = (pred - target).squaredNorm() / static_cast<double>(x_t.rows());
    out.grad = VectorXd::Zero(net.params.size());
    return out;
  }
  return velocity_loss(net, graph, t, x_t, target);
}

void write_loss_curve_csv(const std::string& path,
                          const std::vector<LossCurveRow>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("loss curve: cannot open " + path);
  out << "epoch,train_loss,val_loss,lr\n";
  out.precision(17);
  for (const LossCurveRow& r : curve)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << '\n';
}

TrainResult train_stage1(const Dataset& ds, const TrainConfig& cfg) {
  if (ds.molecules.empty()) throw std::invalid_argument("train: empty dataset");
  cfg.model.validate();
  const int n_mols = static_cast<int>(ds.molecules.size());

  // Validation split fixed by seed.
  std::vector<int> order(n_mols);
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(cfg.seed, "val_split");
    for (int i = n_mols - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(0, i)]);
  }
  const int n_val = std::min(n_mols - 1, std::max(n_mols > 1 ? 1 : 0,
                             static_cast<int>(std::lround(cfg.val_fraction * n_mols))));
  std::vector<int> val_mols(order.begin(), order.begin() + n_val);
  std::vector<int> train_mols(order.begin() + n_val, order.end());
  if (train_mols.empty()) train_mols = {0};
  std::sort(val_mols.begin(), val_mols.end());
  std::sort(train_mols.begin(), train_mols.end());

  const std::vector<ValInstance> vals = build_validation(ds, cfg, val_mols);

  VectorFieldNet net0 = init_net(cfg.model, cfg.seed);
  Ema ema0(net0.params, cfg.ema_decay);
  TrainState st{std::move(net0), AdamW(param_count(cfg.model), cfg.weight_decay),
                std::move(ema0), 0};

  TrainResult result;
  result.val_molecules = val_mols;
  result.initial_val_loss = validation_loss(st.net, ds, vals);

  const int per_epoch = static_cast<int>(train_mols.size());
  const int steps_per_epoch = (per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = steps_per_epoch * cfg.epochs;
  double initial_train = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // One conformer per molecule per epoch (default subsampling mode).
    std::vector<int> conf_choice(n_mols, 0);
    for (int m = 0; m < n_mols; ++m) {
      Rng rng(cfg.seed, "epoch_conf", static_cast<std::uint64_t>(epoch),
              static_cast<std::uint64_t>(m));
      conf_choice[m] = static_cast<int>(rng.uniform_int(0, ds.molecules[m].ensemble.size() - 1));
    }
    std::vector<int> sched = train_mols;
    {
      Rng rng(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
      for (int i = static_cast<int>(sched.size()) - 1; i > 0; --i)
        std::swap(sched[i], sched[rng.uniform_int(0, i)]);
    }

    double epoch_loss = 0.0;
    int epoch_count = 0;
    for (int b = 0; b < steps_per_epoch; ++b) {
      const int lo = b * cfg.batch_size;
      const int hi = std::min<int>(lo + cfg.batch_size, per_epoch);
      const int count = hi - lo;

      const LossGrad batch = batched_loss(count, st.net.params.size(), [&](int i) {
        const int mi = sched[lo + i];
        const Molecule& mol = ds.molecules[mi];
        const MetricSpec metric = build_metric(cfg, mol.graph);
        const int n = mol.graph.n_atoms;
        Rng rng(cfg.seed, "train_elem", static_cast<std::uint64_t>(epoch),
                static_cast<std::uint64_t>(lo + i));

        const double t = sample_t(cfg.t_sampler, cfg.t_lambda, rng);
        const Coords x0 = sample_prior(n, rng);
        const int k = conf_choice[mi];
        const Eigen::Matrix3d raug =
            cfg.rotation_augment ? rng.rotation() : Eigen::Matrix3d::Identity();
        const Coords x1 = mol.ensemble.conformers[k] * raug.transpose();

        if (cfg.objective == Objective::AvgFlow) {
          const ConformerEnsemble sub = single_conformer(mol.ensemble, k);
          const ConformerEnsemble& eff = cfg.full_ensemble ? mol.ensemble : sub;
          Coords x_t;
          if (cfg.interpolant.kind == InterpolantKind::Kind::Linear)
            x_t = linear_interpolant(x0, x1, t);
          else
            x_t = integration_interpolant(x0, eff, metric, t, cfg.interpolant.steps,
                                          cfg.quad_nodes);
          return avgflow_loss(st.net, mol.graph, eff, metric, t, x_t, cfg.quad_nodes);
        }
        const BaselineTarget bt = baseline_target(
            cfg.objective == Objective::CondOT ? BaselineKind::CondOT
                                               : BaselineKind::KabschOT,
            x0, x1);
        const Coords x_t = linear_interpolant(x0, bt.x1, t);
        return velocity_loss(st.net, mol.graph, t, x_t, bt.velocity);
      });

      epoch_loss += batch.loss * count;
      epoch_count += count;

      VectorXd grad = batch.grad;
      const double gn = global_norm(grad);
      if (cfg.grad_clip > 0.0 && gn > cfg.grad_clip) grad *= cfg.grad_clip / gn;
      st.opt.step(st.net.params, grad, cfg.lr.at(st.step, total_steps));
      st.ema.update(st.net.params);
      ++st.step;
    }

    epoch_loss /= std::max(epoch_count, 1);
    if (initial_train < 0.0) initial_train = epoch_loss;
    if (initial_train > 0.0 && epoch_loss > 1e3 * initial_train)
      abort_divergence(epoch, epoch_loss, initial_train);

    LossCurveRow row;
    row.epoch = epoch;
    row.train_loss = epoch_loss;
    row.val_loss = validation_loss(st.net, ds, vals);
    row.lr = cfg.lr.at(st.step - 1, total_steps);
    result.curve.push_back(row);
  }

  result.final_val_loss = result.curve.empty() ? result.initial_val_loss
                                               : result.curve.back().val_loss;
  result.ema = st.ema.value(true);
  result.net = std::move(st.net);
  return result;
}

std::string net_id(const VectorXd& params) {
  const std::uint64_t h =
      fnv1a64(params.data(), sizeof(double) * static_cast<std::size_t>(params.size()));
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ReflowPairSet generate_reflow_pairs(const VectorFieldNet& teacher, const Dataset& ds,
                                    int steps, int pairs_per_graph,
                                    std::uint64_t seed, bool teacher_is_ema) {
  if (steps < 1) throw std::invalid_argument("reflow pairs: steps must be >= 1");
  if (pairs_per_graph < 1)
    throw std::invalid_argument("reflow pairs: pairs_per_graph must be >= 1");

  ReflowPairSet out;
  out.steps = steps;
  out.seed = seed;
  out.teacher_id = net_id(teacher.params);
  out.teacher_ema = teacher_is_ema;
  out.pairs.resize(static_cast<std::size_t>(ds.molecules.size()) * pairs_per_graph);

  std::exception_ptr err;
  const auto total = static_cast<std::int64_t>(out.pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    try {
      const int mi = static_cast<int>(idx / pairs_per_graph);
      const int p = static_cast<int>(idx % pairs_per_graph);
      const Molecule& mol = ds.molecules[mi];
      Rng rng(seed, "reflow_pair", static_cast<std::uint64_t>(mi),
              static_cast<std::uint64_t>(p));
      ReflowPair pair;
      pair.mol_index = mi;
      pair.x0 = sample_prior(mol.graph.n_atoms, rng);
      const Trajectory traj = euler_sample(teacher, mol.graph, pair.x0, steps);
      pair.x1 = traj.states.back();
      out.pairs[idx] = std::move(pair);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

void save_pairs(const ReflowPairSet& ps, const std::string& path) {
  nlohmann::ordered_json root;
  root["schema_version"] = 1;
  root["steps"] = ps.steps;
  root["seed"] = ps.seed;
  root["teacher_id"] = ps.teacher_id;
  root["teacher_ema"] = ps.teacher_ema;
  auto coords_json = [](const Coords& c) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (int i = 0; i < c.rows(); ++i) j.push_back({c(i, 0), c(i, 1), c(i, 2)});
    return j;
  };
  root["pairs"] = nlohmann::ordered_json::array();
  for (const ReflowPair& p : ps.pairs) {
    nlohmann::ordered_json jp;
    jp["mol"] = p.mol_index;
    jp["x0"] = coords_json(p.x0);
    jp["x1"] = coords_json(p.x1);
    root["pairs"].push_back(std::move(jp));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_pairs: cannot open " + path);
  out << root.dump(1) << "\n";
}

ReflowPairSet load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pairs: cannot open " + path);
  nlohmann::json root;
  in >> root;
  if (root.value("schema_version", 0) != 1)
    throw std::runtime_error("load_pairs: unsupported schema version");
  ReflowPairSet ps;
  ps.steps = root.at("steps").get<int>();
  ps.seed = root.at("seed").get<std::uint64_t>();
  ps.teacher_id = root.at("teacher_id").get<std::string>();
  ps.teacher_ema = root.at("teacher_ema").get<bool>();
  auto coords_from = [](const nlohmann::json& j) {
    Coords c(j.size(), 3);
    for (std::size_t i = 0; i < j.size(); ++i)
      for (int k = 0; k < 3; ++k) c(static_cast<int>(i), k) = j[i][k].get<double>();
    return c;
  };
  for (const auto& jp : root.at("pairs")) {
    ReflowPair p;
    p.mol_index = jp.at("mol").get<int>();
    p.x0 = coords_from(jp.at("x0"));
    p.x1 = coords_from(jp.at("x1"));
    ps.pairs.push_back(std::move(p));
  }
  return ps;
}

LossGrad reflow_pair_loss(const VectorFieldNet& net, const MoleculeGraph& graph,
                          const ReflowPair& pair, double t) {
  const Coords x_t = linear_interpolant(pair.x0, pair.x1, t);
  return velocity_loss(net, graph, t, x_t, pair.x1 - pair.x0);
}

namespace {

TrainResult train_on_pairs(const VectorFieldNet& init, const Dataset& ds,
                           const ReflowPairSet& pairs, const TrainConfig& cfg,
                           std::optional<double> fixed_t, const char* stream) {
  if (pairs.pairs.empty()) throw std::invalid_argument("train_on_pairs: empty pair set");
  const int n_pairs = static_cast<int>(pairs.pairs.size());

  // Hold out a fraction of pairs with fixed t draws as the validation set.
  std::vector<int> order(n_pairs);
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(cfg.seed, "pair_split");
    for (int i = n_pairs - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(0, i)]);
  }
  const int n_val = std::min(n_pairs - 1, std::max(1, static_cast<int>(std::lround(
                                              cfg.val_fraction * n_pairs))));
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) train_idx = val_idx;
  if (val_idx.empty()) val_idx = train_idx;

  std::vector<double> val_t(val_idx.size());
  for (std::size_t i = 0; i < val_idx.size(); ++i) {
    Rng rng(cfg.seed, "pair_val_t", static_cast<std::uint64_t>(i));
    val_t[i] = fixed_t ? *fixed_t : sample_t(cfg.t_sampler, cfg.t_lambda, rng);
  }
  auto val_loss = [&](const VectorFieldNet& net) {
    double acc = 0.0;
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
      const ReflowPair& p = pairs.pairs[val_idx[i]];
      const Coords x_t = linear_interpolant(p.x0, p.x1, val_t[i]);
      const Coords pred = forward(net, ds.molecules[p.mol_index].graph, x_t, val_t[i]);
      acc += (pred - (p.x1 - p.x0)).squaredNorm() / p.x0.rows();
    }
    return acc / static_cast<double>(val_idx.size());
  };

  TrainState st{init, AdamW(init.params.size(), cfg.weight_decay),
                Ema(init.params, cfg.ema_decay), 0};

  TrainResult result;
  result.initial_val_loss = val_loss(st.net);

  const int per_epoch = static_cast<int>(train_idx.size());
  const int steps_per_epoch = (per_epoch + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = steps_per_epoch * cfg.epochs;
  double initial_train = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> sched = train_idx;
    Rng rng(cfg.seed, std::string(stream) + "_shuffle", static_cast<std::uint64_t>(epoch));
    for (int i = static_cast<int>(sched.size()) - 1; i > 0; --i)
      std::swap(sched[i], sched[rng.uniform_int(0, i)]);

    double epoch_loss = 0.0;
    int epoch_count = 0;
    for (int b = 0; b < steps_per_epoch; ++b) {
      const int lo = b * cfg.batch_size;
      const int hi = std::min<int>(lo + cfg.batch_size, per_epoch);
      const int count = hi - lo;

      const LossGrad batch = batched_loss(count, st.net.params.size(), [&](int i) {
        const ReflowPair& p = pairs.pairs[sched[lo + i]];
        Rng erng(cfg.seed, std::string(stream) + "_elem",
                 static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(lo + i));
        const double t = fixed_t ? *fixed_t : sample_t(cfg.t_sampler, cfg.t_lambda, erng);
        return reflow_pair_loss(st.net, ds.molecules[p.mol_index].graph, p, t);
      });

      epoch_loss += batch.loss * count;
      epoch_count += count;
      VectorXd grad = batch.grad;
      const double gn = global_norm(grad);
      if (cfg.grad_clip > 0.0 && gn > cfg.grad_clip) grad *= cfg.grad_clip / gn;
      st.opt.step(st.net.params, grad, cfg.lr.at(st.step, total_steps));
      st.ema.update(st.net.params);
      ++st.step;
    }

    epoch_loss /= std::max(epoch_count, 1);
    if (initial_train < 0.0) initial_train = epoch_loss;
    if (initial_train > 0.0 && epoch_loss > 1e3 * initial_train)
      abort_divergence(epoch, epoch_loss, initial_train);

    LossCurveRow row;
    row.epoch = epoch;
    row.train_loss = epoch_loss;
    row.val_loss = val_loss(st.net);
    row.lr = cfg.lr.at(st.step - 1, total_steps);
    result.curve.push_back(row);
  }

  result.final_val_loss = result.curve.empty() ? result.initial_val_loss
                                               : result.curve.back().val_loss;
  result.ema = st.ema.value(true);
  result.net = std::move(st.net);
  return result;
}

}  // namespace

TrainResult train_reflow(const VectorFieldNet& init, const Dataset& ds,
                         const ReflowPairSet& pairs, const TrainConfig& cfg) {
  return train_on_pairs(init, ds, pairs, cfg, std::nullopt, "reflow");
}

TrainResult train_distill(const VectorFieldNet& init, const Dataset& ds,
                          const ReflowPairSet& pairs, const TrainConfig& cfg) {
  return train_on_pairs(init, ds, pairs, cfg, 0.0, "distill");
}

}  // namespace avgflow
