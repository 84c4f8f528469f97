#include "avgflow/config_io.hpp"

#include <fstream>
#include <stdexcept>

namespace avgflow {

namespace {

Objective objective_from(const std::string& s) {
  if (s == "avgflow") return Objective::AvgFlow;
  if (s == "condot") return Objective::CondOT;
  if (s == "kabschot") return Objective::KabschOT;
  throw std::invalid_argument("config: unknown objective '" + s + "'");
}

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::AvgFlow: return "avgflow";
    case Objective::CondOT: return "condot";
    default: return "kabschot";
  }
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("objective")) cfg.objective = objective_from(j["objective"]);
  if (j.contains("interpolant")) {
    const std::string k = j["interpolant"];
    if (k == "linear") cfg.interpolant = InterpolantKind::linear();
    else if (k == "integrated")
      cfg.interpolant = InterpolantKind::integrated(j.value("interpolant_steps", 20));
    else throw std::invalid_argument("config: unknown interpolant '" + k + "'");
  } else if (j.contains("interpolant_steps")) {
    cfg.interpolant = InterpolantKind::integrated(j["interpolant_steps"]);
  }
  if (j.contains("lr")) {
    const auto& jl = j["lr"];
    const std::string kind = jl.value("kind", "cosine");
    if (kind == "cosine") cfg.lr.kind = LrSchedule::Kind::Cosine;
    else if (kind == "piecewise") cfg.lr.kind = LrSchedule::Kind::Piecewise;
    else throw std::invalid_argument("config: unknown lr kind '" + kind + "'");
    cfg.lr.peak = jl.value("peak", cfg.lr.peak);
    cfg.lr.end = jl.value("end", cfg.lr.end);
    cfg.lr.warmup_steps = jl.value("warmup_steps", cfg.lr.warmup_steps);
    if (jl.contains("pieces"))
      for (const auto& p : jl["pieces"])
        cfg.lr.pieces.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
  }
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.ema_decay = j.value("ema_decay", cfg.ema_decay);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("t_sampler")) {
    const std::string k = j["t_sampler"];
    if (k == "uniform") cfg.t_sampler = TSamplerKind::Uniform;
    else if (k == "exponential") cfg.t_sampler = TSamplerKind::Exponential;
    else throw std::invalid_argument("config: unknown t_sampler '" + k + "'");
  }
  cfg.t_lambda = j.value("t_lambda", cfg.t_lambda);
  cfg.grad_clip = j.value("grad_clip", cfg.grad_clip);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.full_ensemble = j.value("full_ensemble", cfg.full_ensemble);
  cfg.rotation_augment = j.value("rotation_augment", cfg.rotation_augment);
  cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
  cfg.val_queries = j.value("val_queries", cfg.val_queries);
  if (j.contains("metric")) {
    const std::string k = j["metric"];
    if (k == "euclidean") cfg.metric_kind = MetricSpec::Kind::Euclidean;
    else if (k == "harmonic") cfg.metric_kind = MetricSpec::Kind::Harmonic;
    else throw std::invalid_argument("config: unknown metric '" + k + "'");
  }
  cfg.sigma0 = j.value("sigma0", cfg.sigma0);
  cfg.sigma1 = j.value("sigma1", cfg.sigma1);
  cfg.quad_nodes = j.value("quad_nodes", cfg.quad_nodes);
  if (j.contains("model")) {
    const auto& jm = j["model"];
    cfg.model.hidden_width = jm.value("hidden_width", cfg.model.hidden_width);
    cfg.model.n_layers = jm.value("n_layers", cfg.model.n_layers);
    cfg.model.time_embed_width = jm.value("time_embed_width", cfg.model.time_embed_width);
    cfg.model.pe_width = jm.value("pe_width", cfg.model.pe_width);
    cfg.model.use_pair_bias = jm.value("use_pair_bias", cfg.model.use_pair_bias);
  }
  return cfg;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["objective"] = objective_name(cfg.objective);
  j["interpolant"] =
      cfg.interpolant.kind == InterpolantKind::Kind::Linear ? "linear" : "integrated";
  j["interpolant_steps"] = cfg.interpolant.steps;
  j["lr"] = {{"kind", cfg.lr.kind == LrSchedule::Kind::Cosine ? "cosine" : "piecewise"},
             {"peak", cfg.lr.peak},
             {"end", cfg.lr.end},
             {"warmup_steps", cfg.lr.warmup_steps}};
  if (!cfg.lr.pieces.empty()) {
    nlohmann::ordered_json pieces = nlohmann::ordered_json::array();
    for (const auto& [s, r] : cfg.lr.pieces) pieces.push_back({s, r});
    j["lr"]["pieces"] = std::move(pieces);
  }
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["ema_decay"] = cfg.ema_decay;
  j["seed"] = cfg.seed;
  j["t_sampler"] = cfg.t_sampler == TSamplerKind::Uniform ? "uniform" : "exponential";
  j["t_lambda"] = cfg.t_lambda;
  j["grad_clip"] = cfg.grad_clip;
  j["weight_decay"] = cfg.weight_decay;
  j["full_ensemble"] = cfg.full_ensemble;
  j["rotation_augment"] = cfg.rotation_augment;
  j["val_fraction"] = cfg.val_fraction;
  j["val_queries"] = cfg.val_queries;
  j["metric"] = cfg.metric_kind == MetricSpec::Kind::Euclidean ? "euclidean" : "harmonic";
  j["sigma0"] = cfg.sigma0;
  j["sigma1"] = cfg.sigma1;
  j["quad_nodes"] = cfg.quad_nodes;
  j["model"] = {{"hidden_width", cfg.model.hidden_width},
                {"n_layers", cfg.model.n_layers},
                {"time_embed_width", cfg.model.time_embed_width},
                {"pe_width", cfg.model.pe_width},
                {"use_pair_bias", cfg.model.use_pair_bias}};
  return j;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return train_config_from_json(j);
}

}  // namespace avgflow
