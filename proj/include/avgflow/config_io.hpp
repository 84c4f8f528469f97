#ifndef AVGFLOW_CONFIG_IO_HPP
#define AVGFLOW_CONFIG_IO_HPP

#include <string>

#include <json.hpp>

#include "avgflow/training.hpp"

namespace avgflow {

// JSON <-> TrainConfig. Every key is optional; omitted keys keep defaults.
// Schema (all lowercase snake_case keys):
//   objective: "avgflow" | "condot" | "kabschot"
//   interpolant: "linear" | "integrated"     interpolant_steps: int
//   lr: {kind: "cosine"|"piecewise", peak, end, warmup_steps, pieces: [[step, lr]...]}
//   batch_size, epochs: int      ema_decay: real
//   seed: unsigned               t_sampler: "uniform" | "exponential"
//   t_lambda, grad_clip, weight_decay, val_fraction, sigma0, sigma1: real
//   full_ensemble, rotation_augment: bool    val_queries, quad_nodes: int
//   metric: "euclidean" | "harmonic"
//   model: {hidden_width, n_layers, time_embed_width, pe_width, use_pair_bias}
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

TrainConfig load_train_config(const std::string& path);

}  // namespace avgflow

#endif
