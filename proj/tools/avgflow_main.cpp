// Command-line surface for the averaged-flow pipeline: dataset generation,
// oracle validation, the train / reflow / distill / sample / eval stages,
// and the target-evaluation timing benchmark.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "avgflow/config_io.hpp"
#include "avgflow/dataset.hpp"
#include "avgflow/evaluation.hpp"
#include "avgflow/manifest.hpp"
#include "avgflow/oracle_check.hpp"
#include "avgflow/training.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using namespace avgflow;

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

ordered_json coords_json(const Coords& c) {
  ordered_json j = ordered_json::array();
  for (int i = 0; i < c.rows(); ++i) j.push_back({c(i, 0), c(i, 1), c(i, 2)});
  return j;
}

Coords coords_from(const nlohmann::json& j) {
  Coords c(j.size(), 3);
  for (std::size_t i = 0; i < j.size(); ++i)
    for (int k = 0; k < 3; ++k) c(static_cast<int>(i), k) = j[i][k].get<double>();
  return c;
}

struct SampleSet {
  std::string checkpoint_id;
  int steps = 0;
  std::string solver;
  std::uint64_t seed = 0;
  // per molecule index: generated conformers
  std::vector<std::pair<int, std::vector<Coords>>> molecules;
};

void save_samples(const SampleSet& s, const std::string& path) {
  ordered_json root;
  root["schema_version"] = 1;
  root["checkpoint_id"] = s.checkpoint_id;
  root["steps"] = s.steps;
  root["solver"] = s.solver;
  root["seed"] = s.seed;
  root["molecules"] = ordered_json::array();
  for (const auto& [idx, confs] : s.molecules) {
    ordered_json jm;
    jm["index"] = idx;
    jm["samples"] = ordered_json::array();
    for (const Coords& c : confs) jm["samples"].push_back(coords_json(c));
    root["molecules"].push_back(std::move(jm));
  }
  write_text_file(path, root.dump(1) + "\n");
}

SampleSet load_samples(const std::string& path) {
  const auto root = nlohmann::json::parse(read_text_file(path));
  if (root.value("schema_version", 0) != 1)
    throw std::runtime_error("samples: unsupported schema version");
  SampleSet s;
  s.checkpoint_id = root.value("checkpoint_id", "");
  s.steps = root.value("steps", 0);
  s.solver = root.value("solver", "euler");
  s.seed = root.value("seed", 0ull);
  for (const auto& jm : root.at("molecules")) {
    std::vector<Coords> confs;
    for (const auto& jc : jm.at("samples")) confs.push_back(coords_from(jc));
    s.molecules.emplace_back(jm.at("index").get<int>(), std::move(confs));
  }
  return s;
}

void require_input(const std::string& path, const std::string& stage_hint) {
  if (!fs::exists(path))
    throw std::runtime_error("missing input '" + path + "'; run the " + stage_hint +
                             " stage first");
}

int cmd_gen_data(const std::string& out, GenConfig gen) {
  const Dataset ds = gen_synthetic_dataset(gen);
  fs::create_directories(fs::path(out).parent_path().empty()
                             ? "."
                             : fs::path(out).parent_path().string());
  save_dataset(ds, out);

  RunManifest man;
  man.stage = "gen-data";
  man.seed = gen.seed;
  man.config = {{"n_molecules", gen.n_molecules}, {"atoms_min", gen.atoms_min},
                {"atoms_max", gen.atoms_max},     {"conformers_min", gen.conformers_min},
                {"conformers_max", gen.conformers_max}, {"pe_width", gen.pe_width}};
  man.outputs = {out};
  man.write(fs::path(out).parent_path().string().empty()
                ? "."
                : fs::path(out).parent_path().string());
  std::cout << "wrote " << out << " (" << ds.molecules.size() << " molecules)\n";
  return 0;
}

int cmd_oracle_check(const std::string& dataset, int instances, int samples,
                     std::uint64_t seed, bool fault_inject, int quad_nodes) {
  require_input(dataset, "gen-data");
  const Dataset ds = load_dataset(dataset);
  const double fault = fault_inject ? 1.05 : 1.0;
  const OracleCheckReport rep =
      run_oracle_check(ds, instances, samples, seed, fault, quad_nodes);
  std::printf("%-4s %-6s %-6s %-10s %10s %12s\n", "#", "mol", "t", "metric", "max|z|",
              "ess");
  for (std::size_t i = 0; i < rep.instances.size(); ++i) {
    const auto& inst = rep.instances[i];
    std::printf("%-4zu %-6d %-6.2f %-10s %10.3f %12.0f\n", i, inst.molecule, inst.t,
                inst.metric == MetricSpec::Kind::Euclidean ? "euclidean" : "harmonic",
                inst.max_z, inst.ess);
  }
  std::printf("overall max |z| = %.3f -> %s\n", rep.max_z, rep.pass ? "PASS" : "FAIL");
  return rep.pass ? 0 : 2;
}

VectorFieldNet pick_net(const Checkpoint& ck, bool use_raw) {
  VectorFieldNet net = ck.net;
  if (!use_raw) {
    if (!ck.has_ema) throw std::runtime_error("checkpoint has no EMA parameters");
    net.params = ck.ema;
  }
  return net;
}

int cmd_train(const std::string& dataset, const std::string& config_path,
              const std::string& out, std::optional<std::uint64_t> seed_override) {
  require_input(dataset, "gen-data");
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  if (seed_override) cfg.seed = *seed_override;
  const Dataset ds = load_dataset(dataset);
  const TrainResult res = train_stage1(ds, cfg);

  fs::create_directories(out);
  save_checkpoint(res.net, out + "/checkpoint.bin", &res.ema);
  write_loss_curve_csv(out + "/loss.csv", res.curve);
  write_text_file(out + "/config.json", train_config_to_json(cfg).dump(1) + "\n");

  RunManifest man;
  man.stage = "train";
  man.seed = cfg.seed;
  man.config = train_config_to_json(cfg);
  man.add_input(dataset);
  man.outputs = {out + "/checkpoint.bin", out + "/loss.csv", out + "/config.json"};
  man.write(out);

  std::printf("stage-1 done: initial val %.6f -> final val %.6f (%d epochs)\n",
              res.initial_val_loss, res.final_val_loss, cfg.epochs);
  return 0;
}

int cmd_reflow_pairs(const std::string& dataset, const std::string& teacher,
                     int steps, int pairs_per_graph, std::uint64_t seed,
                     const std::string& out, bool use_raw) {
  require_input(dataset, "gen-data");
  require_input(teacher, "train");
  const Dataset ds = load_dataset(dataset);
  const Checkpoint ck = load_checkpoint(teacher);
  const VectorFieldNet net = pick_net(ck, use_raw);
  const ReflowPairSet pairs =
      generate_reflow_pairs(net, ds, steps, pairs_per_graph, seed, !use_raw);

  fs::create_directories(out);
  save_pairs(pairs, out + "/pairs.json");
  RunManifest man;
  man.stage = "reflow-pairs";
  man.seed = seed;
  man.config = {{"steps", steps},
                {"pairs_per_graph", pairs_per_graph},
                {"teacher_id", pairs.teacher_id},
                {"teacher_ema", pairs.teacher_ema}};
  man.add_input(dataset);
  man.add_input(teacher);
  man.outputs = {out + "/pairs.json"};
  man.write(out);
  std::printf("generated %zu pairs (%d steps, teacher %s)\n", pairs.pairs.size(), steps,
              pairs.teacher_id.c_str());
  return 0;
}

int cmd_finetune(bool distill, const std::string& dataset, const std::string& ckpt,
                 const std::string& pairs_path, const std::string& config_path,
                 const std::string& out, bool use_raw) {
  require_input(dataset, "gen-data");
  require_input(ckpt, distill ? "reflow" : "train");
  require_input(pairs_path, "reflow-pairs");
  const Dataset ds = load_dataset(dataset);
  const Checkpoint ck = load_checkpoint(ckpt);
  const VectorFieldNet init = pick_net(ck, use_raw);
  const ReflowPairSet pairs = load_pairs(pairs_path);

  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  cfg.model = init.config;
  if (config_path.empty()) {
    cfg.t_sampler = TSamplerKind::Exponential;  // reflow default
    cfg.t_lambda = -1.2;
  }
  const TrainResult res = distill ? train_distill(init, ds, pairs, cfg)
                                  : train_reflow(init, ds, pairs, cfg);

  fs::create_directories(out);
  save_checkpoint(res.net, out + "/checkpoint.bin", &res.ema);
  write_loss_curve_csv(out + "/loss.csv", res.curve);
  write_text_file(out + "/config.json", train_config_to_json(cfg).dump(1) + "\n");

  RunManifest man;
  man.stage = distill ? "distill" : "reflow";
  man.seed = cfg.seed;
  man.config = train_config_to_json(cfg);
  man.add_input(dataset);
  man.add_input(ckpt);
  man.add_input(pairs_path);
  man.outputs = {out + "/checkpoint.bin", out + "/loss.csv"};
  man.write(out);
  std::printf("%s done: initial val %.6f -> final val %.6f\n",
              distill ? "distill" : "reflow", res.initial_val_loss, res.final_val_loss);
  return 0;
}

int cmd_sample(const std::string& dataset, const std::string& ckpt, int steps,
               int samples_per_mol, std::uint64_t seed, const std::string& out,
               const std::string& solver, bool use_raw, bool dump_trajectories) {
  require_input(dataset, "gen-data");
  require_input(ckpt, "train");
  const Dataset ds = load_dataset(dataset);
  const Checkpoint ck = load_checkpoint(ckpt);
  const VectorFieldNet net = pick_net(ck, use_raw);

  SampleSet set;
  set.checkpoint_id = net_id(net.params);
  set.steps = steps;
  set.solver = solver;
  set.seed = seed;

  ordered_json trajs = ordered_json::array();
  for (int mi = 0; mi < static_cast<int>(ds.molecules.size()); ++mi) {
    const Molecule& mol = ds.molecules[mi];
    const int count =
        samples_per_mol > 0 ? samples_per_mol : 2 * mol.ensemble.size();
    std::vector<Coords> confs;
    for (int s = 0; s < count; ++s) {
      Rng rng(seed, "sample", static_cast<std::uint64_t>(mi),
              static_cast<std::uint64_t>(s));
      const Coords x0 = sample_prior(mol.graph.n_atoms, rng);
      const Trajectory traj = solver == "midpoint"
                                  ? midpoint_sample(net, mol.graph, x0, steps)
                                  : euler_sample(net, mol.graph, x0, steps);
      confs.push_back(traj.states.back());
      if (dump_trajectories) {
        ordered_json jt;
        jt["molecule"] = mi;
        jt["sample"] = s;
        jt["times"] = traj.times;
        jt["states"] = ordered_json::array();
        for (const Coords& st : traj.states) jt["states"].push_back(coords_json(st));
        trajs.push_back(std::move(jt));
      }
    }
    set.molecules.emplace_back(mi, std::move(confs));
  }

  fs::create_directories(out);
  save_samples(set, out + "/samples.json");
  if (dump_trajectories) {
    ordered_json root;
    root["schema_version"] = 1;
    root["trajectories"] = std::move(trajs);
    write_text_file(out + "/trajectories.json", root.dump(1) + "\n");
  }
  RunManifest man;
  man.stage = "sample";
  man.seed = seed;
  man.config = {{"steps", steps}, {"solver", solver}, {"samples_per_mol", samples_per_mol},
                {"use_raw", use_raw}, {"checkpoint_id", set.checkpoint_id}};
  man.add_input(dataset);
  man.add_input(ckpt);
  man.outputs = {out + "/samples.json"};
  man.write(out);
  std::printf("sampled %zu molecules at %d steps\n", set.molecules.size(), steps);
  return 0;
}

int cmd_eval(const std::string& dataset, const std::string& samples_path, double delta,
             const std::string& out) {
  require_input(dataset, "gen-data");
  require_input(samples_path, "sample");
  const Dataset ds = load_dataset(dataset);
  const SampleSet set = load_samples(samples_path);

  ordered_json per_mol = ordered_json::array();
  std::vector<double> covr, covp, amrr, amrp;
  for (const auto& [mi, confs] : set.molecules) {
    if (mi < 0 || mi >= static_cast<int>(ds.molecules.size()))
      throw std::runtime_error("eval: sample molecule index out of range");
    const MetricReport rep =
        coverage_amr(confs, ds.molecules[mi].ensemble.conformers, delta);
    per_mol.push_back({{"molecule", mi},
                       {"cov_r", rep.cov_r},
                       {"cov_p", rep.cov_p},
                       {"amr_r", rep.amr_r},
                       {"amr_p", rep.amr_p},
                       {"K", rep.k},
                       {"L", rep.l},
                       {"delta", rep.delta}});
    covr.push_back(rep.cov_r);
    covp.push_back(rep.cov_p);
    amrr.push_back(rep.amr_r);
    amrp.push_back(rep.amr_p);
  }
  auto mean = [](std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
  };
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };

  ordered_json root;
  root["schema_version"] = 1;
  root["delta"] = delta;
  root["steps"] = set.steps;
  root["checkpoint_id"] = set.checkpoint_id;
  root["aggregate"] = {{"cov_r_mean", mean(covr)},   {"cov_r_median", median(covr)},
                       {"cov_p_mean", mean(covp)},   {"cov_p_median", median(covp)},
                       {"amr_r_mean", mean(amrr)},   {"amr_r_median", median(amrr)},
                       {"amr_p_mean", mean(amrp)},   {"amr_p_median", median(amrp)}};
  root["molecules"] = std::move(per_mol);

  fs::create_directories(out);
  write_text_file(out + "/report.json", root.dump(1) + "\n");

  MetricReport agg;
  agg.cov_r = mean(covr);
  agg.cov_p = mean(covp);
  agg.amr_r = mean(amrr);
  agg.amr_p = mean(amrp);
  agg.delta = delta;
  agg.k = set.molecules.empty() ? 0 : static_cast<int>(set.molecules[0].second.size());
  agg.l = set.molecules.empty() ? 0
                                : ds.molecules[set.molecules[0].first].ensemble.size();
  std::cout << report_table(agg);
  return 0;
}

int cmd_bench_target(const std::vector<int>& batches, const std::vector<int>& conformers,
                     int nodes_per_graph, const std::string& out, bool with_serial,
                     std::uint64_t seed, int quad_nodes) {
  // One synthetic instance library reused across cells.
  const int max_conf = *std::max_element(conformers.begin(), conformers.end());
  Rng rng(seed, "bench");
  std::vector<Coords> confs;
  for (int c = 0; c < max_conf; ++c)
    confs.push_back(centered(rng.normal_coords(nodes_per_graph)));
  const MetricSpec metric = MetricSpec::euclidean();

  std::string csv = "n_batch,n_conformers,ms_parallel";
  if (with_serial) csv += ",ms_serial";
  csv += "\n";

  std::printf("%8s %12s %14s%s\n", "batch", "conformers", "parallel_ms",
              with_serial ? "      serial_ms" : "");
  for (const int nb : batches) {
    for (const int nc : conformers) {
      ConformerEnsemble ens;
      ens.conformers.assign(confs.begin(), confs.begin() + nc);
      ens.weights = Eigen::VectorXd::Ones(nc);

      std::vector<TargetJob> jobs;
      std::vector<Coords> queries;
      queries.reserve(nb);
      for (int b = 0; b < nb; ++b) {
        Rng qr(seed, "bench_query", static_cast<std::uint64_t>(b));
        queries.push_back(centered(qr.normal_coords(nodes_per_graph)));
      }
      for (int b = 0; b < nb; ++b)
        jobs.push_back(TargetJob{FlowQuery{0.5, queries[b]}, &ens, &metric});
      std::vector<Coords> results(jobs.size());

      const auto t0 = std::chrono::steady_clock::now();
      avg_flow_target_batch(jobs, results, quad_nodes);
      const auto t1 = std::chrono::steady_clock::now();
      const double ms_par = std::chrono::duration<double, std::milli>(t1 - t0).count();

      double ms_ser = 0.0;
      if (with_serial) {
        const auto s0 = std::chrono::steady_clock::now();
        avg_flow_target_batch_serial(jobs, results, quad_nodes);
        const auto s1 = std::chrono::steady_clock::now();
        ms_ser = std::chrono::duration<double, std::milli>(s1 - s0).count();
      }

      char line[128];
      if (with_serial)
        std::snprintf(line, sizeof(line), "%d,%d,%.3f,%.3f\n", nb, nc, ms_par, ms_ser);
      else
        std::snprintf(line, sizeof(line), "%d,%d,%.3f\n", nb, nc, ms_par);
      csv += line;
      if (with_serial)
        std::printf("%8d %12d %14.3f %14.3f\n", nb, nc, ms_par, ms_ser);
      else
        std::printf("%8d %12d %14.3f\n", nb, nc, ms_par);
    }
  }
  if (!out.empty()) {
    fs::create_directories(fs::path(out).parent_path().string().empty()
                               ? "."
                               : fs::path(out).parent_path().string());
    write_text_file(out, csv);
  }
  return 0;
}

int cmd_plot_export(const std::string& run_dir, const std::string& out) {
  fs::create_directories(out);
  int exported = 0;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "loss.csv") {
      const std::string tag = entry.path().parent_path().filename().string();
      fs::copy_file(entry.path(), fs::path(out) / (tag + "_loss.csv"),
                    fs::copy_options::overwrite_existing);
      ++exported;
    } else if (name == "trajectories.json") {
      const auto root = nlohmann::json::parse(read_text_file(entry.path().string()));
      std::string csv = "molecule,sample,step,t,atom,x,y,z\n";
      for (const auto& jt : root.at("trajectories")) {
        const int mi = jt.at("molecule").get<int>();
        const int si = jt.at("sample").get<int>();
        const auto& times = jt.at("times");
        const auto& states = jt.at("states");
        for (std::size_t k = 0; k < states.size(); ++k)
          for (std::size_t a = 0; a < states[k].size(); ++a) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d,%d,%zu,%.10g,%zu,%.10g,%.10g,%.10g\n",
                          mi, si, k, times[k].get<double>(), a,
                          states[k][a][0].get<double>(), states[k][a][1].get<double>(),
                          states[k][a][2].get<double>());
            csv += line;
          }
      }
      const std::string tag = entry.path().parent_path().filename().string();
      write_text_file((fs::path(out) / (tag + "_trajectories.csv")).string(), csv);
      ++exported;
    } else if (name == "report.json") {
      const auto root = nlohmann::json::parse(read_text_file(entry.path().string()));
      std::string csv = "molecule,cov_r,cov_p,amr_r,amr_p,K,L,delta\n";
      for (const auto& jm : root.at("molecules")) {
        char line[200];
        std::snprintf(line, sizeof(line), "%d,%.6g,%.6g,%.6g,%.6g,%d,%d,%.6g\n",
                      jm.at("molecule").get<int>(), jm.at("cov_r").get<double>(),
                      jm.at("cov_p").get<double>(), jm.at("amr_r").get<double>(),
                      jm.at("amr_p").get<double>(), jm.at("K").get<int>(),
                      jm.at("L").get<int>(), jm.at("delta").get<double>());
        csv += line;
      }
      const std::string tag = entry.path().parent_path().filename().string();
      write_text_file((fs::path(out) / (tag + "_report.csv")).string(), csv);
      ++exported;
    }
  }
  std::printf("exported %d artifact(s) to %s\n", exported, out.c_str());
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw std::runtime_error("empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SO(3)-averaged flow matching: training, reflow, distillation, evaluation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware default)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic conformer dataset");
  std::string gen_out = "data/synthetic.json";
  GenConfig gen_cfg;
  gen->add_option("--out", gen_out, "output dataset path");
  gen->add_option("--n-molecules", gen_cfg.n_molecules);
  gen->add_option("--atoms-min", gen_cfg.atoms_min);
  gen->add_option("--atoms-max", gen_cfg.atoms_max);
  gen->add_option("--conformers-min", gen_cfg.conformers_min);
  gen->add_option("--conformers-max", gen_cfg.conformers_max);
  gen->add_option("--seed", gen_cfg.seed);

  // oracle-check
  auto* oc = app.add_subcommand("oracle-check", "closed form vs Monte-Carlo validation");
  std::string oc_dataset;
  int oc_instances = 20, oc_samples = 200000, oc_nodes = so3::kDefaultQuadNodes;
  std::uint64_t oc_seed = 2024;
  bool oc_fault = false;
  oc->add_option("--dataset", oc_dataset)->required();
  oc->add_option("--instances", oc_instances);
  oc->add_option("--samples", oc_samples);
  oc->add_option("--seed", oc_seed);
  oc->add_option("--quad-nodes", oc_nodes);
  oc->add_flag("--fault-inject", oc_fault, "perturb the closed form (negative control)");

  // train
  auto* tr = app.add_subcommand("train", "stage-1 training");
  std::string tr_dataset, tr_config, tr_out = "runs/stage1";
  std::uint64_t tr_seed = 0;
  bool tr_has_seed = false;
  tr->add_option("--dataset", tr_dataset)->required();
  tr->add_option("--config", tr_config, "TrainConfig JSON");
  tr->add_option("--out", tr_out);
  tr->add_option("--seed", tr_seed)->each([&](const std::string&) { tr_has_seed = true; });

  // reflow-pairs
  auto* rp = app.add_subcommand("reflow-pairs", "teacher couplings for reflow");
  std::string rp_dataset, rp_teacher, rp_out = "runs/pairs";
  int rp_steps = 100, rp_per_graph = 32;
  std::uint64_t rp_seed = 1;
  bool rp_raw = false;
  rp->add_option("--dataset", rp_dataset)->required();
  rp->add_option("--teacher", rp_teacher, "teacher checkpoint")->required();
  rp->add_option("--steps", rp_steps);
  rp->add_option("--pairs-per-graph", rp_per_graph);
  rp->add_option("--seed", rp_seed);
  rp->add_option("--out", rp_out);
  rp->add_flag("--use-raw", rp_raw, "use raw instead of EMA teacher weights");

  // reflow / distill
  auto* rf = app.add_subcommand("reflow", "rectified-flow fine-tuning on couplings");
  auto* di = app.add_subcommand("distill", "one-step distillation on couplings");
  std::string ft_dataset, ft_ckpt, ft_pairs, ft_config, ft_out;
  bool ft_raw = false;
  for (auto* cmd : {rf, di}) {
    cmd->add_option("--dataset", ft_dataset)->required();
    cmd->add_option("--checkpoint", ft_ckpt)->required();
    cmd->add_option("--pairs", ft_pairs)->required();
    cmd->add_option("--config", ft_config);
    cmd->add_option("--out", ft_out)->required();
    cmd->add_flag("--use-raw", ft_raw);
  }

  // sample
  auto* sa = app.add_subcommand("sample", "integrate a trained field from the prior");
  std::string sa_dataset, sa_ckpt, sa_out = "runs/samples", sa_solver = "euler";
  int sa_steps = 100, sa_per_mol = 0;
  std::uint64_t sa_seed = 7;
  bool sa_raw = false, sa_traj = false;
  sa->add_option("--dataset", sa_dataset)->required();
  sa->add_option("--checkpoint", sa_ckpt)->required();
  sa->add_option("--steps", sa_steps);
  sa->add_option("--samples-per-mol", sa_per_mol, "0 = twice the truth count");
  sa->add_option("--seed", sa_seed);
  sa->add_option("--out", sa_out);
  sa->add_option("--solver", sa_solver)->check(CLI::IsMember({"euler", "midpoint"}));
  sa->add_flag("--use-raw", sa_raw);
  sa->add_flag("--trajectories", sa_traj, "also dump full trajectories");

  // eval
  auto* ev = app.add_subcommand("eval", "coverage / AMR metrics");
  std::string ev_dataset, ev_samples, ev_out = "runs/eval";
  double ev_delta = kDeltaDrugs;
  ev->add_option("--dataset", ev_dataset)->required();
  ev->add_option("--generated", ev_samples, "samples.json from the sample stage")->required();
  ev->add_option("--delta", ev_delta);
  ev->add_option("--out", ev_out);

  // bench-target
  auto* be = app.add_subcommand("bench-target", "timing grid for target evaluation");
  std::string be_batches = "1,10,100,1000", be_confs = "1,10,100,1000";
  std::string be_out = "bench_target.csv";
  int be_nodes = 50, be_quad = so3::kDefaultQuadNodes;
  std::uint64_t be_seed = 5;
  bool be_serial = false;
  be->add_option("--batch-sizes", be_batches);
  be->add_option("--conformer-counts", be_confs);
  be->add_option("--nodes-per-graph", be_nodes);
  be->add_option("--out", be_out);
  be->add_option("--seed", be_seed);
  be->add_option("--quad-nodes", be_quad);
  be->add_flag("--with-serial", be_serial, "also time the serial reference kernel");

  // plot-export
  auto* pe = app.add_subcommand("plot-export", "flatten run artifacts to CSV");
  std::string pe_run, pe_out = "plots";
  pe->add_option("--run", pe_run, "run directory")->required();
  pe->add_option("--out", pe_out);

  CLI11_PARSE(app, argc, argv);
  set_threads(threads);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_out, gen_cfg);
    if (oc->parsed())
      return cmd_oracle_check(oc_dataset, oc_instances, oc_samples, oc_seed, oc_fault,
                              oc_nodes);
    if (tr->parsed())
      return cmd_train(tr_dataset, tr_config, tr_out,
                       tr_has_seed ? std::optional<std::uint64_t>(tr_seed) : std::nullopt);
    if (rp->parsed())
      return cmd_reflow_pairs(rp_dataset, rp_teacher, rp_steps, rp_per_graph, rp_seed,
                              rp_out, rp_raw);
    if (rf->parsed())
      return cmd_finetune(false, ft_dataset, ft_ckpt, ft_pairs, ft_config, ft_out, ft_raw);
    if (di->parsed())
      return cmd_finetune(true, ft_dataset, ft_ckpt, ft_pairs, ft_config, ft_out, ft_raw);
    if (sa->parsed())
      return cmd_sample(sa_dataset, sa_ckpt, sa_steps, sa_per_mol, sa_seed, sa_out,
                        sa_solver, sa_raw, sa_traj);
    if (ev->parsed()) return cmd_eval(ev_dataset, ev_samples, ev_delta, ev_out);
    if (be->parsed())
      return cmd_bench_target(parse_int_list(be_batches), parse_int_list(be_confs),
                              be_nodes, be_out, be_serial, be_seed, be_quad);
    if (pe->parsed()) return cmd_plot_export(pe_run, pe_out);
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
