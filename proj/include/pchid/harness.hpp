#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>

#include "pchid/baselines.hpp"
#include "pchid/bitflip.hpp"
#include "pchid/config.hpp"
#include "pchid/gridworld.hpp"
#include "pchid/pointreach.hpp"
#include "pchid/trainers.hpp"

namespace pchid {

inline std::unique_ptr<GoalEnv> make_env(const ExperimentConfig& cfg) {
  const std::string name = cfg.get("env.name");
  std::unique_ptr<GoalEnv> env;
  if (name == "gridworld") {
    auto gw = std::make_unique<GridWorldEnv>(
        static_cast<int>(cfg.get_int("env.size")), 0,
        cfg.get_real("env.obstacle_prob"),
        static_cast<std::size_t>(cfg.get_int("env.horizon")));
    const std::string map_file = cfg.get("env.map_file");
    if (!map_file.empty()) {
      std::ifstream in(map_file);
      if (!in) throw std::runtime_error("cannot open map file " + map_file);
      std::ostringstream text;
      text << in.rdbuf();
      const ParsedMap parsed = parse_grid_map(text.str());
      gw->set_fixed_map(parsed.map, parsed.start, parsed.goal);
    }
    env = std::move(gw);
  } else if (name == "bitflip") {
    env = std::make_unique<BitFlipEnv>(
        static_cast<std::size_t>(cfg.get_int("env.bits")));
  } else if (name == "pointreach") {
    env = std::make_unique<PointReachEnv>(
        0, cfg.get_real("env.max_step"), cfg.get_real("env.tolerance"),
        static_cast<std::size_t>(cfg.get_int("env.horizon")));
  } else {
    throw std::invalid_argument("unknown env.name '" + name + "'");
  }
  env->set_reward_scale(cfg.get_real("env.reward_scale"));
  return env;
}

inline PchidConfig make_pchid_config(const ExperimentConfig& cfg) {
  PchidConfig c;
  c.episodes = cfg.get_int("algo.episodes");
  c.max_k = cfg.get_int("algo.max_k");
  c.batch_size = cfg.get_int("algo.batch_size");
  c.updates_per_episode = cfg.get_int("algo.updates_per_episode");
  c.learning_rate = cfg.get_real("algo.learning_rate");
  c.hidden = cfg.hidden_sizes();
  c.activation =
      cfg.get("algo.activation") == "relu" ? Activation::Relu : Activation::Tanh;
  c.epsilon = cfg.get_real("algo.epsilon");
  c.sigma_fraction = cfg.get_real("algo.sigma_fraction");
  const std::string tester = cfg.get("tester.name");
  c.tester = tester == "rnd"      ? TesterKind::Rnd
             : tester == "oracle" ? TesterKind::Oracle
                                  : TesterKind::Interaction;
  c.rnd_threshold = cfg.get_real("tester.threshold");
  c.rnd_threshold_percentile = cfg.get_real("tester.percentile");
  c.eval_every = cfg.get_int("eval.every");
  c.eval_episodes = cfg.get_int("eval.episodes");
  c.eval_seed = cfg.get_int("eval.seed");
  return c;
}

inline DqnConfig make_dqn_config(const ExperimentConfig& cfg) {
  DqnConfig c;
  c.episodes = cfg.get_int("algo.episodes");
  c.gamma = cfg.get_real("algo.gamma");
  c.batch_size = cfg.get_int("algo.batch_size");
  c.updates_per_episode = cfg.get_int("algo.updates_per_episode");
  c.target_sync_episodes = cfg.get_int("algo.target_sync");
  c.learning_rate = cfg.get_real("algo.learning_rate");
  c.hidden = cfg.hidden_sizes();
  c.eval_every = cfg.get_int("eval.every");
  c.eval_episodes = cfg.get_int("eval.episodes");
  c.eval_seed = cfg.get_int("eval.seed");
  return c;
}

struct RunRecord {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;
  std::size_t buffer_columns = 1;
  double final_eval = 0.0;
  double wall_seconds = 0.0;
  MlpParams policy_net;
};

inline RunRecord run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  auto env = make_env(cfg);
  const std::string algo = cfg.get("algo.name");
  RunRecord rec;
  rec.config_hash = cfg.hash();
  rec.seed = seed;
  const std::size_t eval_episodes = cfg.get_int("eval.episodes");
  const std::uint64_t eval_seed = cfg.get_int("eval.seed");

  if (algo == "pchid" || algo == "pehid") {
    const PchidConfig pc = make_pchid_config(cfg);
    rec.buffer_columns = pc.max_k;
    auto result = algo == "pchid" ? run_pchid(*env, pc, seed)
                                  : run_pehid(*env, pc, seed);
    rec.rows = std::move(result.log);
    rec.final_eval = evaluate(make_greedy_policy(result.policy, *env), *env,
                              eval_episodes, eval_seed);
    rec.policy_net = std::move(result.policy.net);
  } else if (algo == "dqn" || algo == "dqn+her" || algo == "joint" ||
             algo == "average" || algo == "intrinsic") {
    DqnConfig dc = make_dqn_config(cfg);
    dc.her = algo == "dqn+her";
    CombinationConfig combo;
    if (algo == "joint") combo.mode = ComboMode::Joint;
    if (algo == "average") combo.mode = ComboMode::Average;
    if (algo == "intrinsic") combo.mode = ComboMode::Intrinsic;
    combo.joint_lambda = cfg.get_real("algo.lambda");
    combo.average_weight = cfg.get_real("algo.weight");
    combo.intrinsic_beta = cfg.get_real("algo.beta");
    combo.hid_max_k = cfg.get_int("algo.max_k");
    auto result = dqn_train(*env, dc, seed, combo);
    rec.buffer_columns = 1;
    rec.rows = std::move(result.log);
    rec.final_eval =
        evaluate(result.greedy(env.get()), *env, eval_episodes, eval_seed);
    rec.policy_net = std::move(result.q.net);
  } else if (algo == "ppo-lite") {
    PpoLiteConfig pc;
    pc.episodes = cfg.get_int("algo.episodes");
    pc.learning_rate = cfg.get_real("algo.learning_rate");
    pc.hidden = cfg.hidden_sizes();
    pc.clip_ratio = cfg.get_real("algo.clip_ratio");
    pc.intrinsic_beta = cfg.get_real("algo.beta");
    pc.eval_every = cfg.get_int("eval.every");
    pc.eval_episodes = eval_episodes;
    pc.eval_seed = eval_seed;
    auto result = ppo_lite_train(*env, pc, seed);
    rec.rows = std::move(result.log);
    rec.final_eval = evaluate(make_greedy_policy(result.actor), *env,
                              eval_episodes, eval_seed);
    rec.policy_net = std::move(result.actor.net);
  } else {
    throw std::invalid_argument("unknown algo.name '" + algo + "'");
  }
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return rec;
}

inline std::string output_root() {
  if (const char* root = std::getenv("PCHID_OUT_ROOT")) return root;
  return ".";
}

// Runs every seed, writes per-seed metric CSVs and checkpoints plus one
// aggregate summary row. Returns the records for programmatic use.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path out_dir = fs::path(output_root()) / cfg.get("run.output_dir");
  fs::create_directories(out_dir);
  std::vector<RunRecord> records;
  for (const auto seed : cfg.seeds()) {
    RunRecord rec = run_single(cfg, seed);
    const std::string stem =
        cfg.get("algo.name") + "_" + cfg.get("env.name") + "_seed" +
        std::to_string(seed);
    std::ofstream csv(out_dir / (stem + ".csv"));
    write_metrics_header(csv, rec.buffer_columns);
    for (const auto& row : rec.rows) write_metrics_row(csv, row);
    csv << "# final_eval," << rec.final_eval << '\n';
    save_checkpoint(rec.policy_net, (out_dir / (stem + ".ckpt")).string());
    records.push_back(std::move(rec));
  }
  double mean = 0.0;
  for (const auto& r : records) mean += r.final_eval;
  mean /= static_cast<double>(records.size());
  double var = 0.0;
  for (const auto& r : records)
    var += (r.final_eval - mean) * (r.final_eval - mean);
  const double stddev =
      records.size() > 1 ? std::sqrt(var / (records.size() - 1)) : 0.0;
  std::ofstream summary(out_dir / "summary.csv");
  summary << "algo,env,config_hash,n_seeds,mean_final_eval,std_final_eval\n"
          << cfg.get("algo.name") << ',' << cfg.get("env.name") << ','
          << cfg.hash() << ',' << records.size() << ',' << mean << ','
          << stddev << '\n';
  return records;
}

struct SweepRow {
  std::string value;
  double mean_final_eval = 0.0;
  double std_final_eval = 0.0;
};

// One run_experiment per value of a sweepable parameter, merged summary.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base,
                                   const std::string& parameter,
                                   const std::vector<std::string>& values) {
  if (values.empty()) throw std::invalid_argument("sweep: empty value list");
  namespace fs = std::filesystem;
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    ExperimentConfig cfg = base;
    cfg.set(parameter, value);
    cfg.set("run.output_dir",
            base.get("run.output_dir") + "/sweep_" + value);
    const auto records = run_experiment(cfg);
    SweepRow row;
    row.value = value;
    for (const auto& r : records) row.mean_final_eval += r.final_eval;
    row.mean_final_eval /= static_cast<double>(records.size());
    for (const auto& r : records)
      row.std_final_eval += (r.final_eval - row.mean_final_eval) *
                            (r.final_eval - row.mean_final_eval);
    row.std_final_eval =
        records.size() > 1 ? std::sqrt(row.std_final_eval / (records.size() - 1))
                           : 0.0;
    rows.push_back(std::move(row));
  }
  const fs::path out_dir =
      fs::path(output_root()) / base.get("run.output_dir");
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "sweep.csv");
  out << parameter << ",mean_final_eval,std_final_eval\n";
  for (const auto& row : rows)
    out << row.value << ',' << row.mean_final_eval << ','
        << row.std_final_eval << '\n';
  return rows;
}

}  // namespace pchid
