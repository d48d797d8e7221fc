#pragma once

#include <memory>
#include <ostream>

#include "pchid/hid.hpp"
#include "pchid/policy.hpp"
#include "pchid/solvability.hpp"

namespace pchid {

enum class TesterKind { Interaction, Rnd, Oracle };

inline const char* to_string(TesterKind t) {
  switch (t) {
    case TesterKind::Interaction: return "interaction";
    case TesterKind::Rnd: return "rnd";
    default: return "oracle";
  }
}

struct PchidConfig {
  std::size_t episodes = 500;
  std::size_t max_k = 5;
  std::size_t batch_size = 64;
  std::size_t updates_per_episode = 40;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden = {64, 64};
  Activation activation = Activation::Tanh;
  double epsilon = 0.2;          // discrete exploration
  double sigma_fraction = 0.2;   // continuous exploration, fraction of max_action
  double validation_split = 0.1;
  std::size_t convergence_window = 20;
  double convergence_delta = 0.01;
  std::size_t min_buffer_for_growth = 500;
  std::size_t buffer_capacity = 50000;
  TesterKind tester = TesterKind::Interaction;
  double rnd_threshold = -1.0;  // fixed novelty threshold; < 0 = percentile rule
  double rnd_threshold_percentile = 0.9;
  std::size_t eval_every = 0;  // 0 disables periodic evaluation
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 1234;

  void validate(std::size_t horizon) const {
    if (episodes == 0) throw std::invalid_argument("config: episodes must be > 0");
    if (max_k < 1 || max_k > horizon)
      throw std::invalid_argument("config: need 1 <= max_k <= horizon");
    if (batch_size == 0) throw std::invalid_argument("config: batch_size must be > 0");
  }
};

struct MetricsRow {
  std::size_t episode = 0;
  int success = 0;
  std::size_t k_max = 1;
  std::vector<std::size_t> buffer_sizes;
  double eval_success = -1.0;   // -1 when not evaluated this episode
  double episode_reward = 0.0;
  double intrinsic_mean = 0.0;  // combos only
  double mixing_weight = -1.0;  // combos only
};

inline void write_metrics_header(std::ostream& out, std::size_t max_k) {
  out << "episode,success,k_list_max";
  for (std::size_t k = 1; k <= max_k; ++k) out << ",buffer_" << k;
  out << ",eval_success,episode_reward,intrinsic_mean,mixing_weight\n";
}

inline void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  out << row.episode << ',' << row.success << ',' << row.k_max;
  for (auto s : row.buffer_sizes) out << ',' << s;
  out << ',' << row.eval_success << ',' << row.episode_reward << ','
      << row.intrinsic_mean << ',' << row.mixing_weight << '\n';
}

// Greedy rollout success rate over freshly seeded episodes.
inline double evaluate(const GreedyPolicy& policy, const GoalEnv& env_proto,
                       std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes == 0)
    throw std::invalid_argument("evaluate: n_episodes must be > 0");
  auto env = env_proto.clone();
  std::size_t successes = 0;
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    auto [s, g] = env->reset(Rng::derive(seed, ep));
    for (std::size_t t = 0; t < env->horizon(); ++t) {
      const StepResult sr = env->step(policy(s, g));
      s = sr.next_state;
      if (sr.done) {
        if (sr.success) ++successes;
        break;
      }
    }
  }
  return static_cast<double>(successes) / static_cast<double>(n_episodes);
}

// Fraction of examples the policy reproduces: argmax match for discrete
// actions, within half the action cap for continuous ones.
inline double hid_accuracy(const PolicyNet& policy,
                           const std::vector<HidExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    const auto out = policy_logits(policy, ex.state, ex.hindsight_goal);
    if (policy.discrete) {
      if (argmax(out) == ex.action.index) ++hits;
    } else {
      double d = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i)
        d += (out[i] - ex.action.vec[i]) * (out[i] - ex.action.vec[i]);
      if (std::sqrt(d) <= 0.5 * policy.max_action) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

// Recorded when the curriculum deepens: the held-out examples from the
// already-learned levels and the accuracy on them just before growth.
// Lets callers verify that deeper training does not erode shallow levels.
struct GrowthEvent {
  std::size_t episode = 0;
  std::size_t new_k = 0;
  double pre_accuracy = 0.0;
  std::vector<HidExample> probe;
};

struct HidTrainResult {
  PolicyNet policy;
  std::vector<MetricsRow> log;
  std::vector<HidExample> validation;  // held out, never trained on
  std::vector<GrowthEvent> growth_events;
};

namespace detail {

enum class HidMode { Pchid, Pehid };

// One supervised update on a joint minibatch. Never reads rewards.
inline void hid_update(PolicyNet& policy, AdamState& opt,
                       const KBufferSet& buffers, std::size_t batch_size,
                       Rng& rng) {
  const auto batch = buffers.sample_joint_minibatch(batch_size, rng);
  const std::size_t in_dim = policy.net.input_dim();
  Matrix input(batch.size(), in_dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double* row = input.row(i);
    std::copy(batch[i]->state.begin(), batch[i]->state.end(), row);
    std::copy(batch[i]->hindsight_goal.begin(), batch[i]->hindsight_goal.end(),
              row + batch[i]->state.size());
  }
  auto [out, cache] = forward(policy.net, input);
  Matrix grad;
  if (policy.discrete) {
    std::vector<std::size_t> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i)
      labels[i] = static_cast<std::size_t>(batch[i]->action.index);
    grad = cross_entropy_with_logits(out, labels).second;
  } else {
    Matrix targets(out.rows, out.cols);
    for (std::size_t i = 0; i < batch.size(); ++i)
      std::copy(batch[i]->action.vec.begin(), batch[i]->action.vec.end(),
                targets.row(i));
    grad = mse_loss(out, targets).second;
  }
  adam_step(policy.net, backward(policy.net, cache, grad), opt);
}

inline SolvabilityTester make_tester(const PchidConfig& cfg, const GoalEnv& env,
                                     const PolicyNet& frozen,
                                     std::shared_ptr<RndPair> rnd) {
  switch (cfg.tester) {
    case TesterKind::Interaction:
      return make_interaction_tester(env, make_greedy_policy(frozen, env));
    case TesterKind::Rnd:
      return make_rnd_tester(std::move(rnd));
    case TesterKind::Oracle: {
      const auto* gw = dynamic_cast<const GridWorldEnv*>(&env);
      if (!gw)
        throw std::invalid_argument("oracle tester requires GridWorld");
      // Needs at least k steps: BFS distance >= k.
      return [gw](const EnvSnapshot&, const State& s, const Goal& g,
                  std::size_t k) {
        return bfs_shortest_steps(gw->decode_map(s), gw->decode_agent(s),
                                  gw->decode_goal_cell(g)) >=
               static_cast<int>(k);
      };
    }
  }
  throw std::logic_error("unreachable");
}

inline HidTrainResult run_hid_trainer(GoalEnv& env, const PchidConfig& cfg,
                                      std::uint64_t seed, HidMode mode) {
  cfg.validate(env.horizon());
  env.seed(Rng::derive(seed, "env"));
  Rng rng_explore(Rng::derive(seed, "explore"));
  Rng rng_sample(Rng::derive(seed, "sample"));
  Rng rng_val(Rng::derive(seed, "val-split"));

  HidTrainResult result;
  result.policy = make_policy_net(env, cfg.hidden, Rng::derive(seed, "policy"),
                                  cfg.activation);
  result.policy.epsilon = cfg.epsilon;
  if (!result.policy.discrete)
    result.policy.sigma = cfg.sigma_fraction * env.max_action();
  AdamState opt = make_adam(result.policy.net, cfg.learning_rate);

  KBufferSet buffers(cfg.max_k, cfg.buffer_capacity);
  std::shared_ptr<RndPair> rnd;
  if (cfg.tester == TesterKind::Rnd)
    rnd = std::make_shared<RndPair>(env.state_dim() + env.goal_dim(),
                                    Rng::derive(seed, "rnd"));
  PolicyNet frozen = result.policy;
  SolvabilityTester tester = make_tester(cfg, env, frozen, rnd);

  // K grows on convergence in PCHID mode, is the full range up front in
  // PEHID mode.
  std::size_t k_max = (mode == HidMode::Pchid) ? 1 : cfg.max_k;
  std::vector<double> accuracy_history;

  for (std::size_t episode = 1; episode <= cfg.episodes; ++episode) {
    auto [s, g] = env.reset();
    EpisodeTrace trace;
    bool success = false;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      Transition tr;
      tr.snapshot_at_state = env.snapshot();
      tr.state = s;
      tr.goal = g;
      tr.action = act(result.policy, s, g, /*explore=*/true, rng_explore, &env);
      const StepResult sr = env.step(tr.action);
      tr.reward = sr.reward;
      tr.next_state = sr.next_state;
      tr.done = sr.done;
      trace.push_back(std::move(tr));
      s = sr.next_state;
      if (sr.done) {
        success = sr.success;
        break;
      }
    }

    if (mode == HidMode::Pehid) {
      frozen = result.policy;
      if (cfg.tester == TesterKind::Interaction)
        tester = make_tester(cfg, env, frozen, rnd);
    }

    std::vector<std::vector<double>> accepted_embeddings;
    for (std::size_t k = 1; k <= k_max; ++k) {
      const auto examples =
          (k == 1) ? relabel_one_step(trace, env)
                   : relabel_k_step(trace, k, env, tester);
      for (const auto& ex : examples) {
        if (rng_val.uniform() < cfg.validation_split) {
          result.validation.push_back(ex);
        } else {
          buffers.store(ex);
          if (rnd) accepted_embeddings.push_back(concat(ex.state, ex.hindsight_goal));
        }
      }
    }
    if (rnd && !accepted_embeddings.empty()) {
      rnd->observe(accepted_embeddings);
      if (cfg.rnd_threshold >= 0.0)
        rnd->set_threshold(cfg.rnd_threshold);
      else
        rnd->set_threshold_from_percentile(cfg.rnd_threshold_percentile);
    }

    if (buffers.total_size() >= cfg.batch_size)
      for (std::size_t u = 0; u < cfg.updates_per_episode; ++u)
        hid_update(result.policy, opt, buffers, cfg.batch_size, rng_sample);

    if (mode == HidMode::Pchid && k_max < cfg.max_k) {
      // plateau detection on the most recent held-out examples
      const std::size_t probe = std::min<std::size_t>(result.validation.size(), 2000);
      const std::vector<HidExample> recent(result.validation.end() - probe,
                                           result.validation.end());
      accuracy_history.push_back(hid_accuracy(result.policy, recent));
      if (accuracy_history.size() >= cfg.convergence_window &&
          buffers.size(k_max) >= cfg.min_buffer_for_growth) {
        const double now = accuracy_history.back();
        const double then =
            accuracy_history[accuracy_history.size() - cfg.convergence_window];
        if (std::abs(now - then) < cfg.convergence_delta) {
          GrowthEvent ev;
          ev.episode = episode;
          ev.new_k = k_max + 1;
          ev.pre_accuracy = now;
          ev.probe = recent;  // all from levels <= the pre-growth k_max
          result.growth_events.push_back(std::move(ev));
          ++k_max;
          accuracy_history.clear();
          frozen = result.policy;
          tester = make_tester(cfg, env, frozen, rnd);
        }
      }
    }

    MetricsRow row;
    row.episode = episode;
    row.success = success ? 1 : 0;
    row.k_max = k_max;
    for (const auto& tr : trace) row.episode_reward += tr.reward;
    for (std::size_t k = 1; k <= cfg.max_k; ++k)
      row.buffer_sizes.push_back(buffers.size(k));
    if (cfg.eval_every > 0 && episode % cfg.eval_every == 0)
      row.eval_success = evaluate(make_greedy_policy(result.policy, env), env,
                                  cfg.eval_episodes, cfg.eval_seed);
    result.log.push_back(std::move(row));
  }
  return result;
}

}  // namespace detail

// Algorithm: curriculum over per-k buffers, K growing on convergence.
inline HidTrainResult run_pchid(GoalEnv& env, const PchidConfig& cfg,
                                std::uint64_t seed) {
  return detail::run_hid_trainer(env, cfg, seed, detail::HidMode::Pchid);
}

// Synchronous variant: the full K range from the start, no convergence
// gate, tester policy refreshed every episode.
inline HidTrainResult run_pehid(GoalEnv& env, const PchidConfig& cfg,
                                std::uint64_t seed) {
  return detail::run_hid_trainer(env, cfg, seed, detail::HidMode::Pehid);
}

}  // namespace pchid
