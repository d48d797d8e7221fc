#pragma once

#include <cmath>
#include <memory>

#include "pchid/trainers.hpp"

namespace pchid {

// ---------------------------------------------------------------------------
// Combination primitives

// Discrete averaging: both score vectors are log-softmax-normalized before
// mixing, so adding a constant to the Q-values cannot change the choice.
inline std::vector<double> combine_average_scores(
    const std::vector<double>& q_values,
    const std::vector<double>& policy_logits, double w) {
  const auto lq = log_softmax(q_values);
  const auto lp = log_softmax(policy_logits);
  std::vector<double> mixed(lq.size());
  for (std::size_t i = 0; i < lq.size(); ++i)
    mixed[i] = w * lq[i] + (1.0 - w) * lp[i];
  return mixed;
}

inline int combine_average_discrete(const std::vector<double>& q_values,
                                    const std::vector<double>& policy_logits,
                                    double w) {
  return argmax(combine_average_scores(q_values, policy_logits, w));
}

inline std::vector<double> combine_average_continuous(
    const std::vector<double>& a_rl, const std::vector<double>& a_pchid,
    double w) {
  std::vector<double> out(a_rl.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = w * a_rl[i] + (1.0 - w) * a_pchid[i];
  return out;
}

// Negative KL from the supervised module's action distribution to the RL
// agent's. Zero exactly when the distributions agree, never positive.
inline double intrinsic_reward_discrete(const std::vector<double>& pchid_logits,
                                        const std::vector<double>& rl_logits) {
  const auto lp = log_softmax(pchid_logits);
  const auto lr = log_softmax(rl_logits);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i)
    kl += std::exp(lp[i]) * (lp[i] - lr[i]);
  return -std::max(kl, 0.0);
}

inline double intrinsic_reward_continuous(const std::vector<double>& a_rl,
                                          const std::vector<double>& a_pchid) {
  double d = 0.0;
  for (std::size_t i = 0; i < a_rl.size(); ++i)
    d += (a_rl[i] - a_pchid[i]) * (a_rl[i] - a_pchid[i]);
  return -d;
}

enum class ComboMode { None, Joint, Average, Intrinsic };

inline const char* to_string(ComboMode m) {
  switch (m) {
    case ComboMode::None: return "none";
    case ComboMode::Joint: return "joint";
    case ComboMode::Average: return "average";
    default: return "intrinsic";
  }
}

struct CombinationConfig {
  ComboMode mode = ComboMode::None;
  double joint_lambda = 1.0;    // weight of the supervised HID gradient
  double average_weight = 0.5;  // w: 1 = pure RL, 0 = pure HID module
  double intrinsic_beta = 1.0;  // scale of the shaped reward
  std::size_t hid_max_k = 5;    // HID module depth inside combos
};

// ---------------------------------------------------------------------------
// Embedded HID module used by the combination strategies: synchronous
// relabeling into per-k buffers, tester policy refreshed every episode.
class HidModule {
 public:
  HidModule(const GoalEnv& env, std::size_t max_k, std::uint64_t seed,
            const std::vector<std::size_t>& hidden = {64, 64},
            double learning_rate = 1e-3, std::size_t capacity = 50000)
      : max_k_(max_k), buffers_(max_k, capacity) {
    policy_ = make_policy_net(env, hidden, Rng::derive(seed, "hid-module"));
    opt_ = make_adam(policy_.net, learning_rate);
  }

  void observe_episode(const EpisodeTrace& trace, const GoalEnv& env) {
    SolvabilityTester tester =
        make_interaction_tester(env, make_greedy_policy(policy_, env));
    buffers_.store(relabel_one_step(trace, env));
    for (std::size_t k = 2; k <= max_k_; ++k)
      buffers_.store(relabel_k_step(trace, k, env, tester));
  }

  void train(std::size_t updates, std::size_t batch_size, Rng& rng) {
    if (buffers_.total_size() < batch_size) return;
    for (std::size_t u = 0; u < updates; ++u)
      detail::hid_update(policy_, opt_, buffers_, batch_size, rng);
  }

  const PolicyNet& policy() const { return policy_; }
  const KBufferSet& buffers() const { return buffers_; }

 private:
  std::size_t max_k_;
  PolicyNet policy_;
  AdamState opt_;
  KBufferSet buffers_;
};

// ---------------------------------------------------------------------------
// UVFA-DQN with optional HER and optional PCHID combination strategy.

struct DqnConfig {
  std::size_t episodes = 500;
  double gamma = 0.98;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 64;
  std::size_t updates_per_episode = 40;
  std::size_t target_sync_episodes = 20;
  double learning_rate = 1e-3;
  std::vector<std::size_t> hidden = {64, 64};
  double eps_start = 1.0;
  double eps_end = 0.05;
  bool her = false;
  HerStrategy her_strategy = HerStrategy::Future;
  std::size_t her_k = 4;
  std::size_t eval_every = 0;
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 1234;
};

struct DqnResult {
  PolicyNet q;                              // Q-network over (state ++ goal)
  std::unique_ptr<HidModule> hid_module;    // set for combo modes
  std::vector<MetricsRow> log;
  CombinationConfig combo;

  // The deployable greedy policy, respecting the combination mode. Pass
  // the environment to restrict choices to executable actions.
  GreedyPolicy greedy(const GoalEnv* env = nullptr) const {
    if (combo.mode == ComboMode::Average && hid_module) {
      const PolicyNet qn = q;
      const PolicyNet pn = hid_module->policy();
      const double w = combo.average_weight;
      std::shared_ptr<GoalEnv> ref = env ? env->clone() : nullptr;
      return [qn, pn, w, ref](const State& s, const Goal& g) {
        const auto mixed = combine_average_scores(
            policy_logits(qn, s, g), policy_logits(pn, s, g), w);
        return Action::discrete(ref ? argmax_valid(mixed, *ref, s)
                                    : argmax(mixed));
      };
    }
    return env ? make_greedy_policy(q, *env) : make_greedy_policy(q);
  }
};

namespace detail {

struct ReplayRing {
  std::vector<Transition> data;
  std::size_t capacity;
  std::size_t next = 0;

  explicit ReplayRing(std::size_t cap) : capacity(cap) { data.reserve(1024); }

  void push(Transition tr) {
    tr.snapshot_at_state.data.clear();  // replay does not need snapshots
    if (data.size() < capacity) {
      data.push_back(std::move(tr));
    } else {
      data[next] = std::move(tr);
      next = (next + 1) % capacity;
    }
  }
};

// One TD step on a minibatch; optionally adds lambda times a supervised
// HID gradient computed on the same network (joint training).
inline void dqn_update(PolicyNet& q, const PolicyNet& target, AdamState& opt,
                       const ReplayRing& replay, const DqnConfig& cfg,
                       Rng& rng, double joint_lambda,
                       const KBufferSet* hid_buffers, Rng* rng_hid) {
  const std::size_t n = cfg.batch_size;
  const std::size_t in_dim = q.net.input_dim();
  Matrix input(n, in_dim), next_input(n, in_dim);
  std::vector<const Transition*> batch(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch[i] = &replay.data[rng.uniform_int(replay.data.size())];
    const auto& tr = *batch[i];
    double* row = input.row(i);
    std::copy(tr.state.begin(), tr.state.end(), row);
    std::copy(tr.goal.begin(), tr.goal.end(), row + tr.state.size());
    double* nrow = next_input.row(i);
    std::copy(tr.next_state.begin(), tr.next_state.end(), nrow);
    std::copy(tr.goal.begin(), tr.goal.end(), nrow + tr.next_state.size());
  }
  auto [qvals, cache] = forward(q.net, input);
  auto [next_q, ncache] = forward(target.net, next_input);
  Matrix grad(qvals.rows, qvals.cols);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tr = *batch[i];
    double best_next = next_q.at(i, 0);
    for (std::size_t a = 1; a < next_q.cols; ++a)
      best_next = std::max(best_next, next_q.at(i, a));
    const double target_val =
        tr.reward + (tr.done ? 0.0 : cfg.gamma * best_next);
    const auto a = static_cast<std::size_t>(tr.action.index);
    // Huber gradient (delta = 1): clamps the per-sample magnitude so large
    // TD errors cannot drown out other loss terms sharing the network
    const double err = qvals.at(i, a) - target_val;
    grad.at(i, a) = std::clamp(err, -1.0, 1.0) * inv_n;
  }
  MlpGradients grads = backward(q.net, cache, grad);
  if (joint_lambda != 0.0 && hid_buffers && rng_hid &&
      hid_buffers->total_size() >= n) {
    const auto hid_batch = hid_buffers->sample_joint_minibatch(n, *rng_hid);
    Matrix hin(hid_batch.size(), in_dim);
    std::vector<std::size_t> labels(hid_batch.size());
    for (std::size_t i = 0; i < hid_batch.size(); ++i) {
      double* row = hin.row(i);
      std::copy(hid_batch[i]->state.begin(), hid_batch[i]->state.end(), row);
      std::copy(hid_batch[i]->hindsight_goal.begin(),
                hid_batch[i]->hindsight_goal.end(),
                row + hid_batch[i]->state.size());
      labels[i] = static_cast<std::size_t>(hid_batch[i]->action.index);
    }
    auto [hout, hcache] = forward(q.net, hin);
    auto hgrad = cross_entropy_with_logits(hout, labels).second;
    MlpGradients hid_grads = backward(q.net, hcache, hgrad);
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
      for (std::size_t m = 0; m < grads.weights[l].values.size(); ++m)
        grads.weights[l].values[m] += joint_lambda * hid_grads.weights[l].values[m];
      for (std::size_t m = 0; m < grads.biases[l].size(); ++m)
        grads.biases[l][m] += joint_lambda * hid_grads.biases[l][m];
    }
  }
  adam_step(q.net, grads, opt);
}

}  // namespace detail

inline DqnResult dqn_train(GoalEnv& env, const DqnConfig& cfg,
                           std::uint64_t seed,
                           const CombinationConfig& combo = {}) {
  if (!env.discrete_actions())
    throw std::invalid_argument("dqn_train: discrete envs only");
  env.seed(Rng::derive(seed, "env"));
  Rng rng_explore(Rng::derive(seed, "explore"));
  Rng rng_sample(Rng::derive(seed, "sample"));
  Rng rng_her(Rng::derive(seed, "her"));
  Rng rng_hid(Rng::derive(seed, "hid-sample"));

  DqnResult result;
  result.combo = combo;
  result.q = make_policy_net(env, cfg.hidden, Rng::derive(seed, "qnet"));
  PolicyNet target = result.q;
  AdamState opt = make_adam(result.q.net, cfg.learning_rate);
  detail::ReplayRing replay(cfg.replay_capacity);

  const bool joint = combo.mode == ComboMode::Joint;
  const bool average = combo.mode == ComboMode::Average;
  const bool intrinsic = combo.mode == ComboMode::Intrinsic;
  KBufferSet joint_buffers(combo.hid_max_k, 50000);
  if (average || intrinsic)
    result.hid_module = std::make_unique<HidModule>(env, combo.hid_max_k,
                                                    Rng::derive(seed, "combo"));

  const std::size_t decay_span = std::max<std::size_t>(1, cfg.episodes / 2);
  for (std::size_t episode = 1; episode <= cfg.episodes; ++episode) {
    const double frac =
        std::min(1.0, static_cast<double>(episode - 1) / decay_span);
    const double epsilon = cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);

    auto [s, g] = env.reset();
    EpisodeTrace trace;
    bool success = false;
    double intrinsic_sum = 0.0;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      Transition tr;
      tr.snapshot_at_state = env.snapshot();
      tr.state = s;
      tr.goal = g;
      if (rng_explore.bernoulli(epsilon)) {
        std::vector<int> valid;
        for (std::size_t a = 0; a < env.num_actions(); ++a)
          if (env.action_valid(s, static_cast<int>(a)))
            valid.push_back(static_cast<int>(a));
        tr.action = Action::discrete(
            valid.empty()
                ? static_cast<int>(rng_explore.uniform_int(env.num_actions()))
                : valid[rng_explore.uniform_int(valid.size())]);
      } else if (average && result.hid_module) {
        tr.action = Action::discrete(argmax_valid(
            combine_average_scores(
                policy_logits(result.q, s, g),
                policy_logits(result.hid_module->policy(), s, g),
                combo.average_weight),
            env, s));
      } else {
        tr.action =
            Action::discrete(argmax_valid(policy_logits(result.q, s, g), env, s));
      }
      const StepResult sr = env.step(tr.action);
      tr.reward = sr.reward;
      if (intrinsic && result.hid_module) {
        const double r_int = intrinsic_reward_discrete(
            policy_logits(result.hid_module->policy(), s, g),
            policy_logits(result.q, s, g));
        tr.reward += combo.intrinsic_beta * r_int;
        intrinsic_sum += r_int;
      }
      tr.next_state = sr.next_state;
      tr.done = sr.done;
      trace.push_back(tr);
      s = sr.next_state;
      if (sr.done) {
        success = sr.success;
        break;
      }
    }

    for (const auto& tr : trace) replay.push(tr);
    if (cfg.her)
      for (auto& tr : her_relabel(trace, cfg.her_strategy, cfg.her_k, rng_her, env))
        replay.push(std::move(tr));

    if (joint) {
      SolvabilityTester tester =
          make_interaction_tester(env, make_greedy_policy(result.q, env));
      joint_buffers.store(relabel_one_step(trace, env));
      for (std::size_t k = 2; k <= combo.hid_max_k; ++k)
        joint_buffers.store(relabel_k_step(trace, k, env, tester));
    }
    if (result.hid_module) {
      result.hid_module->observe_episode(trace, env);
      result.hid_module->train(cfg.updates_per_episode, cfg.batch_size, rng_hid);
    }

    if (replay.data.size() >= cfg.batch_size)
      for (std::size_t u = 0; u < cfg.updates_per_episode; ++u)
        detail::dqn_update(result.q, target, opt, replay, cfg, rng_sample,
                           joint ? combo.joint_lambda : 0.0,
                           joint ? &joint_buffers : nullptr, &rng_hid);

    if (episode % cfg.target_sync_episodes == 0) target = result.q;

    MetricsRow row;
    row.episode = episode;
    row.success = success ? 1 : 0;
    row.k_max = joint || result.hid_module ? combo.hid_max_k : 1;
    for (const auto& tr : trace) row.episode_reward += tr.reward;
    row.intrinsic_mean =
        trace.empty() ? 0.0 : intrinsic_sum / static_cast<double>(trace.size());
    row.mixing_weight = average ? combo.average_weight : -1.0;
    if (cfg.eval_every > 0 && episode % cfg.eval_every == 0)
      row.eval_success =
          evaluate(result.greedy(&env), env, cfg.eval_episodes, cfg.eval_seed);
    result.log.push_back(std::move(row));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Minimal clipped-surrogate policy gradient for continuous envs. Single
// value-baseline advantages, no GAE; deliberately a floor baseline.

struct PpoLiteConfig {
  std::size_t episodes = 200;
  std::size_t episodes_per_update = 4;
  std::size_t epochs = 6;
  double gamma = 0.99;
  double clip_ratio = 0.2;
  double learning_rate = 3e-4;
  std::vector<std::size_t> hidden = {64, 64};
  double init_sigma_fraction = 0.5;  // of max_action
  double intrinsic_beta = 0.0;       // optional PCHID shaping
  std::size_t hid_max_k = 3;
  std::size_t eval_every = 0;
  std::size_t eval_episodes = 100;
  std::uint64_t eval_seed = 1234;
};

struct PpoLiteResult {
  PolicyNet actor;
  MlpParams critic;
  std::vector<double> log_sigma;
  std::unique_ptr<HidModule> hid_module;
  std::vector<MetricsRow> log;
  std::vector<double> last_update_ratios;  // post-update probability ratios
};

inline PpoLiteResult ppo_lite_train(GoalEnv& env, const PpoLiteConfig& cfg,
                                    std::uint64_t seed) {
  if (env.discrete_actions())
    throw std::invalid_argument("ppo_lite_train: continuous envs only");
  env.seed(Rng::derive(seed, "env"));
  Rng rng_explore(Rng::derive(seed, "explore"));
  Rng rng_hid(Rng::derive(seed, "hid-sample"));

  PpoLiteResult result;
  result.actor = make_policy_net(env, cfg.hidden, Rng::derive(seed, "actor"),
                                 Activation::Tanh);
  std::vector<std::size_t> critic_sizes{env.state_dim() + env.goal_dim()};
  critic_sizes.insert(critic_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  critic_sizes.push_back(1);
  result.critic = init_params(critic_sizes, Activation::Tanh, OutputHead::Linear,
                              Rng::derive(seed, "critic"));
  result.log_sigma.assign(env.action_dim(),
                          std::log(cfg.init_sigma_fraction * env.max_action()));
  AdamState actor_opt = make_adam(result.actor.net, cfg.learning_rate);
  AdamState critic_opt = make_adam(result.critic, cfg.learning_rate);
  std::vector<double> sigma_m(env.action_dim(), 0.0), sigma_v(env.action_dim(), 0.0);
  std::size_t sigma_steps = 0;

  if (cfg.intrinsic_beta != 0.0)
    result.hid_module = std::make_unique<HidModule>(env, cfg.hid_max_k,
                                                    Rng::derive(seed, "combo"));

  struct Sample {
    std::vector<double> input;
    std::vector<double> action;
    double logp_old = 0.0;
    double ret = 0.0;
  };
  std::vector<Sample> rollout;
  std::vector<EpisodeTrace> pending_traces;

  auto log_prob = [&](const std::vector<double>& mean,
                      const std::vector<double>& a) {
    double lp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double sig = std::exp(result.log_sigma[i]);
      const double z = (a[i] - mean[i]) / sig;
      lp += -0.5 * z * z - result.log_sigma[i] - 0.91893853320467274178;
    }
    return lp;
  };

  for (std::size_t episode = 1; episode <= cfg.episodes; ++episode) {
    auto [s, g] = env.reset();
    EpisodeTrace trace;
    std::vector<Sample> ep_samples;
    bool success = false;
    double env_reward = 0.0;
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const auto input = concat(s, g);
      const auto mean = forward_single(result.actor.net, input);
      std::vector<double> a(mean.size());
      for (std::size_t i = 0; i < a.size(); ++i)
        a[i] = mean[i] + std::exp(result.log_sigma[i]) * rng_explore.normal();
      Sample sample;
      sample.input = input;
      sample.action = a;
      sample.logp_old = log_prob(mean, a);
      const StepResult sr = env.step(Action::continuous(a));
      double r = sr.reward;
      env_reward += sr.reward;
      if (result.hid_module) {
        const auto a_hid =
            policy_logits(result.hid_module->policy(), s, g);
        r += cfg.intrinsic_beta * intrinsic_reward_continuous(mean, a_hid);
      }
      sample.ret = r;  // reward for now; return fill-in below
      ep_samples.push_back(std::move(sample));
      Transition tr;
      tr.snapshot_at_state = env.snapshot();
      tr.state = s;
      tr.goal = g;
      tr.action = Action::continuous(a);
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
    // rewards-to-go
    double running = 0.0;
    for (std::size_t i = ep_samples.size(); i-- > 0;) {
      running = ep_samples[i].ret + cfg.gamma * running;
      ep_samples[i].ret = running;
    }
    rollout.insert(rollout.end(), ep_samples.begin(), ep_samples.end());
    pending_traces.push_back(std::move(trace));

    if (result.hid_module) {
      result.hid_module->observe_episode(pending_traces.back(), env);
      result.hid_module->train(10, 64, rng_hid);
    }

    if (episode % cfg.episodes_per_update == 0 && !rollout.empty()) {
      const std::size_t n = rollout.size();
      Matrix input(n, rollout[0].input.size());
      for (std::size_t i = 0; i < n; ++i)
        std::copy(rollout[i].input.begin(), rollout[i].input.end(), input.row(i));
      for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto [values, vcache] = forward(result.critic, input);
        auto [means, acache] = forward(result.actor.net, input);
        // advantages from the current value baseline
        std::vector<double> adv(n);
        for (std::size_t i = 0; i < n; ++i)
          adv[i] = rollout[i].ret - values.at(i, 0);
        Matrix actor_grad(n, means.cols);
        std::vector<double> sigma_grad(means.cols, 0.0);
        result.last_update_ratios.assign(n, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
          const auto& smp = rollout[i];
          std::vector<double> mean_i(means.row(i), means.row(i) + means.cols);
          const double lp = log_prob(mean_i, smp.action);
          const double ratio = std::exp(lp - smp.logp_old);
          result.last_update_ratios[i] = ratio;
          const bool clipped =
              (adv[i] > 0.0 && ratio > 1.0 + cfg.clip_ratio) ||
              (adv[i] < 0.0 && ratio < 1.0 - cfg.clip_ratio);
          if (clipped) continue;  // zero gradient on the clipped branch
          const double coeff = -ratio * adv[i] / static_cast<double>(n);
          for (std::size_t j = 0; j < means.cols; ++j) {
            const double sig = std::exp(result.log_sigma[j]);
            const double z = (smp.action[j] - mean_i[j]) / sig;
            actor_grad.at(i, j) = coeff * (z / sig);
            sigma_grad[j] += coeff * (z * z - 1.0);
          }
        }
        adam_step(result.actor.net,
                  backward(result.actor.net, acache, actor_grad), actor_opt);
        // shared Adam hyperparameters for the log-sigma vector
        ++sigma_steps;
        const double bc1 = 1.0 - std::pow(actor_opt.beta1, sigma_steps);
        const double bc2 = 1.0 - std::pow(actor_opt.beta2, sigma_steps);
        for (std::size_t j = 0; j < result.log_sigma.size(); ++j) {
          sigma_m[j] = actor_opt.beta1 * sigma_m[j] + (1 - actor_opt.beta1) * sigma_grad[j];
          sigma_v[j] = actor_opt.beta2 * sigma_v[j] +
                       (1 - actor_opt.beta2) * sigma_grad[j] * sigma_grad[j];
          result.log_sigma[j] -= cfg.learning_rate * (sigma_m[j] / bc1) /
                                 (std::sqrt(sigma_v[j] / bc2) + actor_opt.epsilon_num);
          result.log_sigma[j] = std::max(result.log_sigma[j], std::log(1e-4));
        }
        Matrix value_targets(n, 1);
        for (std::size_t i = 0; i < n; ++i)
          value_targets.at(i, 0) = rollout[i].ret;
        auto vgrad = mse_loss(values, value_targets).second;
        adam_step(result.critic, backward(result.critic, vcache, vgrad),
                  critic_opt);
      }
      rollout.clear();
      pending_traces.clear();
    }

    MetricsRow row;
    row.episode = episode;
    row.success = success ? 1 : 0;
    row.episode_reward = env_reward;
    if (cfg.eval_every > 0 && episode % cfg.eval_every == 0)
      row.eval_success = evaluate(make_greedy_policy(result.actor), env,
                                  cfg.eval_episodes, cfg.eval_seed);
    result.log.push_back(std::move(row));
  }
  return result;
}

}  // namespace pchid
