#pragma once

#include <cmath>
#include <functional>

#include "pchid/env.hpp"
#include "pchid/gridworld.hpp"
#include "pchid/mlp.hpp"

namespace pchid {

// Goal-conditioned policy head over an MLP taking (state ++ goal).
struct PolicyNet {
  MlpParams net;
  bool discrete = true;
  double epsilon = 0.2;     // epsilon-greedy exploration (discrete)
  double sigma = 0.0;       // gaussian exploration stddev (continuous)
  double max_action = 0.0;  // action norm cap (continuous)
};

inline std::vector<double> concat(const State& s, const Goal& g) {
  std::vector<double> x;
  x.reserve(s.size() + g.size());
  x.insert(x.end(), s.begin(), s.end());
  x.insert(x.end(), g.begin(), g.end());
  return x;
}

inline PolicyNet make_policy_net(const GoalEnv& env,
                                 const std::vector<std::size_t>& hidden,
                                 std::uint64_t seed,
                                 Activation activation = Activation::Tanh) {
  PolicyNet p;
  p.discrete = env.discrete_actions();
  std::vector<std::size_t> sizes{env.state_dim() + env.goal_dim()};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(p.discrete ? env.num_actions() : env.action_dim());
  p.net = init_params(sizes, activation,
                      p.discrete ? OutputHead::Logits : OutputHead::Linear, seed);
  if (!p.discrete) p.max_action = env.max_action();
  return p;
}

inline std::vector<double> policy_logits(const PolicyNet& p, const State& s,
                                         const Goal& g) {
  return forward_single(p.net, concat(s, g));
}

inline int argmax(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = static_cast<int>(i);
  return best;
}

// Argmax restricted to actions the environment can execute from this
// state; falls back to the plain argmax if none qualify.
inline int argmax_valid(const std::vector<double>& scores, const GoalEnv& env,
                        const State& s) {
  int best = -1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!env.action_valid(s, static_cast<int>(i))) continue;
    if (best < 0 || scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best >= 0 ? best : argmax(scores);
}

inline void clip_to_norm(std::vector<double>& v, double cap) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (cap > 0.0 && norm > cap)
    for (auto& x : v) x *= cap / norm;
}

// Greedy when explore is off; epsilon-random / gaussian-perturbed when on.
// When an environment is supplied, discrete choices (random and greedy)
// are restricted to actions that do something from the current state.
inline Action act(const PolicyNet& p, const State& s, const Goal& g,
                  bool explore, Rng& rng, const GoalEnv* env = nullptr) {
  if (p.discrete) {
    const auto logits = policy_logits(p, s, g);
    if (explore && rng.bernoulli(p.epsilon)) {
      if (env) {
        std::vector<int> valid;
        for (std::size_t i = 0; i < logits.size(); ++i)
          if (env->action_valid(s, static_cast<int>(i)))
            valid.push_back(static_cast<int>(i));
        if (!valid.empty())
          return Action::discrete(valid[rng.uniform_int(valid.size())]);
      }
      return Action::discrete(static_cast<int>(rng.uniform_int(logits.size())));
    }
    return Action::discrete(env ? argmax_valid(logits, *env, s)
                                : argmax(logits));
  }
  std::vector<double> a = policy_logits(p, s, g);
  if (explore && p.sigma > 0.0)
    for (auto& x : a) x += rng.normal(0.0, p.sigma);
  clip_to_norm(a, p.max_action);
  return Action::continuous(std::move(a));
}

// A deterministic policy closure over network-encoded (state, goal).
using GreedyPolicy = std::function<Action(const State&, const Goal&)>;

inline GreedyPolicy make_greedy_policy(PolicyNet frozen) {
  return [policy = std::move(frozen)](const State& s, const Goal& g) {
    if (policy.discrete)
      return Action::discrete(argmax(policy_logits(policy, s, g)));
    std::vector<double> a = policy_logits(policy, s, g);
    clip_to_norm(a, policy.max_action);
    return Action::continuous(std::move(a));
  };
}

// Environment-aware variant: the argmax skips actions that would do
// nothing from the current state. Without this a deterministic policy
// whose top choice is a no-op repeats it until the horizon runs out.
inline GreedyPolicy make_greedy_policy(PolicyNet frozen, const GoalEnv& env) {
  std::shared_ptr<GoalEnv> ref = env.clone();
  return [policy = std::move(frozen), ref](const State& s, const Goal& g) {
    if (policy.discrete)
      return Action::discrete(
          argmax_valid(policy_logits(policy, s, g), *ref, s));
    std::vector<double> a = policy_logits(policy, s, g);
    clip_to_norm(a, policy.max_action);
    return Action::continuous(std::move(a));
  };
}

// Shortest-path oracle for GridWorld, working from the same encodings the
// learned policies see. Picks the first compass move that decreases the
// BFS distance to the goal cell.
inline GreedyPolicy make_bfs_oracle_policy(const GridWorldEnv& env) {
  const GridWorldEnv* ref = &env;
  return [ref](const State& s, const Goal& g) {
    const GridMap map = ref->decode_map(s);
    const Cell agent = ref->decode_agent(s);
    const Cell goal = ref->decode_goal_cell(g);
    const int here = bfs_shortest_steps(map, agent, goal);
    if (here <= 0) return Action::discrete(0);
    for (int a = 0; a < 8; ++a) {
      const auto [dr, dc] = kCompassMoves[a];
      const Cell nxt{agent.r + dr, agent.c + dc};
      if (map.blocked(nxt.r, nxt.c)) continue;
      if (bfs_shortest_steps(map, nxt, goal) == here - 1)
        return Action::discrete(a);
    }
    return Action::discrete(0);
  };
}

}  // namespace pchid
