#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

#include "pchid/env.hpp"

namespace pchid {

struct Transition {
  State state;
  Goal goal;
  Action action;
  double reward = 0.0;
  State next_state;
  bool done = false;
  // Capture of the environment at `state`; what the Interaction test
  // restores to.
  EnvSnapshot snapshot_at_state;
};

using EpisodeTrace = std::vector<Transition>;

struct HidExample {
  State state;
  Goal hindsight_goal;
  Action action;
  std::size_t k = 1;
};

// The per-k experience buffers. Capped FIFO rings, one per step count.
class KBufferSet {
 public:
  explicit KBufferSet(std::size_t max_k, std::size_t capacity_per_k = 50000)
      : buffers_(max_k), capacity_(capacity_per_k) {}

  std::size_t max_k() const { return buffers_.size(); }
  std::size_t capacity_per_k() const { return capacity_; }

  void store(const HidExample& ex) {
    if (ex.k < 1 || ex.k > buffers_.size())
      throw std::out_of_range("KBufferSet: k out of range");
    auto& buf = buffers_[ex.k - 1];
    if (buf.size() >= capacity_) buf.pop_front();
    buf.push_back(ex);
  }

  void store(const std::vector<HidExample>& examples) {
    for (const auto& ex : examples) store(ex);
  }

  std::size_t size(std::size_t k) const { return buffers_.at(k - 1).size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& b : buffers_) n += b.size();
    return n;
  }

  const std::deque<HidExample>& buffer(std::size_t k) const {
    return buffers_.at(k - 1);
  }

  // Draws `total_size` examples across all non-empty buffers, proportional
  // to buffer sizes (with replacement, uniform within a buffer).
  std::vector<const HidExample*> sample_joint_minibatch(std::size_t total,
                                                        Rng& rng) const {
    const std::size_t n = total_size();
    if (n == 0) throw std::runtime_error("KBufferSet: all buffers empty");
    std::vector<const HidExample*> batch;
    batch.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
      std::size_t idx = rng.uniform_int(n);
      for (const auto& b : buffers_) {
        if (idx < b.size()) {
          batch.push_back(&b[idx]);
          break;
        }
        idx -= b.size();
      }
    }
    return batch;
  }

  // Debug dump: one line per example, "k,state...,goal...,action".
  void dump(std::ostream& out) const {
    for (const auto& buf : buffers_) {
      for (const auto& ex : buf) {
        out << ex.k;
        for (double v : ex.state) out << ',' << v;
        for (double v : ex.hindsight_goal) out << ',' << v;
        if (ex.action.is_discrete) {
          out << ',' << ex.action.index;
        } else {
          for (double v : ex.action.vec) out << ',' << v;
        }
        out << '\n';
      }
    }
  }

 private:
  std::vector<std::deque<HidExample>> buffers_;
  std::size_t capacity_;
};

// One example per transition, goal relabeled to the achieved next state.
// Stalls (m(s_{t+1}) identical to m(s_t)) are skipped: they would be
// 0-step pairs, which the partition excludes. The skip uses exact
// equality, not the success tolerance — in continuous envs a single step
// can land inside the tolerance ball yet still carry a valid action label.
inline std::vector<HidExample> relabel_one_step(const EpisodeTrace& trace,
                                                const GoalEnv& env) {
  std::vector<HidExample> out;
  out.reserve(trace.size());
  for (const auto& tr : trace) {
    Goal g_next = env.map_to_goal(tr.next_state);
    if (env.map_to_goal(tr.state) == g_next) continue;
    out.push_back({tr.state, std::move(g_next), tr.action, 1});
  }
  return out;
}

// tester(snapshot, state, hindsight_goal, k) decides whether the pair
// genuinely needs at least k steps; bound to a frozen policy by the caller.
using SolvabilityTester = std::function<bool(
    const EnvSnapshot&, const State&, const Goal&, std::size_t)>;

inline std::vector<HidExample> relabel_k_step(const EpisodeTrace& trace,
                                              std::size_t k,
                                              const GoalEnv& env,
                                              const SolvabilityTester& tester) {
  if (k < 2) throw std::invalid_argument("relabel_k_step: k must be >= 2");
  std::vector<HidExample> out;
  for (std::size_t t = 0; t + k <= trace.size(); ++t) {
    const auto& tr = trace[t];
    Goal g_prime = env.map_to_goal(trace[t + k - 1].next_state);
    if (env.map_to_goal(tr.state) == g_prime) continue;
    if (!tester(tr.snapshot_at_state, tr.state, g_prime, k)) continue;
    out.push_back({tr.state, std::move(g_prime), tr.action, k});
  }
  return out;
}

enum class HerStrategy { Final, Future };

// Classic HER relabeling for the DQN baseline: returns the relabeled
// transitions only (callers keep the originals as well). Rewards are
// recomputed under the environment's own convention.
inline std::vector<Transition> her_relabel(const EpisodeTrace& trace,
                                           HerStrategy strategy,
                                           std::size_t k_future, Rng& rng,
                                           const GoalEnv& env) {
  std::vector<Transition> out;
  if (trace.empty()) return out;
  auto make = [&](const Transition& tr, Goal g_new) {
    Transition r = tr;
    const bool success = env.goal_equal(env.map_to_goal(r.next_state), g_new);
    r.goal = std::move(g_new);
    r.reward = success ? env.success_reward() : env.fail_reward();
    r.done = success || tr.done;
    return r;
  };
  if (strategy == HerStrategy::Final) {
    const Goal g_final = env.map_to_goal(trace.back().next_state);
    for (const auto& tr : trace) out.push_back(make(tr, g_final));
  } else {
    for (std::size_t t = 0; t < trace.size(); ++t) {
      for (std::size_t j = 0; j < k_future; ++j) {
        // goal achieved at a strictly later or equal future step's outcome
        const std::size_t fut = t + rng.uniform_int(trace.size() - t);
        out.push_back(make(trace[t], env.map_to_goal(trace[fut].next_state)));
      }
    }
  }
  return out;
}

}  // namespace pchid
