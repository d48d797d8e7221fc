#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "pchid/rng.hpp"

namespace pchid {

using State = std::vector<double>;
using Goal = std::vector<double>;

// Discrete envs use `index`; continuous envs use `vec`.
struct Action {
  bool is_discrete = true;
  int index = 0;
  std::vector<double> vec;

  static Action discrete(int i) {
    Action a;
    a.is_discrete = true;
    a.index = i;
    return a;
  }
  static Action continuous(std::vector<double> v) {
    Action a;
    a.is_discrete = false;
    a.vec = std::move(v);
    return a;
  }
};

struct StepResult {
  State next_state;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

// Opaque full-state capture, sufficient to replay deterministically.
struct EnvSnapshot {
  std::vector<double> data;
};

// Deterministic multi-goal environment. All randomness lives in reset();
// step() is a pure function of the captured state, which is what makes
// snapshot/restore probing sound.
class GoalEnv {
 public:
  virtual ~GoalEnv() = default;

  virtual void seed(std::uint64_t s) = 0;
  virtual std::pair<State, Goal> reset() = 0;
  std::pair<State, Goal> reset(std::uint64_t s) {
    seed(s);
    return reset();
  }

  virtual StepResult step(const Action& a) = 0;

  // Whether a discrete action actually does something from this state.
  // Environments where some moves are no-ops (e.g. walking into a wall)
  // override this so deterministic policies can skip actions that would
  // trap them in a loop.
  virtual bool action_valid(const State&, int) const { return true; }

  // The state-goal mapping m: which goal does this state achieve.
  virtual Goal map_to_goal(const State& s) const = 0;
  virtual bool goal_equal(const Goal& a, const Goal& b) const = 0;

  virtual EnvSnapshot snapshot() const = 0;
  virtual void restore(const EnvSnapshot& snap) = 0;
  virtual std::unique_ptr<GoalEnv> clone() const = 0;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t goal_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual std::size_t num_actions() const { return 0; }
  virtual std::size_t action_dim() const { return 0; }
  virtual double max_action() const { return 0.0; }
  virtual std::size_t horizon() const = 0;

  virtual const State& state() const = 0;
  virtual const Goal& goal() const = 0;

  // Reward convention, used when recomputing rewards for relabeled goals.
  virtual double success_reward() const = 0;
  virtual double fail_reward() const = 0;

  // Multiplies every emitted reward; used by the reward-invariance checks.
  void set_reward_scale(double s) { reward_scale_ = s; }
  double reward_scale() const { return reward_scale_; }

 protected:
  double reward_scale_ = 1.0;
};

}  // namespace pchid
