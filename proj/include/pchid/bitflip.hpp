#pragma once

#include <cmath>

#include "pchid/env.hpp"

namespace pchid {

// n-bit flipping environment. Action a flips the a-th bit (bit 0 is the
// first vector entry). Reward 1 exactly when state equals goal, else 0.
class BitFlipEnv : public GoalEnv {
 public:
  explicit BitFlipEnv(std::size_t n, std::uint64_t seed = 0)
      : n_(n), rng_(seed), state_(n, 0.0), goal_(n, 0.0) {
    if (n == 0) throw std::invalid_argument("BitFlipEnv: n must be positive");
  }

  void seed(std::uint64_t s) override { rng_ = Rng(s); }

  using GoalEnv::reset;
  std::pair<State, Goal> reset() override {
    for (auto& b : state_) b = rng_.bernoulli(0.5) ? 1.0 : 0.0;
    do {
      for (auto& b : goal_) b = rng_.bernoulli(0.5) ? 1.0 : 0.0;
    } while (goal_ == state_);
    step_count_ = 0;
    return {state_, goal_};
  }

  StepResult step(const Action& a) override {
    if (!a.is_discrete || a.index < 0 || static_cast<std::size_t>(a.index) >= n_)
      throw std::out_of_range("BitFlipEnv: action out of range");
    state_[a.index] = 1.0 - state_[a.index];
    ++step_count_;
    StepResult r;
    r.next_state = state_;
    r.success = (state_ == goal_);
    r.reward = (r.success ? 1.0 : 0.0) * reward_scale_;
    r.done = r.success || step_count_ >= horizon();
    return r;
  }

  Goal map_to_goal(const State& s) const override { return s; }

  bool goal_equal(const Goal& a, const Goal& b) const override { return a == b; }

  EnvSnapshot snapshot() const override {
    EnvSnapshot snap;
    snap.data.reserve(2 * n_ + 1);
    snap.data.insert(snap.data.end(), state_.begin(), state_.end());
    snap.data.insert(snap.data.end(), goal_.begin(), goal_.end());
    snap.data.push_back(static_cast<double>(step_count_));
    return snap;
  }

  void restore(const EnvSnapshot& snap) override {
    if (snap.data.size() != 2 * n_ + 1)
      throw std::invalid_argument("BitFlipEnv: bad snapshot");
    state_.assign(snap.data.begin(), snap.data.begin() + n_);
    goal_.assign(snap.data.begin() + n_, snap.data.begin() + 2 * n_);
    step_count_ = static_cast<std::size_t>(snap.data.back());
  }

  std::unique_ptr<GoalEnv> clone() const override {
    return std::make_unique<BitFlipEnv>(*this);
  }

  std::size_t state_dim() const override { return n_; }
  std::size_t goal_dim() const override { return n_; }
  bool discrete_actions() const override { return true; }
  std::size_t num_actions() const override { return n_; }
  std::size_t horizon() const override { return n_; }

  const State& state() const override { return state_; }
  const Goal& goal() const override { return goal_; }

  double success_reward() const override { return 1.0 * reward_scale_; }
  double fail_reward() const override { return 0.0; }

 private:
  std::size_t n_;
  Rng rng_;
  State state_;
  Goal goal_;
  std::size_t step_count_ = 0;
};

}  // namespace pchid
