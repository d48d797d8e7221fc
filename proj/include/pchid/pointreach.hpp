#pragma once

#include <cmath>

#include "pchid/env.hpp"

namespace pchid {

// Kinematic 3-D reaching in the unit cube. Actions are displacement
// vectors clipped to max_step; success is proximity within tolerance.
// Reward convention: 0 on success, -1 otherwise.
class PointReachEnv : public GoalEnv {
 public:
  explicit PointReachEnv(std::uint64_t seed = 0, double max_step = 0.05,
                         double tolerance = 0.05, std::size_t horizon = 50)
      : max_step_(max_step), tolerance_(tolerance), horizon_(horizon),
        rng_(seed), position_(kDim, 0.0), goal_(kDim, 0.0) {}

  static constexpr std::size_t kDim = 3;

  void seed(std::uint64_t s) override { rng_ = Rng(s); }

  using GoalEnv::reset;
  std::pair<State, Goal> reset() override {
    do {
      for (auto& p : position_) p = rng_.uniform();
      for (auto& g : goal_) g = rng_.uniform();
    } while (distance(position_, goal_) <= tolerance_);
    step_count_ = 0;
    return {position_, goal_};
  }

  StepResult step(const Action& a) override {
    if (a.is_discrete || a.vec.size() != kDim)
      throw std::invalid_argument("PointReachEnv: expects 3-d continuous action");
    std::vector<double> d = a.vec;
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (norm > max_step_) {
      const double scale = max_step_ / norm;
      for (auto& v : d) v *= scale;
    }
    for (std::size_t i = 0; i < kDim; ++i) {
      position_[i] += d[i];
      position_[i] = std::min(1.0, std::max(0.0, position_[i]));
    }
    ++step_count_;
    StepResult r;
    r.next_state = position_;
    r.success = distance(position_, goal_) <= tolerance_;
    r.reward = (r.success ? 0.0 : -1.0) * reward_scale_;
    r.done = r.success || step_count_ >= horizon_;
    return r;
  }

  Goal map_to_goal(const State& s) const override { return s; }

  bool goal_equal(const Goal& a, const Goal& b) const override {
    return distance(a, b) <= tolerance_;
  }

  EnvSnapshot snapshot() const override {
    EnvSnapshot snap;
    snap.data = position_;
    snap.data.insert(snap.data.end(), goal_.begin(), goal_.end());
    snap.data.push_back(static_cast<double>(step_count_));
    return snap;
  }

  void restore(const EnvSnapshot& snap) override {
    if (snap.data.size() != 2 * kDim + 1)
      throw std::invalid_argument("PointReachEnv: bad snapshot");
    position_.assign(snap.data.begin(), snap.data.begin() + kDim);
    goal_.assign(snap.data.begin() + kDim, snap.data.begin() + 2 * kDim);
    step_count_ = static_cast<std::size_t>(snap.data.back());
  }

  std::unique_ptr<GoalEnv> clone() const override {
    return std::make_unique<PointReachEnv>(*this);
  }

  std::size_t state_dim() const override { return kDim; }
  std::size_t goal_dim() const override { return kDim; }
  bool discrete_actions() const override { return false; }
  std::size_t action_dim() const override { return kDim; }
  double max_action() const override { return max_step_; }
  std::size_t horizon() const override { return horizon_; }

  const State& state() const override { return position_; }
  const Goal& goal() const override { return goal_; }

  double success_reward() const override { return 0.0; }
  double fail_reward() const override { return -1.0 * reward_scale_; }

  double tolerance() const { return tolerance_; }

  static double distance(const std::vector<double>& a,
                         const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

 private:
  double max_step_;
  double tolerance_;
  std::size_t horizon_;
  Rng rng_;
  State position_;
  Goal goal_;
  std::size_t step_count_ = 0;
};

}  // namespace pchid
