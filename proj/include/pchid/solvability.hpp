#pragma once

#include <algorithm>
#include <deque>
#include <memory>
#include <ostream>

#include "pchid/hid.hpp"
#include "pchid/mlp.hpp"
#include "pchid/policy.hpp"

namespace pchid {

// TEST(k, s_t, g'): returns true when the pair needs at least k steps,
// probed by rolling a frozen copy of pi_{k-1} greedily from a snapshot at
// s_t for at most k-1 steps. The environment is left exactly as found.
inline bool interaction_test(GoalEnv& env, const EnvSnapshot& snapshot_at_state,
                             const Goal& g_prime, std::size_t k,
                             const GreedyPolicy& frozen_policy) {
  if (k < 1) throw std::invalid_argument("interaction_test: k must be >= 1");
  const EnvSnapshot before = env.snapshot();
  env.restore(snapshot_at_state);
  State s = env.state();
  bool reached = env.goal_equal(env.map_to_goal(s), g_prime);
  if (!reached) {
    for (std::size_t i = 0; i + 1 < k && !reached; ++i) {
      const Action a = frozen_policy(s, g_prime);
      const StepResult sr = env.step(a);
      s = sr.next_state;
      reached = env.goal_equal(env.map_to_goal(s), g_prime);
    }
  }
  env.restore(before);
  return !reached;
}

// Binds interaction_test to a scratch clone so the training environment is
// never touched during relabeling.
inline SolvabilityTester make_interaction_tester(const GoalEnv& env,
                                                 GreedyPolicy frozen_policy) {
  auto scratch = std::shared_ptr<GoalEnv>(env.clone());
  return [scratch, policy = std::move(frozen_policy)](
             const EnvSnapshot& snap, const State&, const Goal& g_prime,
             std::size_t k) {
    return interaction_test(*scratch, snap, g_prime, k, policy);
  };
}

// Random Network Distillation novelty probe: a frozen random target net and
// a predictor trained on embeddings of pairs already accepted at lower k.
// Novel (state, goal) embeddings score high.
class RndPair {
 public:
  RndPair(std::size_t embedding_dim, std::uint64_t seed,
          const std::vector<std::size_t>& hidden = {64, 64},
          std::size_t output_dim = 16, double learning_rate = 1e-3)
      : window_(1000) {
    std::vector<std::size_t> sizes{embedding_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(output_dim);
    target_net_ = init_params(sizes, Activation::Tanh, OutputHead::Linear,
                              Rng::derive(seed, "rnd-target"));
    predictor_net_ = init_params(sizes, Activation::Tanh, OutputHead::Linear,
                                 Rng::derive(seed, "rnd-predictor"));
    opt_ = make_adam(predictor_net_, learning_rate);
  }

  double novelty_score(const std::vector<double>& embedding) const {
    const auto t = forward_single(target_net_, embedding);
    const auto p = forward_single(predictor_net_, embedding);
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += (t[i] - p[i]) * (t[i] - p[i]);
    return s / static_cast<double>(t.size());
  }

  // One supervised step moving the predictor toward the frozen target on
  // the given embeddings.
  void observe(const std::vector<std::vector<double>>& embeddings) {
    if (embeddings.empty()) return;
    Matrix in(embeddings.size(), embeddings[0].size());
    for (std::size_t i = 0; i < embeddings.size(); ++i)
      std::copy(embeddings[i].begin(), embeddings[i].end(), in.row(i));
    auto [target_out, tcache] = forward(target_net_, in);
    auto [pred_out, cache] = forward(predictor_net_, in);
    auto [loss, grad] = mse_loss(pred_out, target_out);
    adam_step(predictor_net_, backward(predictor_net_, cache, grad), opt_);
    for (const auto& e : embeddings) push_score(novelty_score(e));
  }

  bool test(const std::vector<double>& embedding, std::size_t /*k*/) const {
    return novelty_score(embedding) > novelty_threshold_;
  }

  void set_threshold(double t) { novelty_threshold_ = t; }
  double threshold() const { return novelty_threshold_; }

  // Default threshold rule: a percentile of recently observed scores.
  void set_threshold_from_percentile(double percentile = 0.9) {
    if (recent_scores_.empty()) return;
    std::vector<double> scores(recent_scores_.begin(), recent_scores_.end());
    std::sort(scores.begin(), scores.end());
    const std::size_t idx = std::min(
        scores.size() - 1,
        static_cast<std::size_t>(percentile * static_cast<double>(scores.size())));
    novelty_threshold_ = scores[idx];
  }

  double median_recent_score() const {
    if (recent_scores_.empty()) return 0.0;
    std::vector<double> scores(recent_scores_.begin(), recent_scores_.end());
    std::sort(scores.begin(), scores.end());
    return scores[scores.size() / 2];
  }

  const MlpParams& target_net() const { return target_net_; }

 private:
  void push_score(double s) {
    if (recent_scores_.size() >= window_) recent_scores_.pop_front();
    recent_scores_.push_back(s);
  }

  MlpParams target_net_;
  MlpParams predictor_net_;
  AdamState opt_;
  double novelty_threshold_ = 0.0;
  std::deque<double> recent_scores_;
  std::size_t window_;
};

inline SolvabilityTester make_rnd_tester(std::shared_ptr<RndPair> pair) {
  return [pair](const EnvSnapshot&, const State& s, const Goal& g,
                std::size_t k) { return pair->test(concat(s, g), k); };
}

struct TestReport {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;

  double precision() const {
    const auto d = true_positive + false_positive;
    return d == 0 ? 1.0 : static_cast<double>(true_positive) / d;
  }
  double recall() const {
    const auto d = true_positive + false_negative;
    return d == 0 ? 1.0 : static_cast<double>(true_positive) / d;
  }

  void write_csv_row(std::ostream& out, double threshold) const {
    out << threshold << ',' << true_positive << ',' << false_positive << ','
        << true_negative << ',' << false_negative << ',' << precision() << ','
        << recall() << '\n';
  }
};

struct TestCandidate {
  EnvSnapshot snapshot;
  State state;
  Goal hindsight_goal;
  std::size_t k = 2;
};

// Candidates as they arise in relabeling: (s_t, m(s_{t+k})) pairs from real
// traces, so the BFS distance never exceeds k.
inline std::vector<TestCandidate> collect_candidates_from_trace(
    const EpisodeTrace& trace, const GoalEnv& env, std::size_t k) {
  std::vector<TestCandidate> out;
  for (std::size_t t = 0; t + k <= trace.size(); ++t) {
    const auto& tr = trace[t];
    TestCandidate c;
    c.snapshot = tr.snapshot_at_state;
    c.state = tr.state;
    c.hindsight_goal = env.map_to_goal(trace[t + k - 1].next_state);
    c.k = k;
    out.push_back(std::move(c));
  }
  return out;
}

// Tallies a tester against the BFS oracle: ground truth is "the pair is
// exactly k steps apart". GridWorld only.
inline TestReport evaluate_test(const SolvabilityTester& tester,
                                const GridWorldEnv& env,
                                const std::vector<TestCandidate>& candidates) {
  TestReport report;
  for (const auto& c : candidates) {
    const GridMap map = env.decode_map(c.state);
    const Cell from = env.decode_agent(c.state);
    const Cell to = env.decode_goal_cell(c.hindsight_goal);
    const bool truth =
        bfs_shortest_steps(map, from, to) == static_cast<int>(c.k);
    const bool predicted = tester(c.snapshot, c.state, c.hindsight_goal, c.k);
    if (predicted && truth) ++report.true_positive;
    if (predicted && !truth) ++report.false_positive;
    if (!predicted && !truth) ++report.true_negative;
    if (!predicted && truth) ++report.false_negative;
  }
  return report;
}

}  // namespace pchid
