#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "pchid/solvability.hpp"

using namespace pchid;

namespace {

EpisodeTrace random_walk(GridWorldEnv& env, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, "walk"));
  auto [s, g] = env.reset(seed);
  EpisodeTrace trace;
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    Transition tr;
    tr.snapshot_at_state = env.snapshot();
    tr.state = s;
    tr.goal = g;
    tr.action = Action::discrete(static_cast<int>(rng.uniform_int(8)));
    const StepResult sr = env.step(tr.action);
    tr.next_state = sr.next_state;
    trace.push_back(std::move(tr));
    s = sr.next_state;
    if (sr.done) break;
  }
  return trace;
}

Goal onehot_goal(const GridWorldEnv& env, Cell cell) {
  Goal g(env.goal_dim(), 0.0);
  g[static_cast<std::size_t>(cell.r) * env.size() + cell.c] = 1.0;
  return g;
}

}  // namespace

TEST_CASE("interaction test on hand-built maps") {
  const ParsedMap parsed = parse_grid_map(
      "S....\n"
      ".....\n"
      ".....\n"
      ".....\n"
      "....G\n");
  GridWorldEnv env(5, 0, 0.0, 20);
  env.set_fixed_map(parsed.map, parsed.start, parsed.goal);
  env.reset(0);
  const GreedyPolicy oracle = make_bfs_oracle_policy(env);
  const EnvSnapshot snap = env.snapshot();

  SECTION("goal one greedy step away is rejected at k=2") {
    CHECK_FALSE(interaction_test(env, snap, onehot_goal(env, {1, 1}), 2, oracle));
  }
  SECTION("goal at distance 2 is accepted at k=2") {
    CHECK(interaction_test(env, snap, onehot_goal(env, {2, 2}), 2, oracle));
  }
  SECTION("goal at distance 2 is rejected at k=3") {
    CHECK_FALSE(interaction_test(env, snap, onehot_goal(env, {2, 2}), 3, oracle));
  }
  SECTION("k=1 accepts exactly the non-trivial pairs") {
    CHECK(interaction_test(env, snap, onehot_goal(env, {0, 1}), 1, oracle));
    CHECK(interaction_test(env, snap, onehot_goal(env, {4, 4}), 1, oracle));
    // already at the goal: 0-step solvable
    CHECK_FALSE(interaction_test(env, snap, onehot_goal(env, {0, 0}), 1, oracle));
  }
  SECTION("k=0 is invalid") {
    CHECK_THROWS_AS(interaction_test(env, snap, onehot_goal(env, {1, 1}), 0, oracle),
                    std::invalid_argument);
  }
}

TEST_CASE("interaction test leaves the environment exactly as found") {
  GridWorldEnv env(6);
  const EpisodeTrace trace = random_walk(env, 3);
  REQUIRE(trace.size() >= 4);
  const GreedyPolicy oracle = make_bfs_oracle_policy(env);
  // park the env mid-episode, then probe an earlier snapshot
  env.restore(trace[3].snapshot_at_state);
  const EnvSnapshot before = env.snapshot();
  interaction_test(env, trace[0].snapshot_at_state,
                   env.map_to_goal(trace[2].next_state), 3, oracle);
  CHECK(env.snapshot().data == before.data);
}

TEST_CASE("tester closure probes a scratch clone, not the training env") {
  GridWorldEnv env(6);
  const EpisodeTrace trace = random_walk(env, 5);
  const EnvSnapshot before = env.snapshot();
  const SolvabilityTester tester =
      make_interaction_tester(env, make_bfs_oracle_policy(env));
  tester(trace[0].snapshot_at_state, trace[0].state,
         env.map_to_goal(trace.back().next_state), 3);
  CHECK(env.snapshot().data == before.data);
}

TEST_CASE("rnd novelty shrinks on observed embeddings") {
  RndPair pair(6, 17);
  Rng rng(4);
  std::vector<std::vector<double>> probe;
  for (int i = 0; i < 32; ++i) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    probe.push_back(std::move(x));
  }
  double before = 0.0;
  for (const auto& x : probe) before += pair.novelty_score(x);
  const MlpParams target_before = pair.target_net();
  for (int step = 0; step < 1000; ++step) pair.observe(probe);
  double after = 0.0;
  for (const auto& x : probe) after += pair.novelty_score(x);
  CHECK(after < 0.5 * before);
  // the random reference net never moves
  for (std::size_t l = 0; l < target_before.weights.size(); ++l)
    CHECK(pair.target_net().weights[l].values ==
          target_before.weights[l].values);
}

TEST_CASE("rnd threshold semantics") {
  RndPair pair(4, 3);
  const std::vector<double> x{0.3, -0.2, 0.9, 0.1};

  pair.set_threshold(std::numeric_limits<double>::infinity());
  CHECK_FALSE(pair.test(x, 2));
  pair.set_threshold(-std::numeric_limits<double>::infinity());
  CHECK(pair.test(x, 2));

  // raising the threshold never flips a rejection into an acceptance
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> y(4);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    pair.set_threshold(0.1);
    const bool lenient = pair.test(y, 2);
    pair.set_threshold(0.5);
    const bool strict = pair.test(y, 2);
    if (strict) CHECK(lenient);
  }
}

TEST_CASE("rnd percentile rule tracks recent scores") {
  RndPair pair(4, 11);
  Rng rng(2);
  std::vector<std::vector<double>> batch;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    batch.push_back(std::move(x));
  }
  pair.observe(batch);
  pair.set_threshold_from_percentile(0.9);
  // roughly 10% of the observed embeddings should exceed the threshold
  std::size_t over = 0;
  for (const auto& x : batch)
    if (pair.novelty_score(x) > pair.threshold()) ++over;
  CHECK(over > 0);
  CHECK(over < batch.size() / 4);
}

TEST_CASE("test evaluation against the exhaustive oracle") {
  GridWorldEnv env(8);
  std::vector<TestCandidate> candidates;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    GridWorldEnv e(8);
    const EpisodeTrace trace = random_walk(e, seed);
    for (const auto& c : collect_candidates_from_trace(trace, e, 3))
      candidates.push_back(c);
  }
  REQUIRE(candidates.size() > 200);

  SECTION("the oracle itself scores perfectly") {
    const SolvabilityTester oracle = [&](const EnvSnapshot&, const State& s,
                                         const Goal& g, std::size_t k) {
      return bfs_shortest_steps(env.decode_map(s), env.decode_agent(s),
                                env.decode_goal_cell(g)) ==
             static_cast<int>(k);
    };
    const TestReport r = evaluate_test(oracle, env, candidates);
    CHECK(r.precision() == 1.0);
    CHECK(r.recall() == 1.0);
    CHECK(r.false_positive == 0);
    CHECK(r.false_negative == 0);
  }

  SECTION("an always-true tester has full recall and base-rate precision") {
    const SolvabilityTester always = [](const EnvSnapshot&, const State&,
                                        const Goal&, std::size_t) {
      return true;
    };
    const TestReport r = evaluate_test(always, env, candidates);
    CHECK(r.recall() == 1.0);
    CHECK(r.true_negative == 0);
    CHECK(r.false_negative == 0);
    const double base_rate =
        static_cast<double>(r.true_positive) / candidates.size();
    CHECK(r.precision() == Catch::Approx(base_rate));
  }

  SECTION("interaction with a shortest-path policy is exact on trace pairs") {
    // candidates harvested from real traces are never farther than k, so
    // "needs at least k" collapses to "is exactly k"
    GridWorldEnv scratch(8);
    scratch.reset(99);
    const SolvabilityTester tester =
        make_interaction_tester(scratch, make_bfs_oracle_policy(scratch));
    const TestReport r = evaluate_test(tester, env, candidates);
    CHECK(r.precision() == 1.0);
    CHECK(r.recall() == 1.0);
  }
}

TEST_CASE("report arithmetic and serialization") {
  TestReport r;
  CHECK(r.precision() == 1.0);  // empty denominators default to perfect
  CHECK(r.recall() == 1.0);
  r.true_positive = 3;
  r.false_positive = 1;
  r.false_negative = 2;
  r.true_negative = 4;
  CHECK(r.precision() == Catch::Approx(0.75));
  CHECK(r.recall() == Catch::Approx(0.6));
  std::ostringstream out;
  r.write_csv_row(out, 0.5);
  CHECK(out.str() == "0.5,3,1,4,2,0.75,0.6\n");
}
