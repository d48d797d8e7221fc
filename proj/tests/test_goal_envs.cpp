#include <catch2/catch_amalgamated.hpp>

#include <queue>

#include "pchid/bitflip.hpp"
#include "pchid/gridworld.hpp"
#include "pchid/pointreach.hpp"

using namespace pchid;

namespace {

// Independent shortest-path oracle: Dijkstra with unit weights over the
// explicit adjacency, no shared code with bfs_shortest_steps.
int dijkstra_steps(const GridMap& map, Cell from, Cell to) {
  if (map.blocked(from.r, from.c) || map.blocked(to.r, to.c)) return -1;
  const int n = map.size;
  std::vector<int> dist(static_cast<std::size_t>(n) * n, 1 << 29);
  auto idx = [&](int r, int c) { return static_cast<std::size_t>(r) * n + c; };
  using Node = std::pair<int, std::pair<int, int>>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> pq;
  dist[idx(from.r, from.c)] = 0;
  pq.push({0, {from.r, from.c}});
  while (!pq.empty()) {
    const auto [d, rc] = pq.top();
    pq.pop();
    const auto [r, c] = rc;
    if (d > dist[idx(r, c)]) continue;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int nr = r + dr, nc = c + dc;
        if (map.blocked(nr, nc)) continue;
        if (d + 1 < dist[idx(nr, nc)]) {
          dist[idx(nr, nc)] = d + 1;
          pq.push({d + 1, {nr, nc}});
        }
      }
    }
  }
  const int d = dist[idx(to.r, to.c)];
  return d >= (1 << 29) ? -1 : d;
}

Action random_action(GoalEnv& env, Rng& rng) {
  if (env.discrete_actions())
    return Action::discrete(static_cast<int>(rng.uniform_int(env.num_actions())));
  std::vector<double> v(env.action_dim());
  for (auto& x : v) x = rng.uniform(-env.max_action(), env.max_action());
  return Action::continuous(std::move(v));
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  BitFlipEnv a(3), b(3);
  const auto ra = a.reset(42);
  const auto rb = b.reset(42);
  CHECK(ra.first == rb.first);
  CHECK(ra.second == rb.second);
  CHECK(ra.first != ra.second);  // goal differs from start by construction
}

TEST_CASE("gridworld reset yields a connected, obstacle-free start and goal") {
  GridWorldEnv env(8);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    env.reset(seed);
    CHECK_FALSE(env.map().blocked(env.agent_pos().r, env.agent_pos().c));
    CHECK_FALSE(env.map().blocked(env.goal_pos().r, env.goal_pos().c));
    CHECK(bfs_shortest_steps(env.map(), env.agent_pos(), env.goal_pos()) > 0);
  }
}

TEST_CASE("pointreach reset never starts inside the tolerance ball") {
  PointReachEnv env;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto [s, g] = env.reset(seed);
    CHECK(PointReachEnv::distance(s, g) > env.tolerance());
  }
}

TEST_CASE("bitflip step semantics") {
  BitFlipEnv env(3);
  env.reset(0);
  // force a known configuration via snapshot surgery
  EnvSnapshot snap;
  snap.data = {0, 0, 0, /*goal*/ 0, 0, 1, /*steps*/ 0};
  env.restore(snap);
  const StepResult r = env.step(Action::discrete(2));
  CHECK(r.next_state == State{0, 0, 1});
  CHECK(r.success);
  CHECK(r.reward == 1.0);
  CHECK(r.done);
  CHECK_THROWS_AS(env.step(Action::discrete(3)), std::out_of_range);
  CHECK_THROWS_AS(env.step(Action::discrete(-1)), std::out_of_range);
}

TEST_CASE("gridworld blocked moves keep the agent in place") {
  // agent at (1,1), obstacle at (2,2); SE is compass index 3
  const ParsedMap parsed = parse_grid_map(
      "....\n"
      ".S..\n"
      "..#.\n"
      "...G\n");
  GridWorldEnv env(4, 0, 0.3, 50);
  env.set_fixed_map(parsed.map, parsed.start, parsed.goal);
  env.reset(0);
  REQUIRE(env.agent_pos() == Cell{1, 1});
  const StepResult r = env.step(Action::discrete(3));  // SE into the obstacle
  CHECK(env.agent_pos() == Cell{1, 1});
  CHECK(r.reward == -0.02);
  CHECK_FALSE(r.done);
  // route around: E to (1,2), SE to (2,3), S to (3,3)
  env.step(Action::discrete(2));
  env.step(Action::discrete(3));
  const StepResult fin = env.step(Action::discrete(4));
  CHECK(env.agent_pos() == Cell{3, 3});
  CHECK(fin.success);
  CHECK(fin.reward == 10.0);
}

TEST_CASE("pointreach reaching the goal ends the episode with reward 0") {
  PointReachEnv env;
  auto [s, g] = env.reset(7);
  // walk straight at the goal
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    std::vector<double> d(3);
    for (int i = 0; i < 3; ++i) d[i] = g[i] - s[i];
    const StepResult r = env.step(Action::continuous(d));
    s = r.next_state;
    if (r.done) {
      CHECK(r.success);
      CHECK(r.reward == 0.0);
      return;
    }
    CHECK(r.reward == -1.0);
  }
  FAIL("straight-line walk should reach within the horizon");
}

TEST_CASE("map_to_goal projects onto the achieved goal") {
  GridWorldEnv gw(8);
  auto [s, g] = gw.reset(5);
  const Goal achieved = gw.map_to_goal(s);
  CHECK(gw.decode_goal_cell(achieved) == gw.agent_pos());
  CHECK(gw.goal_equal(achieved, gw.map_to_goal(s)));

  PointReachEnv pr;
  auto [ps, pg] = pr.reset(5);
  CHECK(pr.map_to_goal(ps) == ps);
  CHECK(pr.goal_equal(pr.map_to_goal(ps), ps));

  BitFlipEnv bf(4);
  auto [bs, bg] = bf.reset(5);
  CHECK(bf.map_to_goal(bs) == bs);
}

TEST_CASE("snapshot/restore replays identically") {
  const auto check_env = [](GoalEnv& env, std::uint64_t seed) {
    env.reset(seed);
    Rng rng(seed + 99);
    std::vector<Action> actions;
    for (int i = 0; i < 5; ++i) actions.push_back(random_action(env, rng));

    const EnvSnapshot snap = env.snapshot();
    std::vector<StepResult> first, second, third;
    for (const auto& a : actions) first.push_back(env.step(a));
    env.restore(snap);
    for (const auto& a : actions) second.push_back(env.step(a));
    env.restore(snap);
    for (const auto& a : actions) third.push_back(env.step(a));

    for (int i = 0; i < 5; ++i) {
      CHECK(first[i].next_state == second[i].next_state);
      CHECK(first[i].next_state == third[i].next_state);
      CHECK(first[i].reward == second[i].reward);
      CHECK(first[i].done == second[i].done);
      CHECK(first[i].success == second[i].success);
    }
  };
  BitFlipEnv bf(6);
  GridWorldEnv gw(6);
  PointReachEnv pr;
  check_env(bf, 1);
  check_env(gw, 2);
  check_env(pr, 3);
}

TEST_CASE("snapshot survives a byte round-trip") {
  GridWorldEnv env(6);
  env.reset(11);
  const EnvSnapshot snap = env.snapshot();
  // serialize to bytes and back
  std::vector<char> bytes(snap.data.size() * sizeof(double));
  std::memcpy(bytes.data(), snap.data.data(), bytes.size());
  EnvSnapshot loaded;
  loaded.data.resize(snap.data.size());
  std::memcpy(loaded.data.data(), bytes.data(), bytes.size());
  env.step(Action::discrete(0));
  env.restore(loaded);
  CHECK(env.snapshot().data == snap.data);
}

TEST_CASE("bfs shortest steps basics") {
  GridMap empty;
  empty.size = 4;
  empty.obstacles.assign(16, 0);
  CHECK(bfs_shortest_steps(empty, {0, 0}, {2, 2}) == 2);  // two diagonals
  CHECK(bfs_shortest_steps(empty, {1, 3}, {1, 3}) == 0);

  const ParsedMap walled = parse_grid_map(
      "S.#.\n"
      "..#.\n"
      "..#.\n"
      "..#G\n");
  CHECK(bfs_shortest_steps(walled.map, *walled.start, *walled.goal) == -1);
}

TEST_CASE("bfs agrees with unit-weight Dijkstra on random maps") {
  Rng rng(314);
  for (int rep = 0; rep < 40; ++rep) {
    GridMap map;
    map.size = 7;
    map.obstacles.resize(49);
    for (auto& o : map.obstacles) o = rng.bernoulli(0.35) ? 1 : 0;
    for (int i = 0; i < 10; ++i) {
      const Cell a{static_cast<int>(rng.uniform_int(7)),
                   static_cast<int>(rng.uniform_int(7))};
      const Cell b{static_cast<int>(rng.uniform_int(7)),
                   static_cast<int>(rng.uniform_int(7))};
      CHECK(bfs_shortest_steps(map, a, b) == dijkstra_steps(map, a, b));
      CHECK(bfs_shortest_steps(map, a, b) == bfs_shortest_steps(map, b, a));
    }
  }
}

TEST_CASE("gridworld trajectories stay legal") {
  GridWorldEnv env(8);
  Rng rng(21);
  for (std::uint64_t ep = 0; ep < 5; ++ep) {
    env.reset(ep);
    Cell prev = env.agent_pos();
    for (std::size_t t = 0; t < env.horizon(); ++t) {
      const StepResult r =
          env.step(Action::discrete(static_cast<int>(rng.uniform_int(8))));
      const Cell cur = env.agent_pos();
      CHECK(std::abs(cur.r - prev.r) <= 1);
      CHECK(std::abs(cur.c - prev.c) <= 1);
      CHECK_FALSE(env.map().blocked(cur.r, cur.c));
      prev = cur;
      if (r.done) break;
    }
  }
}

TEST_CASE("pointreach per-step displacement never exceeds the cap") {
  PointReachEnv env;
  Rng rng(8);
  auto [s, g] = env.reset(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> big(3);
    for (auto& v : big) v = rng.uniform(-5.0, 5.0);  // far above the cap
    const StepResult r = env.step(Action::continuous(big));
    CHECK(PointReachEnv::distance(r.next_state, s) <=
          env.max_action() + 1e-12);
    s = r.next_state;
    if (r.done) break;
  }
  CHECK_THROWS_AS(env.step(Action::discrete(0)), std::invalid_argument);
}

TEST_CASE("map text format round-trips") {
  const std::string text =
      "S..#\n"
      "....\n"
      ".##.\n"
      "...G\n";
  const ParsedMap parsed = parse_grid_map(text);
  REQUIRE(parsed.start == Cell{0, 0});
  REQUIRE(parsed.goal == Cell{3, 3});
  CHECK(parsed.map.blocked(0, 3));
  CHECK(parsed.map.blocked(2, 1));
  CHECK_FALSE(parsed.map.blocked(1, 1));
  CHECK(format_grid_map(parsed.map, parsed.start, parsed.goal) == text);
  CHECK_THROWS_AS(parse_grid_map("..\n.\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_grid_map(".x\n..\n"), std::invalid_argument);
}

TEST_CASE("reward scaling multiplies every reward") {
  GridWorldEnv env(6);
  env.reset(4);
  const EnvSnapshot snap = env.snapshot();
  const StepResult base = env.step(Action::discrete(0));
  env.set_reward_scale(100.0);
  env.restore(snap);
  const StepResult scaled = env.step(Action::discrete(0));
  CHECK(scaled.reward == 100.0 * base.reward);
  CHECK(scaled.next_state == base.next_state);
}
