#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <sstream>
#include <string>

#include "pchid/env.hpp"

namespace pchid {

struct Cell {
  int r = 0;
  int c = 0;
  bool operator==(const Cell&) const = default;
};

struct GridMap {
  int size = 0;
  std::vector<std::uint8_t> obstacles;  // row-major, 1 = blocked

  bool blocked(int r, int c) const {
    if (r < 0 || c < 0 || r >= size || c >= size) return true;
    return obstacles[static_cast<std::size_t>(r) * size + c] != 0;
  }
};

// Compass move order used everywhere: N, NE, E, SE, S, SW, W, NW.
// Row 0 is the top row, so N decreases the row index.
inline constexpr std::array<std::pair<int, int>, 8> kCompassMoves = {{
    {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

// Minimal number of 8-connected moves avoiding obstacles; -1 if unreachable.
inline int bfs_shortest_steps(const GridMap& map, Cell from, Cell to) {
  if (map.blocked(from.r, from.c) || map.blocked(to.r, to.c)) return -1;
  if (from == to) return 0;
  std::vector<int> dist(static_cast<std::size_t>(map.size) * map.size, -1);
  auto idx = [&](Cell p) { return static_cast<std::size_t>(p.r) * map.size + p.c; };
  std::deque<Cell> queue{from};
  dist[idx(from)] = 0;
  while (!queue.empty()) {
    const Cell cur = queue.front();
    queue.pop_front();
    for (const auto& [dr, dc] : kCompassMoves) {
      const Cell nxt{cur.r + dr, cur.c + dc};
      if (map.blocked(nxt.r, nxt.c) || dist[idx(nxt)] >= 0) continue;
      dist[idx(nxt)] = dist[idx(cur)] + 1;
      if (nxt == to) return dist[idx(nxt)];
      queue.push_back(nxt);
    }
  }
  return -1;
}

struct ParsedMap {
  GridMap map;
  std::optional<Cell> start;
  std::optional<Cell> goal;
};

// Text map format: one row per line, '.' free, '#' obstacle, optional
// 'S' start and 'G' goal markers (both count as free cells).
inline ParsedMap parse_grid_map(const std::string& text) {
  ParsedMap out;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  if (rows.empty()) throw std::invalid_argument("parse_grid_map: empty map");
  const int size = static_cast<int>(rows.size());
  out.map.size = size;
  out.map.obstacles.assign(static_cast<std::size_t>(size) * size, 0);
  for (int r = 0; r < size; ++r) {
    if (static_cast<int>(rows[r].size()) != size)
      throw std::invalid_argument("parse_grid_map: map must be square");
    for (int c = 0; c < size; ++c) {
      switch (rows[r][c]) {
        case '.': break;
        case '#': out.map.obstacles[static_cast<std::size_t>(r) * size + c] = 1; break;
        case 'S': out.start = Cell{r, c}; break;
        case 'G': out.goal = Cell{r, c}; break;
        default:
          throw std::invalid_argument("parse_grid_map: bad character");
      }
    }
  }
  return out;
}

inline std::string format_grid_map(const GridMap& map, std::optional<Cell> start,
                                   std::optional<Cell> goal) {
  std::string out;
  for (int r = 0; r < map.size; ++r) {
    for (int c = 0; c < map.size; ++c) {
      char ch = map.blocked(r, c) ? '#' : '.';
      if (start && *start == Cell{r, c}) ch = 'S';
      if (goal && *goal == Cell{r, c}) ch = 'G';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

// Random-map navigation with 8-way movement. Moves into obstacles or off
// the map are not executed. Network state encoding is the flattened
// obstacle grid followed by a one-hot agent cell; the goal encoding is a
// one-hot goal cell, so m(s) is a slice of the state.
class GridWorldEnv : public GoalEnv {
 public:
  explicit GridWorldEnv(int size = 8, std::uint64_t seed = 0,
                        double obstacle_prob = 0.3, std::size_t horizon = 50)
      : size_(size), obstacle_prob_(obstacle_prob), horizon_(horizon), rng_(seed) {
    if (size < 2) throw std::invalid_argument("GridWorldEnv: size too small");
    map_.size = size;
    map_.obstacles.assign(cells(), 0);
  }

  void seed(std::uint64_t s) override { rng_ = Rng(s); }

  // Pin the obstacle layout; reset() then only redraws start and goal.
  void set_fixed_map(const GridMap& map, std::optional<Cell> start = {},
                     std::optional<Cell> goal = {}) {
    if (map.size != size_)
      throw std::invalid_argument("GridWorldEnv: fixed map size mismatch");
    fixed_map_ = map;
    fixed_start_ = start;
    fixed_goal_ = goal;
  }

  using GoalEnv::reset;
  std::pair<State, Goal> reset() override {
    for (;;) {
      if (fixed_map_) {
        map_ = *fixed_map_;
      } else {
        for (auto& o : map_.obstacles)
          o = rng_.bernoulli(obstacle_prob_) ? 1 : 0;
      }
      if (!draw_cell(agent_, fixed_start_)) continue;
      if (!draw_cell(goal_cell_, fixed_goal_)) continue;
      if (agent_ == goal_cell_) continue;
      if (bfs_shortest_steps(map_, agent_, goal_cell_) > 0) break;
    }
    step_count_ = 0;
    rebuild_encodings();
    return {state_, goal_};
  }

  StepResult step(const Action& a) override {
    if (!a.is_discrete || a.index < 0 || a.index >= 8)
      throw std::out_of_range("GridWorldEnv: action out of range");
    const auto [dr, dc] = kCompassMoves[a.index];
    const Cell target{agent_.r + dr, agent_.c + dc};
    if (!map_.blocked(target.r, target.c)) agent_ = target;
    ++step_count_;
    rebuild_encodings();
    StepResult r;
    r.next_state = state_;
    r.success = (agent_ == goal_cell_);
    r.reward = (r.success ? 10.0 : -0.02) * reward_scale_;
    r.done = r.success || step_count_ >= horizon_;
    return r;
  }

  // A move is valid when the target cell is inside the map and free; the
  // obstacle grid is read straight from the state encoding.
  bool action_valid(const State& s, int a) const override {
    if (a < 0 || a >= 8) return false;
    const Cell agent = decode_agent(s);
    const auto [dr, dc] = kCompassMoves[a];
    const int r = agent.r + dr, c = agent.c + dc;
    if (r < 0 || c < 0 || r >= size_ || c >= size_) return false;
    return s[static_cast<std::size_t>(r) * size_ + c] == 0.0;
  }

  Goal map_to_goal(const State& s) const override {
    return Goal(s.begin() + cells(), s.end());
  }

  bool goal_equal(const Goal& a, const Goal& b) const override { return a == b; }

  EnvSnapshot snapshot() const override {
    EnvSnapshot snap;
    snap.data.reserve(cells() + 5);
    for (auto o : map_.obstacles) snap.data.push_back(o);
    snap.data.push_back(agent_.r);
    snap.data.push_back(agent_.c);
    snap.data.push_back(goal_cell_.r);
    snap.data.push_back(goal_cell_.c);
    snap.data.push_back(static_cast<double>(step_count_));
    return snap;
  }

  void restore(const EnvSnapshot& snap) override {
    if (snap.data.size() != cells() + 5)
      throw std::invalid_argument("GridWorldEnv: bad snapshot");
    for (std::size_t i = 0; i < cells(); ++i)
      map_.obstacles[i] = snap.data[i] != 0.0 ? 1 : 0;
    agent_ = {static_cast<int>(snap.data[cells()]),
              static_cast<int>(snap.data[cells() + 1])};
    goal_cell_ = {static_cast<int>(snap.data[cells() + 2]),
                  static_cast<int>(snap.data[cells() + 3])};
    step_count_ = static_cast<std::size_t>(snap.data[cells() + 4]);
    rebuild_encodings();
  }

  std::unique_ptr<GoalEnv> clone() const override {
    return std::make_unique<GridWorldEnv>(*this);
  }

  std::size_t state_dim() const override { return 2 * cells(); }
  std::size_t goal_dim() const override { return cells(); }
  bool discrete_actions() const override { return true; }
  std::size_t num_actions() const override { return 8; }
  std::size_t horizon() const override { return horizon_; }

  const State& state() const override { return state_; }
  const Goal& goal() const override { return goal_; }

  double success_reward() const override { return 10.0 * reward_scale_; }
  double fail_reward() const override { return -0.02 * reward_scale_; }

  const GridMap& map() const { return map_; }
  Cell agent_pos() const { return agent_; }
  Cell goal_pos() const { return goal_cell_; }
  int size() const { return size_; }

  // Decoders for oracle policies working from network encodings.
  Cell decode_agent(const State& s) const { return decode_onehot(s, cells()); }
  Cell decode_goal_cell(const Goal& g) const { return decode_onehot(g, 0); }
  GridMap decode_map(const State& s) const {
    GridMap m;
    m.size = size_;
    m.obstacles.resize(cells());
    for (std::size_t i = 0; i < cells(); ++i)
      m.obstacles[i] = s[i] != 0.0 ? 1 : 0;
    return m;
  }

 private:
  std::size_t cells() const { return static_cast<std::size_t>(size_) * size_; }

  bool draw_cell(Cell& out, const std::optional<Cell>& fixed) {
    if (fixed) {
      out = *fixed;
      return !map_.blocked(out.r, out.c);
    }
    for (int attempt = 0; attempt < 64; ++attempt) {
      const int r = static_cast<int>(rng_.uniform_int(size_));
      const int c = static_cast<int>(rng_.uniform_int(size_));
      if (!map_.blocked(r, c)) {
        out = {r, c};
        return true;
      }
    }
    return false;
  }

  Cell decode_onehot(const std::vector<double>& v, std::size_t offset) const {
    for (std::size_t i = 0; i < cells(); ++i)
      if (v[offset + i] != 0.0)
        return {static_cast<int>(i) / size_, static_cast<int>(i) % size_};
    throw std::invalid_argument("GridWorldEnv: empty one-hot");
  }

  void rebuild_encodings() {
    state_.assign(state_dim(), 0.0);
    for (std::size_t i = 0; i < cells(); ++i) state_[i] = map_.obstacles[i];
    state_[cells() + static_cast<std::size_t>(agent_.r) * size_ + agent_.c] = 1.0;
    goal_.assign(goal_dim(), 0.0);
    goal_[static_cast<std::size_t>(goal_cell_.r) * size_ + goal_cell_.c] = 1.0;
  }

  int size_;
  double obstacle_prob_;
  std::size_t horizon_;
  Rng rng_;
  GridMap map_;
  Cell agent_, goal_cell_;
  std::size_t step_count_ = 0;
  State state_;
  Goal goal_;
  std::optional<GridMap> fixed_map_;
  std::optional<Cell> fixed_start_, fixed_goal_;
};

}  // namespace pchid
