#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace pchid {

// Line-oriented experiment configuration: `section.key = value`, '#' starts
// a comment. Unknown keys, duplicates, and type mismatches are errors with
// line numbers. Every key has a registered default with a provenance note,
// surfaced by explain().
class ExperimentConfig {
 public:
  struct KeySpec {
    std::string default_value;
    std::string type;  // "string" | "int" | "real" | "list"
    std::string note;  // where the default comes from
  };

  static const std::map<std::string, KeySpec>& registry() {
    static const std::map<std::string, KeySpec> reg = {
        {"env.name", {"gridworld", "string", "required selector: gridworld | bitflip | pointreach"}},
        {"env.size", {"8", "int", "8x8 grid scaled for desk-size budgets; 16 available"}},
        {"env.bits", {"8", "int", "bit-flipping problem size"}},
        {"env.obstacle_prob", {"0.3", "real", "per-cell obstacle probability, regenerated until connected"}},
        {"env.horizon", {"50", "int", "episode step limit"}},
        {"env.max_step", {"0.05", "real", "point-reach action norm cap"}},
        {"env.tolerance", {"0.05", "real", "point-reach success tolerance"}},
        {"env.reward_scale", {"1", "real", "multiplies every reward; reward-invariance experiments"}},
        {"env.map_file", {"", "string", "optional fixed map (text grid of . # S G)"}},
        {"algo.name", {"pchid", "string", "pchid | pehid | dqn | dqn+her | ppo-lite | joint | average | intrinsic"}},
        {"algo.episodes", {"500", "int", "training episode budget"}},
        {"algo.max_k", {"5", "int", "curriculum depth K"}},
        {"algo.batch_size", {"64", "int", "supervised/TD minibatch size"}},
        {"algo.updates_per_episode", {"40", "int", "minibatch updates per episode"}},
        {"algo.learning_rate", {"0.001", "real", "Adam step size"}},
        {"algo.hidden", {"64x64", "string", "hidden layer widths, e.g. 64x64"}},
        {"algo.activation", {"tanh", "string", "tanh | relu"}},
        {"algo.epsilon", {"0.2", "real", "epsilon-greedy exploration (discrete)"}},
        {"algo.sigma_fraction", {"0.2", "real", "gaussian exploration as fraction of max_step"}},
        {"algo.gamma", {"0.98", "real", "discount for the TD baselines"}},
        {"algo.target_sync", {"20", "int", "DQN target-network copy period (episodes)"}},
        {"algo.lambda", {"1", "real", "joint-training supervised gradient weight"}},
        {"algo.weight", {"0.5", "real", "averaging mix: 1 = pure RL, 0 = pure HID"}},
        {"algo.beta", {"1", "real", "intrinsic reward scale"}},
        {"algo.clip_ratio", {"0.2", "real", "clipped-surrogate ratio bound"}},
        {"tester.name", {"interaction", "string", "interaction | rnd | oracle"}},
        {"tester.threshold", {"-1", "real", "RND novelty threshold; -1 = percentile rule"}},
        {"tester.percentile", {"0.9", "real", "sliding-window percentile for the RND threshold"}},
        {"run.seeds", {"0", "list", "comma-separated seed list"}},
        {"run.output_dir", {"out", "string", "per-run CSVs and checkpoints land here"}},
        {"eval.episodes", {"200", "int", "held-out evaluation episode count"}},
        {"eval.every", {"0", "int", "periodic eval period; 0 = final only"}},
        {"eval.seed", {"1234", "int", "evaluation episode seed base"}},
    };
    return reg;
  }

  static ExperimentConfig parse(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        fail(line_no, "expected 'section.key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      const auto spec = registry().find(key);
      if (spec == registry().end()) fail(line_no, "unknown key '" + key + "'");
      if (auto prev = seen.find(key); prev != seen.end())
        fail(line_no, "duplicate key '" + key + "' (first set on line " +
                          std::to_string(prev->second) + ")");
      seen[key] = line_no;
      check_type(line_no, key, value, spec->second.type);
      cfg.values_[key] = value;
    }
    if (!cfg.values_.count("env.name") || !cfg.values_.count("algo.name"))
      throw std::invalid_argument("config: env.name and algo.name are required");
    if (cfg.seeds().empty())
      throw std::invalid_argument("config: run.seeds must be non-empty");
    return cfg;
  }

  std::string get(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    if (auto it = registry().find(key); it != registry().end())
      return it->second.default_value;
    throw std::invalid_argument("config: unknown key " + key);
  }

  long get_int(const std::string& key) const { return std::stol(get(key)); }
  double get_real(const std::string& key) const { return std::stod(get(key)); }
  bool is_set(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) {
    if (!registry().count(key))
      throw std::invalid_argument("config: unknown key " + key);
    values_[key] = value;
  }

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    std::istringstream in(get("run.seeds"));
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!trim(tok).empty()) out.push_back(std::stoull(trim(tok)));
    return out;
  }

  std::vector<std::size_t> hidden_sizes() const {
    std::vector<std::size_t> out;
    std::istringstream in(get("algo.hidden"));
    std::string tok;
    while (std::getline(in, tok, 'x'))
      if (!trim(tok).empty()) out.push_back(std::stoull(trim(tok)));
    return out;
  }

  // All effective key/value pairs, defaults filled in.
  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [key, spec] : registry())
      out << key << " = " << get(key) << '\n';
    return out.str();
  }

  std::string explain() const {
    std::ostringstream out;
    for (const auto& [key, spec] : registry()) {
      out << key << " = " << get(key)
          << (is_set(key) ? "  (set)" : "  (default: " + spec.note + ")")
          << '\n';
    }
    return out.str();
  }

  // Stable under field reordering: FNV over the sorted effective pairs.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [key, spec] : registry()) {
      for (char c : key + "=" + get(key)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
      }
    }
    return h;
  }

  bool operator==(const ExperimentConfig& o) const {
    return serialize() == o.serialize();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  [[noreturn]] static void fail(std::size_t line, const std::string& msg) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": " + msg);
  }

  static void check_type(std::size_t line, const std::string& key,
                         const std::string& value, const std::string& type) {
    try {
      std::size_t pos = 0;
      if (type == "int") {
        (void)std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
      } else if (type == "real") {
        (void)std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
      }
    } catch (const std::exception&) {
      fail(line, "value '" + value + "' for '" + key + "' is not a " + type);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace pchid
