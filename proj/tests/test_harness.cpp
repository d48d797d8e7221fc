#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pchid/harness.hpp"

using namespace pchid;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

const char* kTinyRun =
    "env.name = bitflip\n"
    "env.bits = 4\n"
    "algo.name = pchid\n"
    "algo.episodes = 30\n"
    "algo.max_k = 1\n"
    "algo.updates_per_episode = 5\n"
    "run.seeds = 0,1\n"
    "eval.episodes = 20\n";

struct OutRootGuard {
  fs::path root;
  OutRootGuard() {
    root = fs::temp_directory_path() /
           ("pchid_harness_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    ::setenv("PCHID_OUT_ROOT", root.c_str(), 1);
  }
  ~OutRootGuard() {
    ::unsetenv("PCHID_OUT_ROOT");
    fs::remove_all(root);
  }
};

}  // namespace

TEST_CASE("config parsing") {
  SECTION("values, comments and whitespace") {
    const auto cfg = ExperimentConfig::parse(
        "# experiment\n"
        "env.name = gridworld   # trailing comment\n"
        "algo.name = pchid\n"
        "  algo.episodes =   250\n"
        "run.seeds = 0, 1, 2\n");
    CHECK(cfg.get("env.name") == "gridworld");
    CHECK(cfg.get_int("algo.episodes") == 250);
    CHECK(cfg.seeds() == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(cfg.get("algo.hidden") == "64x64");  // untouched default
    CHECK(cfg.hidden_sizes() == std::vector<std::size_t>{64, 64});
    CHECK(cfg.is_set("env.name"));
    CHECK_FALSE(cfg.is_set("algo.hidden"));
  }
  SECTION("unknown keys carry line numbers") {
    try {
      ExperimentConfig::parse("env.name = bitflip\nenv.colour = red\n");
      FAIL("should have thrown");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
      CHECK(std::string(e.what()).find("env.colour") != std::string::npos);
    }
  }
  SECTION("duplicates are rejected") {
    CHECK_THROWS_WITH(
        ExperimentConfig::parse(
            "env.name = bitflip\nalgo.name = pchid\nenv.name = gridworld\n"),
        Catch::Matchers::ContainsSubstring("duplicate"));
  }
  SECTION("type mismatches are rejected") {
    CHECK_THROWS_WITH(ExperimentConfig::parse("env.name = bitflip\n"
                                              "algo.name = pchid\n"
                                              "algo.episodes = many\n"),
                      Catch::Matchers::ContainsSubstring("not a int"));
  }
  SECTION("required selectors") {
    CHECK_THROWS_AS(ExperimentConfig::parse("env.name = bitflip\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::parse("algo.name = pchid\n"),
                    std::invalid_argument);
  }
}

TEST_CASE("config hashing and explanation") {
  const auto a = ExperimentConfig::parse(
      "env.name = gridworld\nalgo.name = pchid\nalgo.episodes = 100\n");
  const auto b = ExperimentConfig::parse(
      "algo.episodes = 100\nalgo.name = pchid\nenv.name = gridworld\n");
  CHECK(a.hash() == b.hash());  // order-independent
  CHECK(a == b);

  auto c = a;
  c.set("algo.episodes", "101");
  CHECK(c.hash() != a.hash());
  CHECK_THROWS_AS(c.set("not.a.key", "1"), std::invalid_argument);

  const std::string ex = a.explain();
  CHECK(ex.find("env.name = gridworld  (set)") != std::string::npos);
  CHECK(ex.find("algo.gamma = 0.98  (default:") != std::string::npos);
}

TEST_CASE("environment construction from config") {
  auto cfg = ExperimentConfig::parse(
      "env.name = bitflip\nenv.bits = 5\nalgo.name = pchid\n");
  auto bf = make_env(cfg);
  CHECK(bf->state_dim() == 5);
  CHECK(bf->discrete_actions());

  cfg.set("env.name", "pointreach");
  auto pr = make_env(cfg);
  CHECK_FALSE(pr->discrete_actions());
  CHECK(pr->max_action() == 0.05);

  cfg.set("env.name", "gridworld");
  cfg.set("env.size", "6");
  cfg.set("env.reward_scale", "10");
  auto gw = make_env(cfg);
  CHECK(gw->state_dim() == 72);
  CHECK(gw->reward_scale() == 10.0);

  cfg.set("env.name", "lava");
  CHECK_THROWS_AS(make_env(cfg), std::invalid_argument);
}

TEST_CASE("fixed maps load from disk") {
  const fs::path map_path =
      fs::temp_directory_path() / "pchid_test_map.txt";
  std::ofstream(map_path) << "S...\n....\n.##.\n...G\n";
  auto cfg = ExperimentConfig::parse(
      "env.name = gridworld\nenv.size = 4\nalgo.name = pchid\n"
      "env.map_file = " + map_path.string() + "\n");
  auto env = make_env(cfg);
  env->reset(0);
  env->reset(1);
  auto* gw = dynamic_cast<GridWorldEnv*>(env.get());
  REQUIRE(gw != nullptr);
  CHECK(gw->agent_pos() == Cell{0, 0});
  CHECK(gw->goal_pos() == Cell{3, 3});
  CHECK(gw->map().blocked(2, 1));
  fs::remove(map_path);
}

TEST_CASE("experiment runs write per-seed artifacts") {
  OutRootGuard guard;
  auto cfg = ExperimentConfig::parse(kTinyRun);
  cfg.set("run.output_dir", "tiny");
  const auto records = run_experiment(cfg);
  REQUIRE(records.size() == 2);
  const fs::path out = guard.root / "tiny";
  for (const auto seed : {0, 1}) {
    const std::string stem = "pchid_bitflip_seed" + std::to_string(seed);
    CHECK(fs::exists(out / (stem + ".csv")));
    CHECK(fs::exists(out / (stem + ".ckpt")));
    const std::string csv = slurp(out / (stem + ".csv"));
    CHECK(csv.rfind("episode,success,k_list_max,buffer_1,", 0) == 0);
    CHECK(csv.find("# final_eval,") != std::string::npos);
  }
  const std::string summary = slurp(out / "summary.csv");
  CHECK(summary.find("pchid,bitflip,") != std::string::npos);

  // checkpoints reload into working policies
  const MlpParams net = load_checkpoint((out / "pchid_bitflip_seed0.ckpt").string());
  CHECK(net.layer_sizes.front() == 8);  // state 4 + goal 4
}

TEST_CASE("repeated runs are byte-identical") {
  OutRootGuard guard;
  auto cfg = ExperimentConfig::parse(kTinyRun);
  cfg.set("run.seeds", "3");
  cfg.set("run.output_dir", "rep1");
  run_experiment(cfg);
  cfg.set("run.output_dir", "rep2");
  run_experiment(cfg);
  CHECK(slurp(guard.root / "rep1/pchid_bitflip_seed3.csv") ==
        slurp(guard.root / "rep2/pchid_bitflip_seed3.csv"));
  CHECK(slurp(guard.root / "rep1/pchid_bitflip_seed3.ckpt") ==
        slurp(guard.root / "rep2/pchid_bitflip_seed3.ckpt"));
}

TEST_CASE("single-run dispatch covers the baseline algorithms") {
  auto cfg = ExperimentConfig::parse(
      "env.name = bitflip\nenv.bits = 3\nalgo.name = dqn\n"
      "algo.episodes = 10\nalgo.updates_per_episode = 2\n"
      "eval.episodes = 5\n");
  CHECK(run_single(cfg, 0).rows.size() == 10);
  cfg.set("algo.name", "dqn+her");
  CHECK(run_single(cfg, 0).rows.size() == 10);
  cfg.set("algo.name", "joint");
  cfg.set("algo.max_k", "2");
  CHECK(run_single(cfg, 0).rows.size() == 10);
  cfg.set("algo.name", "nonsense");
  CHECK_THROWS_AS(run_single(cfg, 0), std::invalid_argument);

  auto ppo = ExperimentConfig::parse(
      "env.name = pointreach\nalgo.name = ppo-lite\n"
      "algo.episodes = 8\neval.episodes = 5\n");
  CHECK(run_single(ppo, 0).rows.size() == 8);
}

TEST_CASE("parameter sweeps fan out into subdirectories") {
  OutRootGuard guard;
  auto cfg = ExperimentConfig::parse(kTinyRun);
  cfg.set("run.seeds", "0");
  cfg.set("algo.episodes", "10");
  cfg.set("run.output_dir", "sweep_demo");
  const auto rows = sweep(cfg, "algo.learning_rate", {"0.001", "0.01"});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].value == "0.001");
  CHECK(fs::exists(guard.root / "sweep_demo/sweep_0.001/summary.csv"));
  CHECK(fs::exists(guard.root / "sweep_demo/sweep_0.01/summary.csv"));
  const std::string merged = slurp(guard.root / "sweep_demo/sweep.csv");
  CHECK(merged.rfind("algo.learning_rate,", 0) == 0);
  CHECK_THROWS_AS(sweep(cfg, "algo.learning_rate", {}), std::invalid_argument);
}
