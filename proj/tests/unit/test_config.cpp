#include "pglab/config.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

using namespace pglab;

namespace {

ExperimentConfig parse(const std::string& text) {
  return config_from_json(Json::parse(text));
}

}  // namespace

TEST_CASE("minimal config with a fixture") {
  ExperimentConfig c = parse(R"({
    "fixture": "canonical",
    "estimator": {"name": "trepo"}
  })");
  CHECK(c.fixture == "canonical");
  CHECK(c.estimator.name == "trepo");
  ExperimentSetup setup = build_setup(c);
  CHECK(setup.mdp.vocab_size == 2);
  CHECK(setup.policy.param_count() == 6);
}

TEST_CASE("explicit mdp and reward") {
  ExperimentConfig c = parse(R"({
    "mdp": {"vocab_size": 3, "horizon": 2, "eos": 2},
    "reward": {"kind": "count_token", "token": 0, "gamma": 0.9},
    "policy": {"init": "random", "seed": 7, "scale": 0.5},
    "estimator": {"name": "grpo", "group_k": 8}
  })");
  ExperimentSetup setup = build_setup(c);
  CHECK(setup.mdp.eos_token == std::optional<int>{2});
  CHECK(setup.reward.gamma() == 0.9);
  CHECK(c.estimator.group_k == 8);
}

TEST_CASE("missing required fields are named in diagnostics") {
  CHECK_THROWS_WITH(parse(R"({"estimator": {"name": "grpo"}})"),
                    Catch::Matchers::ContainsSubstring("mdp"));
  CHECK_THROWS_WITH(parse(R"({"fixture": "canonical"})"),
                    Catch::Matchers::ContainsSubstring("estimator"));
  CHECK_THROWS_WITH(parse(R"({"fixture": "canonical", "estimator": {}})"),
                    Catch::Matchers::ContainsSubstring("estimator.name"));
  CHECK_THROWS_WITH(parse(R"({"fixture": "nope", "estimator": {"name": "grpo"}})"),
                    Catch::Matchers::ContainsSubstring("unknown fixture"));
}

TEST_CASE("numeric ranges validated at parse time") {
  CHECK_THROWS_WITH(parse(R"({
    "mdp": {"vocab_size": 2, "horizon": 2},
    "reward": {"kind": "count_token", "token": 0, "gamma": 1.5},
    "estimator": {"name": "reinforce"}
  })"),
                    Catch::Matchers::ContainsSubstring("gamma"));
  CHECK_THROWS_WITH(parse(R"({
    "fixture": "canonical",
    "estimator": {"name": "ppo", "lambda": 1.2}
  })"),
                    Catch::Matchers::ContainsSubstring("lambda"));
  CHECK_THROWS_WITH(parse(R"({
    "fixture": "canonical",
    "estimator": {"name": "ppo", "epsilon": 0.0}
  })"),
                    Catch::Matchers::ContainsSubstring("epsilon"));
}

TEST_CASE("estimator aliases and trepo block") {
  ExperimentConfig c = parse(R"({
    "fixture": "canonical",
    "estimator": {"name": "corollary1",
                  "trepo": {"d_size": 3, "rollouts_m": 16, "temperature_mode": "unit",
                            "value_source": "exact"}}
  })");
  CHECK(c.estimator.name == "reinforce");
  CHECK(c.estimator.trepo.d_size == 3);
  CHECK(c.estimator.trepo.rollouts_m == 16);
  CHECK(c.estimator.trepo.temperature_mode == RolloutTemperatureMode::Unit);
  CHECK(c.estimator.trepo.value_source == ValueSource::Exact);
}

TEST_CASE("config round-trips through json") {
  ExperimentConfig c = parse(R"({
    "fixture": "trap",
    "estimator": {"name": "trepo", "group_k": 6, "epsilon": 0.1,
                  "trepo": {"d_size": 2, "rollouts_m": 4, "tau_max": 0.5}},
    "harness": {"mode": "estimate", "n_samples": 5000, "seeds": [3, 4], "jobs": 2},
    "enumeration_budget": 123456,
    "out_dir": "results"
  })");
  Json dumped = config_to_json(c);
  ExperimentConfig round = config_from_json(dumped);
  CHECK(config_to_json(round) == dumped);
  CHECK(config_hash(round) == config_hash(c));
  CHECK(round.seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(round.mode == "estimate");
  CHECK(round.enumeration_budget == 123456);
}

TEST_CASE("config hash is stable and sensitive") {
  ExperimentConfig a = parse(R"({"fixture": "canonical", "estimator": {"name": "grpo"}})");
  ExperimentConfig b = parse(R"({"fixture": "canonical", "estimator": {"name": "grpo"}})");
  CHECK(config_hash(a) == config_hash(b));
  ExperimentConfig c = parse(R"({"fixture": "canonical", "estimator": {"name": "rloo"}})");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("reward kinds build from json") {
  auto ctx = std::make_shared<ContextIndex>(make_mdp(2, 2));
  RewardSpec match = reward_from_json(Json::parse(R"({"kind": "outcome_match", "target": [0, 1]})"), ctx);
  CHECK(match.rm_response(Trajectory{{0, 1}}) == 1.0);

  RewardSpec table = reward_from_json(Json::parse(R"({
    "kind": "token_table", "gamma": 1.0,
    "entries": [["-", 0, 2.0], ["0", 1, -1.0]]
  })"),
                                      ctx);
  CHECK(table.rm_response(Trajectory{{0, 1}}) == 1.0);

  RewardSpec merged = reward_from_json(Json::parse(R"({
    "kind": "composite",
    "components": [{"kind": "count_token", "token": 0},
                   {"kind": "outcome_match", "target": [0, 0]}]
  })"),
                                       ctx);
  CHECK(merged.rm_response(Trajectory{{0, 0}}) == 3.0);

  CHECK_THROWS_WITH(reward_from_json(Json::parse(R"({"kind": "magic"})"), ctx),
                    Catch::Matchers::ContainsSubstring("unknown reward kind"));
}

TEST_CASE("enumeration budget is enforced when building the setup") {
  ExperimentConfig c = parse(R"({
    "mdp": {"vocab_size": 5, "horizon": 9},
    "reward": {"kind": "count_token", "token": 0},
    "estimator": {"name": "reinforce"}
  })");
  CHECK_THROWS_WITH(build_setup(c), Catch::Matchers::ContainsSubstring("budget"));
}

TEST_CASE("config file loader reports parse failures with the path") {
  const std::string path = "/tmp/pglab_bad_config.json";
  {
    std::ofstream out(path);
    out << "{ this is not json";
  }
  CHECK_THROWS_WITH(load_config_file(path), Catch::Matchers::ContainsSubstring(path));
  std::remove(path.c_str());
  CHECK_THROWS_WITH(load_config_file("/tmp/pglab_missing.json"),
                    Catch::Matchers::ContainsSubstring("cannot open"));
}
