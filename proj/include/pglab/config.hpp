#ifndef PGLAB_CONFIG_HPP_
#define PGLAB_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pglab/fixtures.hpp"
#include "pglab/harness.hpp"
#include "pglab/policy.hpp"
#include "pglab/reward.hpp"
#include "pglab/token_mdp.hpp"
#include "pglab/trepo.hpp"

namespace pglab {

using Json = nlohmann::json;

// Experiment configuration: task (fixture or explicit mdp+reward), policy
// initialization, estimator selection with hyperparameters, and harness
// parameters. The on-disk format is JSON; the full schema is documented in
// the README.
struct ExperimentConfig {
  // Task.
  std::optional<std::string> fixture;
  int vocab_size = 2;
  int horizon = 2;
  std::optional<int> eos;
  Json reward;  // kind + parameters; ignored when fixture is set

  // Policy initialization.
  std::string policy_init = "uniform";  // uniform | random
  std::uint64_t policy_seed = 1;
  double policy_scale = 1.0;

  // Estimator.
  EstimatorSpec estimator;
  double beta = 0.1;  // preference-loss temperature, kept with the estimator block

  // Harness.
  std::string mode = "train";  // train | estimate
  std::int64_t n_samples = 100000;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int batches = 200;
  int batch_size = 32;
  double learning_rate = 0.1;
  double z_threshold = 3.0;
  double allowance = 0.01;
  int jobs = 1;

  std::int64_t enumeration_budget = 10'000'000;
  std::string out_dir = "out";
};

namespace detail {

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw std::runtime_error("config: " + message);
}

}  // namespace detail

inline std::string normalize_estimator_name(std::string name) {
  if (name == "corollary1") return "reinforce";
  return name;
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  if (j.contains("fixture") && !j.at("fixture").is_null()) {
    c.fixture = j.at("fixture").get<std::string>();
    bool known = false;
    for (const std::string& n : fixture_names()) known = known || n == *c.fixture;
    detail::require(known, "unknown fixture '" + *c.fixture + "'");
  } else {
    detail::require(j.contains("mdp"), "missing required field 'mdp' (or 'fixture')");
    const Json& mdp = j.at("mdp");
    detail::require(mdp.contains("vocab_size"), "missing required field 'mdp.vocab_size'");
    detail::require(mdp.contains("horizon"), "missing required field 'mdp.horizon'");
    c.vocab_size = mdp.at("vocab_size").get<int>();
    c.horizon = mdp.at("horizon").get<int>();
    if (mdp.contains("eos") && !mdp.at("eos").is_null()) c.eos = mdp.at("eos").get<int>();
    detail::require(j.contains("reward"), "missing required field 'reward'");
    c.reward = j.at("reward");
    detail::require(c.reward.contains("kind"), "missing required field 'reward.kind'");
    const double gamma = detail::get_or(c.reward, "gamma", 1.0);
    detail::require(gamma > 0.0 && gamma <= 1.0, "reward.gamma must be in (0, 1]");
  }

  if (j.contains("policy")) {
    const Json& p = j.at("policy");
    c.policy_init = detail::get_or<std::string>(p, "init", "uniform");
    detail::require(c.policy_init == "uniform" || c.policy_init == "random",
                    "policy.init must be 'uniform' or 'random'");
    c.policy_seed = detail::get_or<std::uint64_t>(p, "seed", 1);
    c.policy_scale = detail::get_or(p, "scale", 1.0);
  }

  detail::require(j.contains("estimator"), "missing required field 'estimator'");
  const Json& e = j.at("estimator");
  detail::require(e.contains("name"), "missing required field 'estimator.name'");
  c.estimator.name = normalize_estimator_name(e.at("name").get<std::string>());
  c.estimator.group_k = detail::get_or(e, "group_k", 4);
  c.estimator.epsilon = detail::get_or(e, "epsilon", 0.2);
  c.estimator.lambda = detail::get_or(e, "lambda", 1.0);
  c.estimator.optimization_num = detail::get_or(e, "optimization_num", 1);
  c.estimator.normalize_advantages = detail::get_or(e, "normalize_advantages", false);
  c.estimator.critic_oracle = detail::get_or(e, "critic_oracle", true);
  c.beta = detail::get_or(e, "beta", 0.1);
  detail::require(c.beta > 0.0, "estimator.beta must be > 0");
  detail::require(c.estimator.epsilon > 0.0, "estimator.epsilon must be > 0");
  detail::require(c.estimator.lambda >= 0.0 && c.estimator.lambda <= 1.0,
                  "estimator.lambda must be in [0, 1]");
  if (e.contains("trepo")) {
    const Json& t = e.at("trepo");
    c.estimator.trepo.d_size = detail::get_or(t, "d_size", c.estimator.trepo.d_size);
    c.estimator.trepo.rollouts_m = detail::get_or(t, "rollouts_m", c.estimator.trepo.rollouts_m);
    c.estimator.trepo.tau_max = detail::get_or(t, "tau_max", c.estimator.trepo.tau_max);
    c.estimator.trepo.optimization_num =
        detail::get_or(t, "optimization_num", c.estimator.trepo.optimization_num);
    c.estimator.trepo.epsilon_clip = detail::get_or(t, "epsilon_clip", c.estimator.trepo.epsilon_clip);
    const std::string mode = detail::get_or<std::string>(t, "temperature_mode", "ramp");
    detail::require(mode == "ramp" || mode == "unit", "trepo.temperature_mode must be 'ramp' or 'unit'");
    c.estimator.trepo.temperature_mode =
        mode == "ramp" ? RolloutTemperatureMode::Ramp : RolloutTemperatureMode::Unit;
    const std::string source = detail::get_or<std::string>(t, "value_source", "rollout");
    detail::require(source == "rollout" || source == "exact",
                    "trepo.value_source must be 'rollout' or 'exact'");
    c.estimator.trepo.value_source =
        source == "rollout" ? ValueSource::Rollout : ValueSource::Exact;
  }
  c.estimator.validate();

  if (j.contains("harness")) {
    const Json& h = j.at("harness");
    c.mode = detail::get_or<std::string>(h, "mode", "train");
    detail::require(c.mode == "train" || c.mode == "estimate", "harness.mode must be 'train' or 'estimate'");
    c.n_samples = detail::get_or<std::int64_t>(h, "n_samples", c.n_samples);
    if (h.contains("seeds")) c.seeds = h.at("seeds").get<std::vector<std::uint64_t>>();
    detail::require(!c.seeds.empty(), "harness.seeds must not be empty");
    c.batches = detail::get_or(h, "batches", c.batches);
    c.batch_size = detail::get_or(h, "batch_size", c.batch_size);
    c.learning_rate = detail::get_or(h, "learning_rate", c.learning_rate);
    c.z_threshold = detail::get_or(h, "z_threshold", c.z_threshold);
    c.allowance = detail::get_or(h, "allowance", c.allowance);
    c.jobs = detail::get_or(h, "jobs", c.jobs);
    detail::require(c.jobs >= 1, "harness.jobs must be >= 1");
  }

  c.enumeration_budget = detail::get_or<std::int64_t>(j, "enumeration_budget", c.enumeration_budget);
  detail::require(c.enumeration_budget > 0, "enumeration_budget must be positive");
  c.out_dir = detail::get_or<std::string>(j, "out_dir", c.out_dir);
  return c;
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  if (c.fixture) {
    j["fixture"] = *c.fixture;
  } else {
    j["mdp"] = {{"vocab_size", c.vocab_size}, {"horizon", c.horizon}};
    if (c.eos) {
      j["mdp"]["eos"] = *c.eos;
    } else {
      j["mdp"]["eos"] = nullptr;
    }
    j["reward"] = c.reward;
  }
  j["policy"] = {{"init", c.policy_init}, {"seed", c.policy_seed}, {"scale", c.policy_scale}};
  j["estimator"] = {
      {"name", c.estimator.name},
      {"group_k", c.estimator.group_k},
      {"epsilon", c.estimator.epsilon},
      {"lambda", c.estimator.lambda},
      {"optimization_num", c.estimator.optimization_num},
      {"normalize_advantages", c.estimator.normalize_advantages},
      {"critic_oracle", c.estimator.critic_oracle},
      {"beta", c.beta},
      {"trepo",
       {{"d_size", c.estimator.trepo.d_size},
        {"rollouts_m", c.estimator.trepo.rollouts_m},
        {"tau_max", c.estimator.trepo.tau_max},
        {"optimization_num", c.estimator.trepo.optimization_num},
        {"epsilon_clip", c.estimator.trepo.epsilon_clip},
        {"temperature_mode",
         c.estimator.trepo.temperature_mode == RolloutTemperatureMode::Ramp ? "ramp" : "unit"},
        {"value_source",
         c.estimator.trepo.value_source == ValueSource::Rollout ? "rollout" : "exact"}}}};
  j["harness"] = {{"mode", c.mode},
                  {"n_samples", c.n_samples},
                  {"seeds", c.seeds},
                  {"batches", c.batches},
                  {"batch_size", c.batch_size},
                  {"learning_rate", c.learning_rate},
                  {"z_threshold", c.z_threshold},
                  {"allowance", c.allowance},
                  {"jobs", c.jobs}};
  j["enumeration_budget"] = c.enumeration_budget;
  j["out_dir"] = c.out_dir;
  return j;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    // nlohmann reports the byte offset; surface it as a line number.
    throw std::runtime_error("config: parse error in '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::ostringstream os;
  os << std::hex << detail::fnv1a64(config_to_json(c).dump());
  return os.str();
}

// Materialized task: mdp, context index, reward and initial policy.
struct ExperimentSetup {
  TokenMdp mdp;
  std::shared_ptr<const ContextIndex> ctx;
  RewardSpec reward;
  TabularPolicy policy;
};

inline RewardSpec reward_from_json(const Json& j, std::shared_ptr<const ContextIndex> ctx) {
  const std::string kind = j.at("kind").get<std::string>();
  const double gamma = detail::get_or(j, "gamma", 1.0);
  if (kind == "count_token") {
    return RewardSpec::count_token(ctx, j.at("token").get<int>(), gamma,
                                   detail::get_or(j, "prefix_scorable", true));
  }
  if (kind == "outcome_match") {
    return RewardSpec::outcome_match(j.at("target").get<std::vector<int>>());
  }
  if (kind == "token_table") {
    if (j.contains("file")) {
      std::ifstream in(j.at("file").get<std::string>());
      detail::require(static_cast<bool>(in), "cannot open token table file");
      return token_table_from_stream(ctx, in, gamma, detail::get_or(j, "prefix_scorable", false));
    }
    detail::require(j.contains("entries"), "token_table reward needs 'entries' or 'file'");
    std::ostringstream table;
    for (const Json& entry : j.at("entries")) {
      table << entry.at(0).get<std::string>() << ' ' << entry.at(1).get<int>() << ' '
            << entry.at(2).get<double>() << "\n";
    }
    std::istringstream in(table.str());
    return token_table_from_stream(ctx, in, gamma, detail::get_or(j, "prefix_scorable", false));
  }
  if (kind == "random_table") {
    return RewardSpec::random_table(ctx, gamma, detail::get_or<std::uint64_t>(j, "seed", 1));
  }
  if (kind == "composite") {
    std::vector<RewardSpec> components;
    for (const Json& comp : j.at("components")) components.push_back(reward_from_json(comp, ctx));
    return RewardSpec::composite(std::move(components));
  }
  throw std::runtime_error("config: unknown reward kind '" + kind + "'");
}

inline ExperimentSetup build_setup(const ExperimentConfig& c) {
  EnumerationBudget budget{c.enumeration_budget};
  if (c.fixture) {
    Fixture fx = make_fixture(*c.fixture);
    check_enumeration_budget(fx.mdp, budget);
    TabularPolicy policy = c.policy_init == "uniform"
                               ? TabularPolicy::uniform(fx.ctx)
                               : TabularPolicy::random_init(fx.ctx, c.policy_seed, c.policy_scale);
    return ExperimentSetup{fx.mdp, fx.ctx, fx.reward, std::move(policy)};
  }
  TokenMdp mdp = make_mdp(c.vocab_size, c.horizon, c.eos);
  check_enumeration_budget(mdp, budget);
  auto ctx = std::make_shared<ContextIndex>(mdp, budget);
  RewardSpec reward = reward_from_json(c.reward, ctx);
  TabularPolicy policy = c.policy_init == "uniform"
                             ? TabularPolicy::uniform(ctx)
                             : TabularPolicy::random_init(ctx, c.policy_seed, c.policy_scale);
  return ExperimentSetup{mdp, ctx, std::move(reward), std::move(policy)};
}

}  // namespace pglab

#endif  // PGLAB_CONFIG_HPP_
