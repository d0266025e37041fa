#ifndef PGLAB_TREPO_HPP_
#define PGLAB_TREPO_HPP_

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pglab/estimators.hpp"
#include "pglab/oracle.hpp"
#include "pglab/policy.hpp"
#include "pglab/reward.hpp"
#include "pglab/rng.hpp"
#include "pglab/runlog.hpp"

namespace pglab {

// Prefix-rollout advantage estimation: advantages are differences of
// estimated expected response rewards between consecutive prefixes of the
// sampled trajectory, with rollouts banked at a subset D of time steps and
// linear interpolation in between.

enum class RolloutTemperatureMode {
  // First rollout greedy, then temperatures ramp linearly up to tau_max.
  Ramp,
  // Every rollout at temperature 1 (the policy's own distribution); keeps
  // the pooled average an unbiased estimate of the expected response reward.
  Unit,
};

enum class ValueSource { Rollout, Exact };

struct TrepoConfig {
  int d_size = 1;
  int rollouts_m = 8;
  double tau_max = 1.0;
  int batch_size = 32;
  int optimization_num = 2;
  double epsilon_clip = 0.2;
  double learning_rate = 0.1;
  int batch_num = 200;
  RolloutTemperatureMode temperature_mode = RolloutTemperatureMode::Ramp;
  ValueSource value_source = ValueSource::Rollout;

  void validate() const {
    if (d_size < 1) throw std::invalid_argument("TrepoConfig: d_size must be >= 1");
    if (rollouts_m < 0) throw std::invalid_argument("TrepoConfig: rollouts_m must be >= 0");
    if (tau_max < 0.0) throw std::invalid_argument("TrepoConfig: tau_max must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrepoConfig: batch_size must be >= 1");
    if (optimization_num < 1) throw std::invalid_argument("TrepoConfig: optimization_num must be >= 1");
    if (!(epsilon_clip > 0.0)) throw std::invalid_argument("TrepoConfig: epsilon_clip must be > 0");
    if (batch_num < 1) throw std::invalid_argument("TrepoConfig: batch_num must be >= 1");
  }
};

// Sorted duplicate-free subset of {1..horizon} with min(d_size, horizon)
// elements. Always contains t = 1: it anchors interpolation on the left and
// is the step whose baseline every group method shares.
inline std::vector<int> select_timesteps(int horizon, int d_size, RngStream& rng) {
  if (horizon < 1) throw std::invalid_argument("select_timesteps: horizon must be >= 1");
  if (d_size < 1) throw std::invalid_argument("select_timesteps: d_size must be >= 1");
  const int want = std::min(d_size, horizon);
  std::vector<int> candidates(static_cast<std::size_t>(horizon - 1));
  std::iota(candidates.begin(), candidates.end(), 2);
  // Partial Fisher-Yates for the non-anchor picks.
  std::vector<int> picked{1};
  for (int i = 0; i < want - 1; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    picked.push_back(candidates[i]);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

inline double rollout_temperature(int rollout_index, int rollouts_m, double tau_max,
                                  RolloutTemperatureMode mode) {
  if (mode == RolloutTemperatureMode::Unit) return 1.0;
  if (rollout_index == 0 || rollouts_m <= 1) return 0.0;
  return tau_max * static_cast<double>(rollout_index) / static_cast<double>(rollouts_m - 1);
}

// M full trajectories sharing `prefix`, rollout j on its own substream.
inline std::vector<Trajectory> rollout_suffixes(const TabularPolicy& policy, const Prefix& prefix,
                                                int rollouts_m, double tau_max,
                                                RolloutTemperatureMode mode, RngStream& step_stream) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(rollouts_m));
  for (int j = 0; j < rollouts_m; ++j) {
    RngStream stream = step_stream.substream(static_cast<std::uint64_t>(j));
    const double tau = rollout_temperature(j, rollouts_m, tau_max, mode);
    Trajectory w = policy.sample_trajectory(prefix, tau, stream);
    if (w.tokens.size() < prefix.size() ||
        !std::equal(prefix.begin(), prefix.end(), w.tokens.begin())) {
      throw std::logic_error("rollout_suffixes: rollout does not share the prefix");
    }
    out.push_back(std::move(w));
  }
  return out;
}

// Response rewards of banked rollouts, keyed by the step they were launched at.
struct RolloutBank {
  std::map<int, std::vector<double>> rm_by_step;
};

// Estimated E[RM | W_{0,t-1}] for t = 1..T+1 (index t-1). The pool at step t
// is the sampled trajectory's own reward plus every rollout launched at a
// step k >= t, since those all share the first t-1 tokens.
struct PrefixValueEstimates {
  std::vector<double> estimate;
  std::vector<int> pool_size;
  ValueSource source = ValueSource::Rollout;
};

inline PrefixValueEstimates estimate_prefix_values(double rm_w, int horizon,
                                                   const RolloutBank& bank) {
  PrefixValueEstimates out;
  out.estimate.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  out.pool_size.assign(static_cast<std::size_t>(horizon) + 1, 0);
  double sum = rm_w;
  int count = 1;
  for (int t = horizon + 1; t >= 1; --t) {
    auto it = bank.rm_by_step.find(t);
    if (it != bank.rm_by_step.end()) {
      for (double rm : it->second) sum += rm;
      count += static_cast<int>(it->second.size());
    }
    out.estimate[t - 1] = sum / count;
    out.pool_size[t - 1] = count;
  }
  for (int t = 1; t <= horizon; ++t) {
    if (out.pool_size[t] > out.pool_size[t - 1]) {
      throw std::logic_error("estimate_prefix_values: pool sizes must be non-increasing in t");
    }
  }
  return out;
}

// Advantage profile for one sampled trajectory: A_t = est(t+1) - est(t) at
// the selected steps, linear interpolation at the rest, clamped beyond the
// last selected step. Exact mode swaps rollout pools for oracle expectations.
inline AdvantageProfile calculate_advantage(const Trajectory& w, const TrepoConfig& config,
                                            const TabularPolicy& policy, const RewardSpec& reward,
                                            RngStream& rng, const ExpectedRmTable* exact = nullptr) {
  config.validate();
  const int horizon = static_cast<int>(w.tokens.size());
  if (horizon == 0) throw std::invalid_argument("calculate_advantage: empty trajectory");
  RngStream select_stream = rng.substream(0);
  const std::vector<int> selected = select_timesteps(horizon, config.d_size, select_stream);

  std::vector<double> est;  // index t-1 holds est(t), t = 1..T+1
  if (config.value_source == ValueSource::Exact) {
    if (exact == nullptr) {
      throw std::invalid_argument("calculate_advantage: exact value source needs an oracle table");
    }
    est.resize(static_cast<std::size_t>(horizon) + 1);
    Prefix cur;
    for (int t = 1; t <= horizon + 1; ++t) {
      est[t - 1] = exact->at(cur, reward);
      if (t <= horizon) cur.push_back(w.tokens[t - 1]);
    }
  } else {
    RolloutBank bank;
    const double rm_w = reward.rm_response(w);
    for (int t : selected) {
      Prefix prefix(w.tokens.begin(), w.tokens.begin() + (t - 1));
      RngStream step_stream = rng.substream(static_cast<std::uint64_t>(t));
      std::vector<Trajectory> rollouts =
          rollout_suffixes(policy, prefix, config.rollouts_m, config.tau_max,
                           config.temperature_mode, step_stream);
      std::vector<double>& rms = bank.rm_by_step[t];
      rms.reserve(rollouts.size());
      for (const Trajectory& r : rollouts) rms.push_back(reward.rm_response(r));
    }
    est = estimate_prefix_values(rm_w, horizon, bank).estimate;
  }

  AdvantageProfile profile{w, std::vector<double>(static_cast<std::size_t>(horizon), 0.0)};
  for (int t : selected) profile.per_step[t - 1] = est[t] - est[t - 1];
  // Linear interpolation between selected steps, clamp to the right of the
  // last one (t = 1 is always selected, so there is nothing to the left).
  for (std::size_t i = 0; i + 1 < selected.size(); ++i) {
    const int lo = selected[i], hi = selected[i + 1];
    for (int t = lo + 1; t < hi; ++t) {
      const double frac = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
      profile.per_step[t - 1] =
          (1.0 - frac) * profile.per_step[lo - 1] + frac * profile.per_step[hi - 1];
    }
  }
  for (int t = selected.back() + 1; t <= horizon; ++t) {
    profile.per_step[t - 1] = profile.per_step[selected.back() - 1];
  }
  return profile;
}

struct TrepoTrainResult {
  TabularPolicy policy;
  RunLog log;
};

// Main training loop: sample a batch from the frozen policy snapshot, compute
// advantages once, then take optimization_num clipped-surrogate ascent steps
// against that snapshot. Exact expected reward is logged per batch from the
// enumeration oracle when the trajectory space fits the budget.
inline TrepoTrainResult trepo_train(const TrepoConfig& config, const TabularPolicy& initial_policy,
                                    const RewardSpec& reward, std::uint64_t master_seed) {
  config.validate();
  RngStream master(master_seed);
  TabularPolicy policy = initial_policy;
  bool enumerable = true;
  try {
    check_enumeration_budget(policy.mdp(), EnumerationBudget{});
  } catch (const std::runtime_error&) {
    enumerable = false;
  }
  RunLog log;
  log.estimator = "trepo";
  log.seed = master_seed;
  for (int b = 1; b <= config.batch_num; ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    const TabularPolicy old_policy = policy;
    ExpectedRmTable exact;
    if (config.value_source == ValueSource::Exact) {
      exact = make_expected_rm_table(old_policy, reward);
    }
    std::vector<AdvantageProfile> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    double rm_sum = 0.0;
    for (int i = 0; i < config.batch_size; ++i) {
      RngStream sample_stream = master.substream(static_cast<std::uint64_t>(b),
                                                 static_cast<std::uint64_t>(i), 0);
      Trajectory w = old_policy.sample_trajectory(Prefix{}, 1.0, sample_stream);
      rm_sum += reward.rm_response(w);
      RngStream adv_stream = master.substream(static_cast<std::uint64_t>(b),
                                              static_cast<std::uint64_t>(i), 1);
      batch.push_back(calculate_advantage(w, config, old_policy, reward, adv_stream,
                                          config.value_source == ValueSource::Exact ? &exact
                                                                                    : nullptr));
    }
    double grad_norm = 0.0;
    for (int j = 0; j < config.optimization_num; ++j) {
      Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
      for (const AdvantageProfile& profile : batch) {
        Vec g = clipped_surrogate_gradient(policy, old_policy, profile, config.epsilon_clip);
        add_scaled(grad, g, 1.0 / config.batch_size);
      }
      policy = policy.apply_gradient_step(grad, config.learning_rate);
      grad_norm = norm2(grad);
    }
    RunLogRow row;
    row.batch = b;
    row.exact_j = enumerable ? exact_expected_rm(policy, reward, Prefix{})
                             : std::numeric_limits<double>::quiet_NaN();
    row.mean_rm = rm_sum / config.batch_size;
    row.grad_norm = grad_norm;
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.rows.push_back(row);
  }
  return TrepoTrainResult{std::move(policy), std::move(log)};
}

}  // namespace pglab

#endif  // PGLAB_TREPO_HPP_
