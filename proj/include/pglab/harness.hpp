#ifndef PGLAB_HARNESS_HPP_
#define PGLAB_HARNESS_HPP_

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pglab/estimators.hpp"
#include "pglab/oracle.hpp"
#include "pglab/policy.hpp"
#include "pglab/reward.hpp"
#include "pglab/rng.hpp"
#include "pglab/runlog.hpp"
#include "pglab/trepo.hpp"
#include "pglab/vec.hpp"

namespace pglab {

// Statistical certification machinery: seeded gradient-estimate statistics,
// z-test unbiasedness reports, variance comparisons and convergence runs.
// Hidden token rewards never reach the estimators under test; every driver
// here consumes a sealed view of the reward spec.

inline const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names = {
      "reinforce", "grpo", "rloo", "remax", "trepo", "trepo-exact", "ppo", "exact"};
  return names;
}

struct EstimatorSpec {
  std::string name = "reinforce";
  int group_k = 4;          // grpo, rloo
  double epsilon = 0.2;     // clipped surrogate
  double lambda = 1.0;      // gae
  int optimization_num = 1; // inner surrogate steps per batch (grpo, ppo)
  TrepoConfig trepo;
  FitConfig critic_fit;     // ppo critic updates during training
  bool critic_oracle = true;  // ppo: oracle-initialized critic for estimation
  bool normalize_advantages = false;  // batch advantage normalization in training
  // Optional per-context constant added to every step weight; exists so the
  // harness can check baseline invariance end to end.
  std::shared_ptr<const Vec> advantage_baseline;

  void validate() const {
    bool known = false;
    for (const std::string& n : estimator_names()) known = known || n == name;
    if (!known) throw std::invalid_argument("unknown estimator: " + name);
    if (group_k < 2) throw std::invalid_argument("estimator: group_k must be >= 2");
    if (!(epsilon > 0.0)) throw std::invalid_argument("estimator: epsilon must be > 0");
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("estimator: lambda must be in [0, 1]");
  }
};

// Precomputed constants shared by all samples of one estimation run.
struct EstimatorRunContext {
  RewardSpec sealed;
  double greedy_rm = 0.0;
  std::optional<ExpectedRmTable> expected;   // trepo-exact
  std::optional<CriticTable> critic;         // ppo
  std::optional<Vec> oracle_gradient;        // "exact"

  explicit EstimatorRunContext(RewardSpec sealed_spec) : sealed(std::move(sealed_spec)) {}
};

inline EstimatorRunContext make_run_context(const EstimatorSpec& spec,
                                            const TabularPolicy& policy,
                                            const RewardSpec& reward) {
  spec.validate();
  EstimatorRunContext ctx(reward.sealed_view());
  if (spec.name == "remax") {
    ctx.greedy_rm = ctx.sealed.rm_response(greedy_trajectory(policy));
  } else if (spec.name == "trepo-exact") {
    ctx.expected = make_expected_rm_table(policy, ctx.sealed);
  } else if (spec.name == "ppo") {
    if (spec.critic_oracle) {
      ctx.critic = CriticTable(policy.context_index(), expected_rm_rows(policy, ctx.sealed));
    } else {
      RngStream rng(derive_seed(0x9c17c, {}));
      ctx.critic = fit_critic(policy, ctx.sealed, 1024, spec.critic_fit, rng);
    }
  } else if (spec.name == "exact") {
    ctx.oracle_gradient = exact_policy_gradient(policy, reward);
  }
  return ctx;
}

namespace detail {

inline void accumulate_profile_gradient(Vec& grad, const TabularPolicy& policy,
                                        const Trajectory& w, const std::vector<double>& weights,
                                        const Vec* baseline, double scale) {
  Prefix cur;
  for (std::size_t t = 0; t < w.tokens.size(); ++t) {
    const int row = policy.contexts().row_of(cur);
    double weight = weights[t];
    if (baseline) weight += (*baseline)[static_cast<std::size_t>(row)];
    policy.add_grad_log_prob(grad, row, w.tokens[t], scale * weight);
    cur.push_back(w.tokens[t]);
  }
}

}  // namespace detail

// One independent draw of the named estimator's gradient. sample_stream must
// be the stream derived for this sample index; the result is a deterministic
// function of it.
inline Vec one_estimate(const EstimatorSpec& spec, const TabularPolicy& policy,
                        const EstimatorRunContext& ctx, RngStream sample_stream) {
  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  const Vec* baseline = spec.advantage_baseline.get();
  const RewardSpec& reward = ctx.sealed;

  if (spec.name == "exact") {
    return *ctx.oracle_gradient;
  }
  if (spec.name == "grpo" || spec.name == "rloo") {
    const int k_size = spec.group_k;
    std::vector<Trajectory> group;
    std::vector<double> rewards(static_cast<std::size_t>(k_size));
    group.reserve(static_cast<std::size_t>(k_size));
    for (int k = 0; k < k_size; ++k) {
      RngStream s = sample_stream.substream(static_cast<std::uint64_t>(k));
      group.push_back(policy.sample_trajectory(Prefix{}, 1.0, s));
      rewards[k] = reward.rm_response(group.back());
    }
    for (int k = 0; k < k_size; ++k) {
      const double adv = spec.name == "grpo" ? grpo_advantage(rewards, static_cast<std::size_t>(k))
                                             : rloo_advantage(rewards, static_cast<std::size_t>(k));
      std::vector<double> weights(group[k].tokens.size(), adv);
      detail::accumulate_profile_gradient(grad, policy, group[k], weights, baseline,
                                          1.0 / k_size);
    }
    return grad;
  }

  RngStream traj_stream = sample_stream.substream(0);
  Trajectory w = policy.sample_trajectory(Prefix{}, 1.0, traj_stream);
  const double rm = reward.rm_response(w);
  std::vector<double> weights;
  if (spec.name == "reinforce") {
    weights.assign(w.tokens.size(), rm);
  } else if (spec.name == "remax") {
    weights.assign(w.tokens.size(), remax_advantage(rm, ctx.greedy_rm));
  } else if (spec.name == "trepo" || spec.name == "trepo-exact") {
    TrepoConfig cfg = spec.trepo;
    cfg.value_source = spec.name == "trepo-exact" ? ValueSource::Exact : ValueSource::Rollout;
    RngStream adv_stream = sample_stream.substream(1);
    weights = calculate_advantage(w, cfg, policy, reward, adv_stream,
                                  ctx.expected ? &*ctx.expected : nullptr)
                  .per_step;
  } else if (spec.name == "ppo") {
    std::vector<double> rewards = reward.zero_reward_projection(w);
    weights = gae_advantages(w, rewards, *ctx.critic, 1.0, spec.lambda).per_step;
  } else {
    throw std::invalid_argument("unknown estimator: " + spec.name);
  }
  detail::accumulate_profile_gradient(grad, policy, w, weights, baseline, 1.0);
  return grad;
}

struct EstimateStats {
  Vec mean;
  Vec standard_error;
  double total_variance = 0.0;  // sum of per-coordinate sample variances
  std::int64_t sample_count = 0;
};

// Mean, per-coordinate standard error and total variance of n independent
// estimates. Samples are chunked into fixed-size blocks; workers race over
// block indices but each block is reduced in sample order and blocks are
// merged in block order, so the result is bit-identical for any job count.
inline EstimateStats estimate_stats(const EstimatorSpec& spec, const TabularPolicy& policy,
                                    const RewardSpec& reward, std::int64_t n_samples,
                                    std::uint64_t master_seed, int jobs = 1) {
  if (n_samples < 2) throw std::invalid_argument("estimate_stats: n_samples must be >= 2");
  if (jobs < 1) jobs = 1;
  const EstimatorRunContext ctx = make_run_context(spec, policy, reward);
  const std::size_t dim = static_cast<std::size_t>(policy.param_count());
  constexpr std::int64_t kBlock = 64;
  const std::int64_t n_blocks = (n_samples + kBlock - 1) / kBlock;

  struct BlockPartial {
    Vec sum;
    Vec sumsq;
  };
  std::vector<BlockPartial> partials(static_cast<std::size_t>(n_blocks));
  RngStream master(master_seed);
  std::atomic<std::int64_t> next_block{0};

  auto worker = [&]() {
    for (;;) {
      const std::int64_t b = next_block.fetch_add(1);
      if (b >= n_blocks) return;
      BlockPartial part{Vec(dim, 0.0), Vec(dim, 0.0)};
      const std::int64_t lo = b * kBlock;
      const std::int64_t hi = std::min(n_samples, lo + kBlock);
      for (std::int64_t i = lo; i < hi; ++i) {
        Vec g = one_estimate(spec, policy, ctx, master.substream(static_cast<std::uint64_t>(i)));
        for (std::size_t d = 0; d < dim; ++d) {
          part.sum[d] += g[d];
          part.sumsq[d] += g[d] * g[d];
        }
      }
      partials[static_cast<std::size_t>(b)] = std::move(part);
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }

  std::vector<Neumaier> sum(dim), sumsq(dim);
  for (const BlockPartial& part : partials) {
    for (std::size_t d = 0; d < dim; ++d) {
      sum[d].add(part.sum[d]);
      sumsq[d].add(part.sumsq[d]);
    }
  }
  EstimateStats stats;
  stats.sample_count = n_samples;
  stats.mean.resize(dim);
  stats.standard_error.resize(dim);
  const double n = static_cast<double>(n_samples);
  double total_var = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double s1 = sum[d].value();
    const double s2 = sumsq[d].value();
    const double mean = s1 / n;
    const double var = std::max(0.0, (s2 - s1 * s1 / n) / n);
    stats.mean[d] = mean;
    stats.standard_error[d] = std::sqrt(var / n);
    total_var += var;
  }
  stats.total_variance = total_var;
  return stats;
}

struct UnbiasednessReport {
  double z_threshold = 3.0;
  double allowance = 0.01;  // tolerated fraction of flagged coordinates
  std::vector<double> z;
  int flagged = 0;
  int total = 0;
  double max_abs_z = 0.0;
  bool hard_failure = false;  // zero SE with nonzero deviation
  bool pass = false;
};

inline UnbiasednessReport unbiasedness_report(const EstimateStats& stats, const Vec& oracle_grad,
                                              double z_threshold = 3.0, double allowance = 0.01) {
  check_same_size(stats.mean, oracle_grad, "unbiasedness_report");
  UnbiasednessReport report;
  report.z_threshold = z_threshold;
  report.allowance = allowance;
  report.total = static_cast<int>(stats.mean.size());
  report.z.resize(stats.mean.size(), 0.0);
  for (std::size_t d = 0; d < stats.mean.size(); ++d) {
    const double dev = stats.mean[d] - oracle_grad[d];
    const double se = stats.standard_error[d];
    double z = 0.0;
    if (se == 0.0) {
      if (std::abs(dev) > 1e-12) {
        report.hard_failure = true;
        z = std::numeric_limits<double>::infinity();
      }
    } else {
      z = dev / se;
    }
    report.z[d] = z;
    report.max_abs_z = std::max(report.max_abs_z, std::abs(z));
    if (std::abs(z) > z_threshold) ++report.flagged;
  }
  report.pass = !report.hard_failure &&
                static_cast<double>(report.flagged) <=
                    allowance * static_cast<double>(report.total);
  return report;
}

struct VarianceRow {
  std::string estimator;
  std::uint64_t seed = 0;
  double total_variance = 0.0;
};

inline std::vector<VarianceRow> variance_comparison(const std::vector<EstimatorSpec>& specs,
                                                    const TabularPolicy& policy,
                                                    const RewardSpec& reward,
                                                    std::int64_t n_samples,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    int jobs = 1) {
  if (specs.size() < 2) throw std::invalid_argument("variance_comparison: needs >= 2 estimators");
  std::vector<VarianceRow> rows;
  for (const EstimatorSpec& spec : specs) {
    for (std::uint64_t seed : seeds) {
      EstimateStats stats = estimate_stats(spec, policy, reward, n_samples, seed, jobs);
      rows.push_back(VarianceRow{spec.name, seed, stats.total_variance});
    }
  }
  return rows;
}

struct TrainConfig {
  int batches = 200;
  int batch_size = 32;
  double learning_rate = 0.1;
};

struct TrainResult {
  TabularPolicy policy;
  RunLog log;
};

// Full training run logging exact J per batch. Deterministic given
// (estimator spec, train config, seed).
inline TrainResult convergence_run(const EstimatorSpec& spec, const TrainConfig& train,
                                   const TabularPolicy& initial_policy, const RewardSpec& reward,
                                   std::uint64_t master_seed) {
  spec.validate();
  const RewardSpec sealed = reward.sealed_view();

  if (spec.name == "trepo" || spec.name == "trepo-exact") {
    TrepoConfig cfg = spec.trepo;
    cfg.batch_num = train.batches;
    cfg.batch_size = train.batch_size;
    cfg.learning_rate = train.learning_rate;
    cfg.value_source = spec.name == "trepo-exact" ? ValueSource::Exact : ValueSource::Rollout;
    TrepoTrainResult result = trepo_train(cfg, initial_policy, sealed, master_seed);
    result.log.estimator = spec.name;
    return TrainResult{std::move(result.policy), std::move(result.log)};
  }

  RngStream master(master_seed);
  TabularPolicy policy = initial_policy;
  RunLog log;
  log.estimator = spec.name;
  log.seed = master_seed;
  std::optional<CriticTable> critic;
  if (spec.name == "ppo") {
    critic = spec.critic_oracle
                 ? CriticTable(policy.context_index(), expected_rm_rows(policy, sealed))
                 : CriticTable::zeros(policy.context_index());
  }

  for (int b = 1; b <= train.batches; ++b) {
    const auto t0 = std::chrono::steady_clock::now();
    const TabularPolicy old_policy = policy;
    double grad_norm = 0.0;
    double rm_sum = 0.0;
    int rm_count = 0;

    if (spec.name == "exact") {
      Vec grad = exact_policy_gradient(policy, reward);
      policy = policy.apply_gradient_step(grad, train.learning_rate);
      grad_norm = norm2(grad);
    } else {
      // Collect a batch of advantage profiles under the frozen snapshot.
      std::vector<AdvantageProfile> batch;
      const double greedy_rm =
          spec.name == "remax" ? sealed.rm_response(greedy_trajectory(old_policy)) : 0.0;
      if (spec.name == "grpo" || spec.name == "rloo") {
        const int k_size = spec.group_k;
        const int groups = std::max(1, train.batch_size / k_size);
        for (int g = 0; g < groups; ++g) {
          std::vector<Trajectory> group;
          std::vector<double> rewards(static_cast<std::size_t>(k_size));
          for (int k = 0; k < k_size; ++k) {
            RngStream s = master.substream(static_cast<std::uint64_t>(b),
                                           static_cast<std::uint64_t>(g * k_size + k), 0);
            group.push_back(old_policy.sample_trajectory(Prefix{}, 1.0, s));
            rewards[k] = sealed.rm_response(group[k]);
            rm_sum += rewards[k];
            ++rm_count;
          }
          for (int k = 0; k < k_size; ++k) {
            const double adv =
                spec.name == "grpo" ? grpo_advantage(rewards, static_cast<std::size_t>(k))
                                    : rloo_advantage(rewards, static_cast<std::size_t>(k));
            batch.push_back(AdvantageProfile{
                group[k], std::vector<double>(group[k].tokens.size(), adv)});
          }
        }
      } else {
        for (int i = 0; i < train.batch_size; ++i) {
          RngStream s = master.substream(static_cast<std::uint64_t>(b),
                                         static_cast<std::uint64_t>(i), 0);
          Trajectory w = old_policy.sample_trajectory(Prefix{}, 1.0, s);
          const double rm = sealed.rm_response(w);
          rm_sum += rm;
          ++rm_count;
          if (spec.name == "reinforce") {
            batch.push_back(AdvantageProfile{w, std::vector<double>(w.tokens.size(), rm)});
          } else if (spec.name == "remax") {
            batch.push_back(AdvantageProfile{
                w, std::vector<double>(w.tokens.size(), remax_advantage(rm, greedy_rm))});
          } else if (spec.name == "ppo") {
            std::vector<double> rewards = sealed.zero_reward_projection(w);
            batch.push_back(gae_advantages(w, rewards, *critic, 1.0, spec.lambda));
          } else {
            throw std::invalid_argument("unknown estimator: " + spec.name);
          }
        }
      }

      if (spec.normalize_advantages) {
        double mean = 0.0, count = 0.0;
        for (const AdvantageProfile& p : batch)
          for (double a : p.per_step) {
            mean += a;
            count += 1.0;
          }
        mean /= count;
        double var = 0.0;
        for (const AdvantageProfile& p : batch)
          for (double a : p.per_step) var += (a - mean) * (a - mean);
        const double std_dev = std::sqrt(var / count);
        if (std_dev > 0.0) {
          for (AdvantageProfile& p : batch)
            for (double& a : p.per_step) a = (a - mean) / std_dev;
        }
      }

      // grpo and ppo take clipped-surrogate steps against the snapshot; the
      // plain REINFORCE-family estimators take a single unclipped step.
      const bool clipped = spec.name == "grpo" || spec.name == "ppo";
      const int steps = clipped ? spec.optimization_num : 1;
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (int j = 0; j < steps; ++j) {
        Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
        for (const AdvantageProfile& profile : batch) {
          if (clipped) {
            Vec g = clipped_surrogate_gradient(policy, old_policy, profile, spec.epsilon);
            add_scaled(grad, g, scale);
          } else {
            detail::accumulate_profile_gradient(grad, policy, profile.trajectory,
                                                profile.per_step, nullptr, scale);
          }
        }
        policy = policy.apply_gradient_step(grad, train.learning_rate);
        grad_norm = norm2(grad);
      }

      if (spec.name == "ppo" && !spec.critic_oracle) {
        // Refine the persistent critic on this batch's zero-reward returns.
        Vec values = critic->values();
        const int epochs = std::max(1, spec.critic_fit.epochs);
        for (int e = 0; e < epochs; ++e) {
          for (const AdvantageProfile& profile : batch) {
            const double target = sealed.rm_response(profile.trajectory);
            Prefix cur;
            for (int token : profile.trajectory.tokens) {
              const int row = policy.contexts().row_of(cur);
              values[static_cast<std::size_t>(row)] +=
                  spec.critic_fit.learning_rate * (target - values[static_cast<std::size_t>(row)]);
              cur.push_back(token);
            }
          }
        }
        critic = CriticTable(policy.context_index(), std::move(values));
      }
    }

    RunLogRow row;
    row.batch = b;
    row.exact_j = exact_expected_rm(policy, sealed, Prefix{});
    row.mean_rm = rm_count > 0 ? rm_sum / rm_count : 0.0;
    row.grad_norm = grad_norm;
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.rows.push_back(row);
  }
  return TrainResult{std::move(policy), std::move(log)};
}

inline void write_stats_csv(const EstimateStats& stats, std::ostream& os) {
  os << "# sample_count=" << stats.sample_count << "\n";
  os << "# total_variance=" << format_g17(stats.total_variance) << "\n";
  os << "coordinate,mean,standard_error\n";
  for (std::size_t d = 0; d < stats.mean.size(); ++d) {
    os << d << ',' << format_g17(stats.mean[d]) << ',' << format_g17(stats.standard_error[d])
       << "\n";
  }
}

inline void write_unbiasedness_csv(const EstimateStats& stats, const Vec& oracle,
                                   const UnbiasednessReport& report, std::ostream& os) {
  os << "coordinate,mean,oracle,standard_error,z,flagged\n";
  for (std::size_t d = 0; d < stats.mean.size(); ++d) {
    os << d << ',' << format_g17(stats.mean[d]) << ',' << format_g17(oracle[d]) << ','
       << format_g17(stats.standard_error[d]) << ',' << format_g17(report.z[d]) << ','
       << (std::abs(report.z[d]) > report.z_threshold ? 1 : 0) << "\n";
  }
}

inline void write_variance_csv(const std::vector<VarianceRow>& rows, std::ostream& os) {
  os << "estimator,seed,total_variance\n";
  for (const VarianceRow& row : rows) {
    os << row.estimator << ',' << row.seed << ',' << format_g17(row.total_variance) << "\n";
  }
}

}  // namespace pglab

#endif  // PGLAB_HARNESS_HPP_
