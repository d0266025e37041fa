#ifndef PGLAB_ESTIMATORS_HPP_
#define PGLAB_ESTIMATORS_HPP_

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pglab/oracle.hpp"
#include "pglab/policy.hpp"
#include "pglab/reward.hpp"
#include "pglab/rng.hpp"

namespace pglab {

// Per-timestep advantage estimates attached to one sampled trajectory.
struct AdvantageProfile {
  Trajectory trajectory;
  std::vector<double> per_step;
};

// REINFORCE with the response reward as the weight at every step.
inline Vec reinforce_rm_gradient(const TabularPolicy& policy, const Trajectory& w,
                                 double rm_value) {
  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  Prefix cur;
  for (int token : w.tokens) {
    policy.add_grad_log_prob(grad, policy.contexts().row_of(cur), token, rm_value);
    cur.push_back(token);
  }
  return grad;
}

// Group-normalized advantage (r_k - mean) / std with population std. A group
// with zero spread carries no signal and maps to 0 rather than NaN.
inline double grpo_advantage(std::span<const double> group_rewards, std::size_t k) {
  const std::size_t n = group_rewards.size();
  if (n < 2) throw std::invalid_argument("grpo_advantage: group size must be >= 2");
  if (k >= n) throw std::invalid_argument("grpo_advantage: index out of range");
  double mean = 0.0;
  for (double r : group_rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : group_rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  const double std_dev = std::sqrt(var);
  if (std_dev == 0.0) return 0.0;
  return (group_rewards[k] - mean) / std_dev;
}

// Leave-one-out baseline: r_k minus the mean of the other group rewards.
inline double rloo_advantage(std::span<const double> group_rewards, std::size_t k) {
  const std::size_t n = group_rewards.size();
  if (n < 2) throw std::invalid_argument("rloo_advantage: group size must be >= 2");
  if (k >= n) throw std::invalid_argument("rloo_advantage: index out of range");
  double others = 0.0;
  for (std::size_t o = 0; o < n; ++o) {
    if (o != k) others += group_rewards[o];
  }
  return group_rewards[k] - others / static_cast<double>(n - 1);
}

inline double remax_advantage(double reward, double greedy_reward) {
  return reward - greedy_reward;
}

// Learned tabular critic V^(prefix); terminal prefixes are implicitly 0.
class CriticTable {
 public:
  CriticTable(std::shared_ptr<const ContextIndex> ctx, Vec values)
      : ctx_(std::move(ctx)), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != ctx_->rows()) {
      throw std::invalid_argument("CriticTable: value count does not match context rows");
    }
  }

  static CriticTable zeros(std::shared_ptr<const ContextIndex> ctx) {
    Vec v(static_cast<std::size_t>(ctx->rows()), 0.0);
    return CriticTable(std::move(ctx), std::move(v));
  }

  // "Well-initialized critic" bypass: copy the oracle's expected response
  // reward per context, which is the exact value under the zero-reward
  // projection at gamma = 1.
  static CriticTable from_oracle(const ExactTables& tables) {
    return CriticTable(tables.ctx, tables.expected_rm);
  }

  double value(const Prefix& prefix) const {
    if (is_terminal(ctx_->mdp(), prefix)) return 0.0;
    return values_[static_cast<std::size_t>(ctx_->row_of(prefix))];
  }

  double value_row(int row) const { return values_[static_cast<std::size_t>(row)]; }
  const Vec& values() const { return values_; }
  std::shared_ptr<const ContextIndex> context_index() const { return ctx_; }

 private:
  std::shared_ptr<const ContextIndex> ctx_;
  Vec values_;
};

struct FitConfig {
  // epochs == 0 fits the closed-form least-squares solution (the per-prefix
  // empirical mean); epochs > 0 runs that many SGD passes instead.
  int epochs = 0;
  double learning_rate = 0.5;
};

// Fits V^ to zero-reward-projected returns-to-go (== RM(W) at every visited
// prefix) from `samples` trajectories of the policy. Unvisited prefixes stay 0.
inline CriticTable fit_critic(const TabularPolicy& policy, const RewardSpec& spec, int samples,
                              FitConfig config, RngStream& rng) {
  if (samples <= 0) throw std::invalid_argument("fit_critic: samples must be positive");
  const ContextIndex& ctx = policy.contexts();
  std::vector<std::pair<int, double>> visits;  // (row, target), in sample order
  for (int i = 0; i < samples; ++i) {
    RngStream stream = rng.substream(static_cast<std::uint64_t>(i));
    Trajectory w = policy.sample_trajectory(Prefix{}, 1.0, stream);
    const double target = spec.rm_response(w);
    Prefix cur;
    for (int token : w.tokens) {
      visits.emplace_back(ctx.row_of(cur), target);
      cur.push_back(token);
    }
  }
  Vec values(static_cast<std::size_t>(ctx.rows()), 0.0);
  if (config.epochs <= 0) {
    Vec counts(static_cast<std::size_t>(ctx.rows()), 0.0);
    for (const auto& [row, target] : visits) {
      values[static_cast<std::size_t>(row)] += target;
      counts[static_cast<std::size_t>(row)] += 1.0;
    }
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (counts[r] > 0.0) values[r] /= counts[r];
    }
  } else {
    for (int e = 0; e < config.epochs; ++e) {
      for (const auto& [row, target] : visits) {
        values[static_cast<std::size_t>(row)] +=
            config.learning_rate * (target - values[static_cast<std::size_t>(row)]);
      }
    }
  }
  return CriticTable(policy.context_index(), std::move(values));
}

// Generalized advantage estimation over one trajectory.
// delta_t = r_t + gamma*V^(s_{t+1}) - V^(s_t); A_t = sum_{k>=t} (gamma*lambda)^(k-t) delta_k.
inline AdvantageProfile gae_advantages(const Trajectory& w, std::span<const double> rewards,
                                       const CriticTable& critic, double gamma, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("gae: lambda must be in [0, 1]");
  const std::size_t n = w.tokens.size();
  if (rewards.size() != n) throw std::invalid_argument("gae: rewards length does not match trajectory");
  std::vector<double> values(n + 1, 0.0);
  Prefix cur;
  values[0] = critic.value(cur);
  for (std::size_t t = 0; t < n; ++t) {
    cur.push_back(w.tokens[t]);
    values[t + 1] = critic.value(cur);
  }
  AdvantageProfile profile{w, std::vector<double>(n, 0.0)};
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lambda * acc;
    profile.per_step[t] = acc;
  }
  return profile;
}

// Gradient of the clipped surrogate sum_t min(rho_t A_t, clip(rho_t) A_t)
// with rho_t = pi(w_t|s) / pi_old(w_t|s). A step whose clipped branch is
// selected is constant in theta and contributes nothing.
inline Vec clipped_surrogate_gradient(const TabularPolicy& policy, const TabularPolicy& old_policy,
                                      const AdvantageProfile& advantages, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("clipped surrogate: epsilon must be > 0");
  const Trajectory& w = advantages.trajectory;
  if (advantages.per_step.size() != w.tokens.size()) {
    throw std::invalid_argument("clipped surrogate: advantage length mismatch");
  }
  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  Prefix cur;
  for (std::size_t t = 0; t < w.tokens.size(); ++t) {
    const int token = w.tokens[t];
    const int row = policy.contexts().row_of(cur);
    const double lp_old = old_policy.log_prob(cur, token);
    if (!std::isfinite(lp_old) || std::exp(lp_old) == 0.0) {
      throw std::runtime_error("clipped surrogate: old policy assigns zero probability at a visited step");
    }
    const double ratio = std::exp(policy.log_prob(cur, token) - lp_old);
    const double a = advantages.per_step[t];
    const double clipped = std::min(std::max(ratio, 1.0 - epsilon), 1.0 + epsilon);
    if (ratio * a <= clipped * a) {
      policy.add_grad_log_prob(grad, row, token, a * ratio);
    }
    cur.push_back(token);
  }
  return grad;
}

struct DpoResult {
  double loss = 0.0;
  Vec gradient;
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// -log sigma(beta * (log-ratio of preferred - log-ratio of dispreferred))
// and its exact gradient in the trained policy's parameters.
inline DpoResult dpo_loss(const TabularPolicy& policy, const TabularPolicy& ref_policy,
                          const Trajectory& preferred, const Trajectory& dispreferred,
                          double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("dpo_loss: beta must be > 0");
  const double margin = beta * ((policy.trajectory_log_prob(preferred) -
                                 ref_policy.trajectory_log_prob(preferred)) -
                                (policy.trajectory_log_prob(dispreferred) -
                                 ref_policy.trajectory_log_prob(dispreferred)));
  DpoResult out;
  out.loss = softplus(-margin);
  out.gradient.assign(static_cast<std::size_t>(policy.param_count()), 0.0);
  // d loss / d margin = sigma(margin) - 1
  const double dmargin = sigmoid(margin) - 1.0;
  Prefix cur;
  for (int token : preferred.tokens) {
    policy.add_grad_log_prob(out.gradient, policy.contexts().row_of(cur), token, dmargin * beta);
    cur.push_back(token);
  }
  cur.clear();
  for (int token : dispreferred.tokens) {
    policy.add_grad_log_prob(out.gradient, policy.contexts().row_of(cur), token, -dmargin * beta);
    cur.push_back(token);
  }
  return out;
}

}  // namespace pglab

#endif  // PGLAB_ESTIMATORS_HPP_
