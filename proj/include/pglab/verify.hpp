#ifndef PGLAB_VERIFY_HPP_
#define PGLAB_VERIFY_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pglab/estimators.hpp"
#include "pglab/fixtures.hpp"
#include "pglab/harness.hpp"
#include "pglab/oracle.hpp"
#include "pglab/policy.hpp"
#include "pglab/reward.hpp"
#include "pglab/token_mdp.hpp"

namespace pglab {

// Verification suites. Each suite checks one family of exact or statistical
// properties against independent oracles. The independent oracles here stay
// deliberately primitive: the objective is a direct sum over enumerated
// trajectories and the gradient check is central finite differences, neither
// of which touches the value tables or the analytic gradient path they judge.

// J(theta) = sum_W P(W) RM(W). For token-table specs this equals the
// discounted objective for every gamma, because RM is the discounted sum of
// the hidden rewards by construction.
inline double enumerated_objective(const TabularPolicy& policy, const RewardSpec& spec) {
  double j = 0.0;
  TrajectoryEnumerator it(policy.mdp());
  while (auto w = it.next()) j += policy.trajectory_prob(*w) * spec.rm_response(*w);
  return j;
}

inline Vec finite_difference_gradient(const TabularPolicy& policy,
                                      const std::function<double(const TabularPolicy&)>& objective,
                                      double h = 1e-5) {
  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  Vec bump(static_cast<std::size_t>(policy.param_count()), 0.0);
  for (int d = 0; d < policy.param_count(); ++d) {
    bump[d] = 1.0;
    const double up = objective(policy.apply_gradient_step(bump, h));
    const double down = objective(policy.apply_gradient_step(bump, -h));
    grad[d] = (up - down) / (2.0 * h);
    bump[d] = 0.0;
  }
  return grad;
}

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  bool mutated = false;
  std::vector<CheckResult> checks;
  bool pass = false;
  double seconds = 0.0;
};

inline std::vector<std::string> suite_names() {
  return {"lemma1",      "lemma2",       "theorem1",      "theorem2",
          "gamma-remark", "main-theorem", "gae-endpoints", "corollary1"};
}

namespace detail {

inline void add_check(SuiteReport& report, std::string name, bool pass, std::string detail) {
  report.checks.push_back(CheckResult{std::move(name), pass, std::move(detail)});
}

inline void add_max_check(SuiteReport& report, std::string name, double max_dev, double tol) {
  std::ostringstream os;
  os << "max deviation " << max_dev << " (tolerance " << tol << ")";
  add_check(report, std::move(name), max_dev <= tol, os.str());
}

// Negative-control corruption: a state-dependent bump on the response reward
// that silently breaks the premise RM == discounted sum of hidden rewards.
inline RewardSpec corrupt_rm(const RewardSpec& spec) {
  return RewardSpec::custom([spec](const Trajectory& w) {
    return spec.rm_response(w) + (!w.tokens.empty() && w.tokens.front() == 0 ? 0.25 : 0.0);
  });
}

// Baseline invariance holds only when the added constant depends on the
// state alone. The mutated variant adds it on one action instead, which must
// shift the expectation.
inline Vec lemma1_expectation_with_action_dependent_bump(const TabularPolicy& policy,
                                                         const RewardSpec& spec, const Vec& c) {
  ExactTables tables = exact_tables(policy, spec);
  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  TrajectoryEnumerator it(policy.mdp());
  while (auto w = it.next()) {
    const double p = policy.trajectory_prob(*w);
    double discount = 1.0;
    Prefix cur;
    for (int token : w->tokens) {
      const int row = policy.contexts().row_of(cur);
      double weight = discount * tables.q_at(cur, token);
      if (token == 0) weight += c[static_cast<std::size_t>(row)];
      policy.add_grad_log_prob(grad, row, token, p * weight);
      discount *= spec.gamma();
      cur.push_back(token);
    }
  }
  return grad;
}

inline Vec random_context_constants(const ContextIndex& ctx, RngStream& rng, double scale) {
  Vec c(static_cast<std::size_t>(ctx.rows()));
  for (double& x : c) x = rng.uniform(-scale, scale);
  return c;
}

}  // namespace detail

// Gradient vs central finite differences of the enumerated objective, over
// randomized policies on the canonical and vocab-3/T-3 tasks.
inline SuiteReport run_lemma1_suite(std::uint64_t seed, bool mutate) {
  if (mutate) {
    throw std::invalid_argument("mutation is not defined for suite lemma1");
  }
  SuiteReport report;
  report.suite = "lemma1";
  for (const std::string& fixture_name : {std::string("canonical"), std::string("canonical3")}) {
    Fixture fx = make_fixture(fixture_name);
    double max_dev = 0.0;
    for (int i = 0; i < 20; ++i) {
      TabularPolicy policy = TabularPolicy::random_init(fx.ctx, derive_seed(seed, {1, static_cast<std::uint64_t>(i)}), 2.0);
      Vec exact = exact_policy_gradient(policy, fx.reward);
      Vec fd = finite_difference_gradient(
          policy, [&](const TabularPolicy& p) { return enumerated_objective(p, fx.reward); });
      max_dev = std::max(max_dev, max_abs_diff(exact, fd));
    }
    detail::add_max_check(report, "gradient matches finite differences on " + fixture_name + " (20 random policies)",
                          max_dev, 1e-6);
  }
  {
    // Discounted rewards: J is still the expected response reward.
    Fixture fx = make_fixture("canonical3");
    double max_dev = 0.0;
    double max_j_dev = 0.0;
    for (int i = 0; i < 5; ++i) {
      RewardSpec spec = RewardSpec::random_table(fx.ctx, 0.9, derive_seed(seed, {2, static_cast<std::uint64_t>(i)}));
      TabularPolicy policy = TabularPolicy::random_init(fx.ctx, derive_seed(seed, {3, static_cast<std::uint64_t>(i)}), 2.0);
      Vec exact = exact_policy_gradient(policy, spec);
      Vec fd = finite_difference_gradient(
          policy, [&](const TabularPolicy& p) { return enumerated_objective(p, spec); });
      max_dev = std::max(max_dev, max_abs_diff(exact, fd));
      max_j_dev = std::max(max_j_dev, std::abs(exact_tables(policy, spec).v[0] -
                                               enumerated_objective(policy, spec)));
    }
    detail::add_max_check(report, "gradient matches finite differences at gamma=0.9 (random tables)", max_dev, 1e-6);
    detail::add_max_check(report, "table value at the root equals the enumerated objective", max_j_dev, 1e-10);
  }
  return report;
}

// Adding per-context constants to the Q weights leaves the exact expectation
// unchanged; the leave-one-out form is likewise invariant.
inline SuiteReport run_lemma2_suite(std::uint64_t seed, bool mutate) {
  SuiteReport report;
  report.suite = "lemma2";
  report.mutated = mutate;
  Fixture fx = make_fixture("canonical");
  RewardSpec table_spec = RewardSpec::random_table(fx.ctx, 0.9, derive_seed(seed, {10}));
  double max_dev = 0.0;
  for (int i = 0; i < 10; ++i) {
    TabularPolicy policy = TabularPolicy::random_init(fx.ctx, derive_seed(seed, {11, static_cast<std::uint64_t>(i)}), 2.0);
    RngStream rng(derive_seed(seed, {12, static_cast<std::uint64_t>(i)}));
    Vec c = detail::random_context_constants(*fx.ctx, rng, 5.0);
    for (const RewardSpec& spec : {fx.reward, table_spec}) {
      Vec base = exact_estimator_expectation(EstimatorForm::discounted_q(), policy, spec);
      Vec with_baseline =
          mutate ? detail::lemma1_expectation_with_action_dependent_bump(policy, spec, c)
                 : exact_estimator_expectation(EstimatorForm::discounted_q().with_baseline(c),
                                               policy, spec);
      max_dev = std::max(max_dev, max_abs_diff(base, with_baseline));
    }
  }
  detail::add_max_check(report, "per-context constants leave the expectation unchanged (10 draws)",
                        max_dev, 1e-10);
  {
    double max_rloo = 0.0;
    TabularPolicy policy = TabularPolicy::random_init(fx.ctx, derive_seed(seed, {13}), 1.0);
    Vec oracle = exact_policy_gradient(policy, fx.reward);
    for (int k : {2, 4, 8}) {
      Vec rloo = exact_estimator_expectation(EstimatorForm::rloo(k), policy, fx.reward);
      max_rloo = std::max(max_rloo, max_abs_diff(rloo, oracle));
    }
    detail::add_max_check(report, "leave-one-out baseline is exactly unbiased (K in {2,4,8})",
                          max_rloo, 1e-10);
  }
  return report;
}

// Response-level form: expectation of E[RM | W_{0,t}] weights equals the
// hidden-token-reward gradient for every gamma and random table.
inline SuiteReport run_theorem1_suite(std::uint64_t seed, bool mutate) {
  SuiteReport report;
  report.suite = "theorem1";
  report.mutated = mutate;
  Fixture fx = make_fixture("canonical");
  double max_dev = 0.0;
  for (double gamma : {0.5, 0.9, 1.0}) {
    for (int i = 0; i < 10; ++i) {
      RewardSpec spec = RewardSpec::random_table(
          fx.ctx, gamma, derive_seed(seed, {20, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(gamma * 10)}));
      TabularPolicy policy = TabularPolicy::random_init(
          fx.ctx, derive_seed(seed, {21, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(gamma * 10)}), 2.0);
      RewardSpec response_side = mutate ? detail::corrupt_rm(spec) : spec;
      Vec lhs = exact_estimator_expectation(EstimatorForm::expected_rm(), policy, response_side);
      Vec rhs = exact_policy_gradient(policy, spec);
      max_dev = std::max(max_dev, max_abs_diff(lhs, rhs));
    }
  }
  detail::add_max_check(report,
                        "response-level expectation equals the hidden-reward gradient "
                        "(gamma in {0.5,0.9,1.0} x 10 tables)",
                        max_dev, 1e-10);
  {
    Fixture eos = make_fixture("eos2");
    TabularPolicy policy = TabularPolicy::random_init(eos.ctx, derive_seed(seed, {22}), 1.0);
    RewardSpec response_side = mutate ? detail::corrupt_rm(eos.reward) : eos.reward;
    Vec lhs = exact_estimator_expectation(EstimatorForm::expected_rm(), policy, response_side);
    Vec rhs = exact_policy_gradient(policy, eos.reward);
    detail::add_max_check(report, "equality holds with early eos termination",
                          max_abs_diff(lhs, rhs), 1e-10);
  }
  return report;
}

// Closed-form Cov/Var baseline: minimizes the enumerated variance against a
// perturbation grid, and its independence simplification is the expected
// response reward of the prefix.
inline SuiteReport run_theorem2_suite(std::uint64_t seed, bool mutate) {
  SuiteReport report;
  report.suite = "theorem2";
  report.mutated = mutate;
  bool grid_ok = true;
  double max_indep_dev = 0.0;
  std::ostringstream grid_detail;
  for (const std::string& fixture_name : {std::string("canonical"), std::string("canonical3")}) {
    Fixture fx = make_fixture(fixture_name);
    for (std::uint64_t pi = 0; pi < 3; ++pi) {
      TabularPolicy policy =
          pi == 0 ? TabularPolicy::uniform(fx.ctx)
                  : TabularPolicy::random_init(fx.ctx, derive_seed(seed, {30, pi}), 1.5);
      Vec m = expected_rm_rows(policy, fx.reward);
      for (int row : {0, 1}) {
        const Prefix& prefix = fx.ctx->prefix_of(row);
        for (int col = 0; col < fx.ctx->vocab(); ++col) {
          const int coordinate = row * fx.ctx->vocab() + col;
          BaselineDiagnostics diag = exact_optimal_baseline(policy, fx.reward, prefix, coordinate);
          const double b = mutate ? diag.optimal_b + 0.05 : diag.optimal_b;
          const double var_at_b = baseline_objective_variance(policy, fx.reward, prefix, coordinate, b);
          for (double delta : {0.01, 0.1, 1.0}) {
            for (double sign : {-1.0, 1.0}) {
              const double var_perturbed = baseline_objective_variance(
                  policy, fx.reward, prefix, coordinate, diag.optimal_b + sign * delta);
              if (!(var_at_b < var_perturbed)) {
                grid_ok = false;
                grid_detail << "not minimal at " << fixture_name << " row " << row << " col "
                            << col << " delta " << sign * delta << "; ";
              }
            }
          }
          max_indep_dev = std::max(
              max_indep_dev, std::abs(diag.independence_b - m[static_cast<std::size_t>(row)]));
        }
      }
    }
  }
  detail::add_check(report, "Cov/Var baseline minimizes the enumerated variance on the grid",
                    grid_ok, grid_ok ? "all grid points above the minimum" : grid_detail.str());
  detail::add_max_check(report, "independence simplification equals the expected prefix reward",
                        max_indep_dev, 1e-12);
  {
    Fixture fx = make_fixture("canonical");
    TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
    BaselineDiagnostics diag = exact_optimal_baseline(uniform, fx.reward, Prefix{}, 0);
    detail::add_max_check(report, "canonical root baseline equals 1.0 (two-point arithmetic)",
                          std::abs(diag.optimal_b - 1.0), 1e-12);

    // Constant X1 across actions: b collapses to that constant.
    Vec ones(static_cast<std::size_t>(fx.ctx->param_count()), 1.0);
    RewardSpec constant = RewardSpec::token_table(fx.ctx, std::move(ones), 1.0);
    BaselineDiagnostics cdiag = exact_optimal_baseline(uniform, constant, Prefix{}, 0);
    detail::add_max_check(report, "constant expected reward collapses the baseline to the constant",
                          std::abs(cdiag.optimal_b - 2.0), 1e-12);

    bool threw = false;
    try {
      TabularPolicy one_hot(fx.ctx, Vec{20.0, -20.0, 20.0, -20.0, 20.0, -20.0});
      exact_optimal_baseline(one_hot, fx.reward, Prefix{}, 0);
    } catch (const std::runtime_error&) {
      threw = true;
    }
    detail::add_check(report, "degenerate one-hot policy reports an undefined baseline", threw,
                      threw ? "refused as undefined" : "no refusal");
  }
  return report;
}

// Reweighting the response-level estimator by 1/gamma^(t-1) lands on the
// unit-step-weight Q form, not on the discounted objective's gradient.
inline SuiteReport run_gamma_remark_suite(std::uint64_t seed, bool mutate) {
  SuiteReport report;
  report.suite = "gamma-remark";
  report.mutated = mutate;
  Fixture fx = make_fixture("canonical");
  double max_dev = 0.0;
  for (double gamma : {0.5, 0.9}) {
    for (int i = 0; i < 10; ++i) {
      RewardSpec spec = RewardSpec::random_table(
          fx.ctx, gamma, derive_seed(seed, {40, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(gamma * 10)}));
      TabularPolicy policy = TabularPolicy::random_init(
          fx.ctx, derive_seed(seed, {41, static_cast<std::uint64_t>(i)}), 2.0);
      RewardSpec response_side = mutate ? detail::corrupt_rm(spec) : spec;
      Vec lhs =
          exact_estimator_expectation(EstimatorForm::inverse_discount_expected_rm(), policy, response_side);
      Vec rhs = exact_estimator_expectation(EstimatorForm::undiscounted_step_q(), policy, spec);
      max_dev = std::max(max_dev, max_abs_diff(lhs, rhs));
    }
  }
  detail::add_max_check(report,
                        "reweighted estimator equals the unit-step-weight Q gradient (gamma 0.5, 0.9)",
                        max_dev, 1e-10);
  {
    // The reweighting does not recover the discounted gradient: later steps
    // get more weight, not less.
    RewardSpec spec = RewardSpec::random_table(fx.ctx, 0.5, derive_seed(seed, {42}));
    TabularPolicy policy = TabularPolicy::random_init(fx.ctx, derive_seed(seed, {43}), 1.0);
    Vec reweighted =
        exact_estimator_expectation(EstimatorForm::inverse_discount_expected_rm(), policy, spec);
    Vec discounted = exact_estimator_expectation(EstimatorForm::discounted_q(), policy, spec);
    const double gap = max_abs_diff(reweighted, discounted);
    std::ostringstream os;
    os << "gap " << gap << " (expected clearly nonzero)";
    detail::add_check(report, "reweighted estimator differs from the discounted-objective gradient",
                      gap > 1e-3, os.str());
  }
  return report;
}

// Zero-reward-projected actor-critic advantages reproduce the hidden-reward
// gradient, and the projected Bellman tables agree with the expected-reward
// recursion route.
inline SuiteReport run_main_theorem_suite(std::uint64_t seed, bool mutate) {
  SuiteReport report;
  report.suite = "main-theorem";
  report.mutated = mutate;
  Fixture fx = make_fixture("canonical");
  double max_dev = 0.0;
  double max_route_dev = 0.0;
  for (double gamma : {0.5, 1.0}) {
    for (int i = 0; i < 5; ++i) {
      RewardSpec spec =
          gamma == 1.0 && i == 0
              ? fx.reward
              : RewardSpec::random_table(fx.ctx, gamma,
                                         derive_seed(seed, {50, static_cast<std::uint64_t>(i),
                                                            static_cast<std::uint64_t>(gamma * 10)}));
      TabularPolicy policy = TabularPolicy::random_init(
          fx.ctx, derive_seed(seed, {51, static_cast<std::uint64_t>(i)}), 1.5);
      RewardSpec response_side = mutate ? detail::corrupt_rm(spec) : spec;
      Vec lhs = exact_estimator_expectation(EstimatorForm::zero_reward_advantage(), policy, response_side);
      Vec rhs = exact_policy_gradient(policy, spec);
      max_dev = std::max(max_dev, max_abs_diff(lhs, rhs));

      // Route agreement: Q_zr(s, w) == E[RM | s + w], V_zr(s) == E[RM | s].
      ExactTables zr = exact_tables(policy, zero_reward_spec(policy, spec));
      Vec m = expected_rm_rows(policy, spec);
      for (int r = 0; r < fx.ctx->rows(); ++r) {
        max_route_dev = std::max(max_route_dev, std::abs(zr.v[r] - m[r]));
        const Prefix& base = fx.ctx->prefix_of(r);
        for (int w = 0; w < fx.ctx->vocab(); ++w) {
          Prefix child = base;
          child.push_back(w);
          const double m_child = is_terminal(fx.mdp, child)
                                     ? spec.rm_response(Trajectory{child})
                                     : m[static_cast<std::size_t>(fx.ctx->row_of(child))];
          max_route_dev = std::max(max_route_dev, std::abs(zr.q_at(base, w) - m_child));
        }
      }
    }
  }
  detail::add_max_check(report,
                        "zero-reward actor-critic advantages reproduce the hidden-reward gradient",
                        max_dev, 1e-10);
  detail::add_max_check(report, "projected Bellman tables agree with the expected-reward recursion",
                        max_route_dev, 1e-10);
  return report;
}

// GAE endpoints: lambda=1 is returns-minus-value, lambda=0 is the one-step
// TD residual, for arbitrary critics.
inline SuiteReport run_gae_endpoints_suite(std::uint64_t seed, bool mutate) {
  SuiteReport report;
  report.suite = "gae-endpoints";
  report.mutated = mutate;
  Fixture fx = make_fixture("canonical3");
  double max_dev_mc = 0.0, max_dev_td = 0.0, max_dev_disc = 0.0;
  RngStream rng(derive_seed(seed, {60}));
  for (int i = 0; i < 20; ++i) {
    Vec critic_values = detail::random_context_constants(*fx.ctx, rng, 2.0);
    CriticTable critic(fx.ctx, critic_values);
    TabularPolicy policy = TabularPolicy::uniform(fx.ctx);
    Trajectory w = policy.sample_trajectory(Prefix{}, 1.0, rng);
    std::vector<double> rewards(w.tokens.size());
    for (double& r : rewards) r = rng.uniform(-2.0, 2.0);
    if (mutate) rewards[0] += 0.1;

    std::vector<double> mc = gae_advantages(w, rewards, critic, 1.0, 1.0).per_step;
    std::vector<double> td = gae_advantages(w, rewards, critic, 1.0, 0.0).per_step;
    const double gamma = 0.7;
    std::vector<double> disc = gae_advantages(w, rewards, critic, gamma, 1.0).per_step;
    std::vector<double> raw_rewards(rewards.begin(), rewards.end());
    if (mutate) raw_rewards[0] -= 0.1;

    Prefix cur;
    std::vector<double> values(w.tokens.size() + 1, 0.0);
    values[0] = critic.value(cur);
    for (std::size_t t = 0; t < w.tokens.size(); ++t) {
      cur.push_back(w.tokens[t]);
      values[t + 1] = critic.value(cur);
    }
    for (std::size_t t = 0; t < w.tokens.size(); ++t) {
      double rtg = 0.0;
      double disc_rtg = 0.0, g = 1.0;
      for (std::size_t k = t; k < w.tokens.size(); ++k) {
        rtg += raw_rewards[k];
        disc_rtg += g * raw_rewards[k];
        g *= gamma;
      }
      max_dev_mc = std::max(max_dev_mc, std::abs(mc[t] - (rtg - values[t])));
      max_dev_td = std::max(max_dev_td,
                            std::abs(td[t] - (raw_rewards[t] + values[t + 1] - values[t])));
      max_dev_disc = std::max(max_dev_disc, std::abs(disc[t] - (disc_rtg - values[t])));
    }
  }
  detail::add_max_check(report, "lambda=1 equals returns minus value (random critics)", max_dev_mc, 1e-12);
  detail::add_max_check(report, "lambda=0 equals the one-step TD residual", max_dev_td, 1e-12);
  detail::add_max_check(report, "lambda=1 with gamma<1 equals discounted returns minus value",
                        max_dev_disc, 1e-12);
  {
    // Oracle critic: the lambda=1 profile is RM(W) - V(s_t) exactly.
    Fixture canon = make_fixture("canonical");
    TabularPolicy policy = TabularPolicy::uniform(canon.ctx);
    CriticTable critic(canon.ctx, expected_rm_rows(policy, canon.reward));
    double max_dev = 0.0;
    for (const Trajectory& w : enumerate_trajectories(canon.mdp)) {
      std::vector<double> zr = canon.reward.zero_reward_projection(w);
      std::vector<double> adv = gae_advantages(w, zr, critic, 1.0, 1.0).per_step;
      const double rm = canon.reward.rm_response(w);
      Prefix cur;
      for (std::size_t t = 0; t < w.tokens.size(); ++t) {
        max_dev = std::max(max_dev, std::abs(adv[t] - (rm - critic.value(cur))));
        cur.push_back(w.tokens[t]);
      }
    }
    detail::add_max_check(report, "oracle critic at lambda=1 gives RM minus the state value", max_dev, 1e-12);
  }
  return report;
}

// Statistical unbiasedness of the REINFORCE-family estimators: z-tests of
// 1e5-sample means against the exact gradient, five seeds each.
inline SuiteReport run_corollary1_suite(std::uint64_t seed, bool mutate, int jobs,
                                        std::int64_t n_samples = 100000) {
  SuiteReport report;
  report.suite = "corollary1";
  report.mutated = mutate;
  Fixture fx = make_fixture("canonical");
  TabularPolicy policy = TabularPolicy::uniform(fx.ctx);
  Vec oracle = exact_policy_gradient(policy, fx.reward);
  const RewardSpec estimator_spec = mutate ? detail::corrupt_rm(fx.reward) : fx.reward;

  {
    // Exact counterparts first: the response-level and greedy-baseline forms
    // have enumerable expectations that already match the oracle.
    Vec c1 = exact_estimator_expectation(EstimatorForm::response_rm(), policy, estimator_spec);
    Vec rmx = exact_estimator_expectation(EstimatorForm::remax(), policy, estimator_spec);
    detail::add_max_check(report, "exact expectation of the response-level form", max_abs_diff(c1, oracle), 1e-10);
    detail::add_max_check(report, "exact expectation of the greedy-baseline form", max_abs_diff(rmx, oracle), 1e-10);
  }

  std::vector<EstimatorSpec> specs;
  EstimatorSpec reinforce;
  reinforce.name = "reinforce";
  specs.push_back(reinforce);
  for (int k : {2, 4, 8}) {
    EstimatorSpec rloo;
    rloo.name = "rloo";
    rloo.group_k = k;
    specs.push_back(rloo);
  }
  EstimatorSpec remax;
  remax.name = "remax";
  specs.push_back(remax);

  int flagged = 0;
  int total = 0;
  bool hard_failure = false;
  double max_abs_z = 0.0;
  for (const EstimatorSpec& spec : specs) {
    for (std::uint64_t s = 0; s < 5; ++s) {
      EstimateStats stats = estimate_stats(spec, policy, estimator_spec, n_samples,
                                           derive_seed(seed, {71, s}), jobs);
      UnbiasednessReport ub = unbiasedness_report(stats, oracle);
      flagged += ub.flagged;
      total += ub.total;
      hard_failure = hard_failure || ub.hard_failure;
      max_abs_z = std::max(max_abs_z, ub.max_abs_z);
    }
  }
  std::ostringstream os;
  os << flagged << "/" << total << " coordinates flagged at 3 sigma (allowance 1%), max |z| "
     << max_abs_z;
  detail::add_check(report, "sample means within 3 SE of the oracle (reinforce, rloo K in {2,4,8}, remax; 5 seeds)",
                    !hard_failure && static_cast<double>(flagged) <= 0.01 * total, os.str());
  return report;
}

inline SuiteReport run_suite(const std::string& name, std::uint64_t seed, int jobs, bool mutate) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteReport report;
  if (name == "lemma1") {
    report = run_lemma1_suite(seed, mutate);
  } else if (name == "lemma2") {
    report = run_lemma2_suite(seed, mutate);
  } else if (name == "theorem1") {
    report = run_theorem1_suite(seed, mutate);
  } else if (name == "theorem2") {
    report = run_theorem2_suite(seed, mutate);
  } else if (name == "gamma-remark") {
    report = run_gamma_remark_suite(seed, mutate);
  } else if (name == "main-theorem") {
    report = run_main_theorem_suite(seed, mutate);
  } else if (name == "gae-endpoints") {
    report = run_gae_endpoints_suite(seed, mutate);
  } else if (name == "corollary1") {
    report = run_corollary1_suite(seed, mutate, jobs);
  } else {
    throw std::invalid_argument("unknown suite: " + name);
  }
  report.pass = !report.checks.empty();
  for (const CheckResult& check : report.checks) report.pass = report.pass && check.pass;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline void print_report(const SuiteReport& report, std::ostream& os) {
  os << "suite " << report.suite << (report.mutated ? " (mutated negative control)" : "") << "\n";
  for (const CheckResult& check : report.checks) {
    os << "  [" << (check.pass ? "PASS" : "FAIL") << "] " << check.name;
    if (!check.detail.empty()) os << " -- " << check.detail;
    os << "\n";
  }
  os << (report.pass ? "PASS" : "FAIL") << " (" << report.checks.size() << " checks, "
     << format_g17(report.seconds) << " s)\n";
}

inline void write_report_csv(const SuiteReport& report, std::ostream& os) {
  os << "suite,check,pass,detail\n";
  for (const CheckResult& check : report.checks) {
    std::string detail = check.detail;
    for (char& c : detail) {
      if (c == ',') c = ';';
    }
    os << report.suite << ',' << check.name << ',' << (check.pass ? 1 : 0) << ',' << detail << "\n";
  }
}

}  // namespace pglab

#endif  // PGLAB_VERIFY_HPP_
