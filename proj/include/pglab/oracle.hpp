#ifndef PGLAB_ORACLE_HPP_
#define PGLAB_ORACLE_HPP_

#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pglab/policy.hpp"
#include "pglab/reward.hpp"
#include "pglab/token_mdp.hpp"
#include "pglab/vec.hpp"

namespace pglab {

// Exact enumeration-based ground truth. Everything here walks the complete
// finite trajectory space, so results are equalities up to float round-off,
// not statistical estimates.

// Backward-induction value tables. v and q use the step-relative discount
// convention Q(s,w) = r(s,w) + gamma*V(s+w), V(s) = E_{w~pi} Q(s,w), with
// V = 0 at terminal prefixes; absolute-time discounting lives in the
// gamma^(t-1) weights of the gradient formulas, not in the tables.
// expected_rm is computed by an independent recursion over response rewards
// at the leaves: expected_rm[s] = E[RM(W) | W extends s].
struct ExactTables {
  std::shared_ptr<const ContextIndex> ctx;
  double gamma = 1.0;
  Vec v;            // per row
  Vec q;            // rows * vocab
  Vec expected_rm;  // per row

  double v_at(const Prefix& prefix) const {
    if (is_terminal(ctx->mdp(), prefix)) return 0.0;
    return v[static_cast<std::size_t>(ctx->row_of(prefix))];
  }
  double q_at(const Prefix& prefix, int token) const {
    return q[static_cast<std::size_t>(ctx->row_of(prefix)) * ctx->vocab() + token];
  }
};

// E[RM(W) | W extends prefix] for every context row, for any reward kind.
inline Vec expected_rm_rows(const TabularPolicy& policy, const RewardSpec& spec) {
  const ContextIndex& ctx = policy.contexts();
  const TokenMdp& mdp = ctx.mdp();
  const int v = ctx.vocab();
  Vec m(static_cast<std::size_t>(ctx.rows()), 0.0);
  // Children sit at higher row indices than parents (breadth-first order), so
  // one reverse sweep suffices.
  for (int r = ctx.rows() - 1; r >= 0; --r) {
    const Prefix& base = ctx.prefix_of(r);
    std::vector<double> p = policy.probs_row(r);
    double acc = 0.0;
    for (int w = 0; w < v; ++w) {
      Prefix child = base;
      child.push_back(w);
      double child_value = is_terminal(mdp, child)
                               ? spec.rm_response(Trajectory{std::move(child)})
                               : m[static_cast<std::size_t>(ctx.row_of(child))];
      acc += p[w] * child_value;
    }
    m[static_cast<std::size_t>(r)] = acc;
  }
  return m;
}

inline double exact_expected_rm(const TabularPolicy& policy, const RewardSpec& spec,
                                const Prefix& prefix, EnumerationBudget budget = {}) {
  check_enumeration_budget(policy.mdp(), budget);
  if (is_terminal(policy.mdp(), prefix)) return spec.rm_response(Trajectory{prefix});
  Vec m = expected_rm_rows(policy, spec);
  return m[static_cast<std::size_t>(policy.contexts().row_of(prefix))];
}

// Expected response reward per context row under one fixed policy. This is
// all the exact-bypass paths need, and it works on sealed specs.
struct ExpectedRmTable {
  std::shared_ptr<const ContextIndex> ctx;
  Vec rows;

  double at(const Prefix& prefix, const RewardSpec& spec) const {
    if (is_terminal(ctx->mdp(), prefix)) return spec.rm_response(Trajectory{prefix});
    return rows[static_cast<std::size_t>(ctx->row_of(prefix))];
  }
};

inline ExpectedRmTable make_expected_rm_table(const TabularPolicy& policy, const RewardSpec& spec,
                                              EnumerationBudget budget = {}) {
  check_enumeration_budget(policy.mdp(), budget);
  return ExpectedRmTable{policy.context_index(), expected_rm_rows(policy, spec)};
}

inline ExactTables exact_tables(const TabularPolicy& policy, const RewardSpec& spec,
                                EnumerationBudget budget = {}) {
  if (!spec.decomposable() || spec.sealed()) {
    throw std::runtime_error("exact_tables: requires hidden token rewards (unsealed token-table spec)");
  }
  check_enumeration_budget(policy.mdp(), budget);
  const ContextIndex& ctx = policy.contexts();
  const TokenMdp& mdp = ctx.mdp();
  const int vocab = ctx.vocab();
  ExactTables t;
  t.ctx = policy.context_index();
  t.gamma = spec.gamma();
  t.v.assign(static_cast<std::size_t>(ctx.rows()), 0.0);
  t.q.assign(static_cast<std::size_t>(ctx.rows()) * vocab, 0.0);
  for (int r = ctx.rows() - 1; r >= 0; --r) {
    const Prefix& base = ctx.prefix_of(r);
    std::vector<double> p = policy.probs_row(r);
    double value = 0.0;
    for (int w = 0; w < vocab; ++w) {
      Prefix child = base;
      child.push_back(w);
      double v_child = is_terminal(mdp, child) ? 0.0
                                               : t.v[static_cast<std::size_t>(ctx.row_of(child))];
      double q = spec.hidden_token_reward(base, w) + spec.gamma() * v_child;
      t.q[static_cast<std::size_t>(r) * vocab + w] = q;
      value += p[w] * q;
    }
    t.v[static_cast<std::size_t>(r)] = value;
  }
  t.expected_rm = expected_rm_rows(policy, spec);
  return t;
}

// Flat text dump of the value tables, one line per context row, for golden
// tests and external inspection.
inline void dump_tables(const ExactTables& tables, std::ostream& os) {
  const ContextIndex& ctx = *tables.ctx;
  os << "pglab-tables v1\n";
  os << "gamma " << format_g17(tables.gamma) << "\n";
  os << "rows " << ctx.rows() << "\n";
  for (int r = 0; r < ctx.rows(); ++r) {
    os << r << ' ' << TabularPolicy::context_label(ctx.prefix_of(r));
    os << " v " << format_g17(tables.v[static_cast<std::size_t>(r)]);
    os << " q";
    for (int w = 0; w < ctx.vocab(); ++w) {
      os << ' ' << format_g17(tables.q[static_cast<std::size_t>(r) * ctx.vocab() + w]);
    }
    os << " m " << format_g17(tables.expected_rm[static_cast<std::size_t>(r)]) << "\n";
  }
}

// Token-table spec under the Zero-Reward Assumption: every non-terminal
// transition pays 0, every terminal transition pays the full response reward
// of the completed trajectory; gamma = 1.
inline RewardSpec zero_reward_spec(const TabularPolicy& policy, const RewardSpec& spec) {
  const ContextIndex& ctx = policy.contexts();
  const TokenMdp& mdp = ctx.mdp();
  const int vocab = ctx.vocab();
  Vec table(static_cast<std::size_t>(ctx.param_count()), 0.0);
  for (int r = 0; r < ctx.rows(); ++r) {
    const Prefix& base = ctx.prefix_of(r);
    for (int w = 0; w < vocab; ++w) {
      Prefix child = base;
      child.push_back(w);
      if (is_terminal(mdp, child)) {
        table[static_cast<std::size_t>(r) * vocab + w] = spec.rm_response(Trajectory{std::move(child)});
      }
    }
  }
  return RewardSpec::token_table(policy.context_index(), std::move(table), 1.0);
}

// Exact policy gradient: enumerate every trajectory, weight it by its
// probability, and sum gamma^(t-1) * Q(s_t, w_t) * dlogpi per step.
inline Vec exact_policy_gradient(const TabularPolicy& policy, const RewardSpec& spec,
                                 EnumerationBudget budget = {}) {
  ExactTables tables = exact_tables(policy, spec, budget);
  const double gamma = spec.gamma();
  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  TrajectoryEnumerator it(policy.mdp(), budget);
  while (auto w = it.next()) {
    const double p = policy.trajectory_prob(*w);
    double discount = 1.0;
    Prefix cur;
    for (int token : w->tokens) {
      const int row = policy.contexts().row_of(cur);
      policy.add_grad_log_prob(grad, row, token, p * discount * tables.q_at(cur, token));
      discount *= gamma;
      cur.push_back(token);
    }
  }
  return grad;
}

// Description of a gradient estimator whose expectation the oracle can take
// in closed form by enumerating all of its randomness.
struct EstimatorForm {
  enum class Kind {
    DiscountedQ,            // gamma^(t-1) * Q(s_t, w_t)
    UndiscountedStepQ,      // Q(s_t, w_t), unit step weights
    ExpectedRm,             // E[RM | W_{0,t}]
    ResponseRm,             // RM(W) at every step
    ResponseRmMinusGreedy,  // RM(W) - RM(greedy trajectory)
    LeaveOneOut,            // RM(W_k) - mean of the other K-1 group rewards
    PrefixDelta,            // E[RM | W_{0,t}] - E[RM | W_{0,t-1}]
    ZeroRewardAdvantage,    // Q - V under the zero-reward projection, gamma=1
    InverseDiscountExpectedRm,  // gamma^(1-t) * E[RM | W_{0,t}]
    GroupNormalized,        // (RM - group mean) / group std; not enumerable
  };

  Kind kind = Kind::ResponseRm;
  int group_k = 2;
  // Optional per-context additive constant c(s) on the step weight.
  std::shared_ptr<const Vec> context_baseline;

  static EstimatorForm discounted_q() { return {Kind::DiscountedQ, 2, nullptr}; }
  static EstimatorForm undiscounted_step_q() { return {Kind::UndiscountedStepQ, 2, nullptr}; }
  static EstimatorForm expected_rm() { return {Kind::ExpectedRm, 2, nullptr}; }
  static EstimatorForm response_rm() { return {Kind::ResponseRm, 2, nullptr}; }
  static EstimatorForm remax() { return {Kind::ResponseRmMinusGreedy, 2, nullptr}; }
  static EstimatorForm rloo(int k) { return {Kind::LeaveOneOut, k, nullptr}; }
  static EstimatorForm prefix_delta() { return {Kind::PrefixDelta, 2, nullptr}; }
  static EstimatorForm zero_reward_advantage() { return {Kind::ZeroRewardAdvantage, 2, nullptr}; }
  static EstimatorForm inverse_discount_expected_rm() {
    return {Kind::InverseDiscountExpectedRm, 2, nullptr};
  }
  static EstimatorForm grpo(int k) { return {Kind::GroupNormalized, k, nullptr}; }

  EstimatorForm with_baseline(Vec c) const {
    EstimatorForm f = *this;
    f.context_baseline = std::make_shared<const Vec>(std::move(c));
    return f;
  }
};

// E_W of the estimator's gradient, taken exactly. Certifies unbiasedness (or
// bias) analytically rather than statistically.
inline Vec exact_estimator_expectation(const EstimatorForm& form, const TabularPolicy& policy,
                                       const RewardSpec& spec, EnumerationBudget budget = {}) {
  using Kind = EstimatorForm::Kind;
  if (form.kind == Kind::GroupNormalized) {
    throw std::runtime_error(
        "exact_estimator_expectation: group-normalized advantages are not exactly enumerable; "
        "use the statistical harness");
  }
  check_enumeration_budget(policy.mdp(), budget);
  const ContextIndex& ctx = policy.contexts();
  if (form.context_baseline &&
      static_cast<int>(form.context_baseline->size()) != ctx.rows()) {
    throw std::invalid_argument("exact_estimator_expectation: baseline table size mismatch");
  }

  if (form.kind == Kind::LeaveOneOut) {
    if (form.context_baseline) {
      throw std::invalid_argument("exact_estimator_expectation: baseline not supported for leave-one-out");
    }
    if (form.group_k < 2) throw std::invalid_argument("leave-one-out: group size must be >= 2");
    // The leave-one-out baseline is independent of the scored sample, so the
    // expectation splits: E[RM(W) sum_t dlogpi] - E[RM] * E[sum_t dlogpi].
    Vec direct = exact_estimator_expectation(EstimatorForm::response_rm(), policy, spec, budget);
    Vec score_mean(static_cast<std::size_t>(policy.param_count()), 0.0);
    double mean_rm = 0.0;
    TrajectoryEnumerator it(policy.mdp(), budget);
    while (auto w = it.next()) {
      const double p = policy.trajectory_prob(*w);
      mean_rm += p * spec.rm_response(*w);
      Prefix cur;
      for (int token : w->tokens) {
        policy.add_grad_log_prob(score_mean, ctx.row_of(cur), token, p);
        cur.push_back(token);
      }
    }
    add_scaled(direct, score_mean, -mean_rm);
    return direct;
  }

  // Per-step weight ingredients.
  std::vector<double> expected_rm;
  ExactTables tables;
  ExactTables zr_tables;
  double greedy_rm = 0.0;
  const double gamma = spec.gamma();
  switch (form.kind) {
    case Kind::DiscountedQ:
    case Kind::UndiscountedStepQ:
      tables = exact_tables(policy, spec, budget);
      break;
    case Kind::ExpectedRm:
    case Kind::PrefixDelta:
    case Kind::InverseDiscountExpectedRm:
      expected_rm = expected_rm_rows(policy, spec);
      break;
    case Kind::ZeroRewardAdvantage:
      zr_tables = exact_tables(policy, zero_reward_spec(policy, spec), budget);
      break;
    case Kind::ResponseRmMinusGreedy:
      greedy_rm = spec.rm_response(greedy_trajectory(policy));
      break;
    default:
      break;
  }

  auto expected_rm_after = [&](const Trajectory& w, const Prefix& next_prefix) {
    // E[RM | W_{0,t}]: the completed trajectory's reward once terminal.
    if (is_terminal(policy.mdp(), next_prefix)) return spec.rm_response(w);
    return expected_rm[static_cast<std::size_t>(ctx.row_of(next_prefix))];
  };

  Vec grad(static_cast<std::size_t>(policy.param_count()), 0.0);
  TrajectoryEnumerator it(policy.mdp(), budget);
  while (auto w = it.next()) {
    const double p = policy.trajectory_prob(*w);
    const double rm = spec.rm_response(*w);
    double discount = 1.0;  // gamma^(t-1)
    Prefix cur;
    for (int token : w->tokens) {
      const int row = ctx.row_of(cur);
      Prefix next = cur;
      next.push_back(token);
      double weight = 0.0;
      switch (form.kind) {
        case Kind::DiscountedQ:
          weight = discount * tables.q_at(cur, token);
          break;
        case Kind::UndiscountedStepQ:
          weight = tables.q_at(cur, token);
          break;
        case Kind::ExpectedRm:
          weight = expected_rm_after(*w, next);
          break;
        case Kind::ResponseRm:
          weight = rm;
          break;
        case Kind::ResponseRmMinusGreedy:
          weight = rm - greedy_rm;
          break;
        case Kind::PrefixDelta:
          weight = expected_rm_after(*w, next) -
                   expected_rm[static_cast<std::size_t>(row)];
          break;
        case Kind::ZeroRewardAdvantage:
          weight = zr_tables.q_at(cur, token) - zr_tables.v[static_cast<std::size_t>(row)];
          break;
        case Kind::InverseDiscountExpectedRm:
          weight = expected_rm_after(*w, next) / discount;
          break;
        default:
          throw std::logic_error("unreachable");
      }
      if (form.context_baseline) weight += (*form.context_baseline)[static_cast<std::size_t>(row)];
      policy.add_grad_log_prob(grad, row, token, p * weight);
      discount *= gamma;
      cur = std::move(next);
    }
  }
  return grad;
}

// Closed-form variance-minimizing baseline b = Cov(X1*X2, X2) / Var(X2) for
// one (prefix, coordinate), where X1 = E[RM | prefix + w] and X2 is the
// chosen coordinate of dlogpi(w | prefix), both over w ~ pi(. | prefix).
struct BaselineDiagnostics {
  double optimal_b = 0.0;
  double independence_b = 0.0;  // E[X1], the simplified form
  double var_x2 = 0.0;
};

namespace detail {

struct BaselineVariates {
  std::vector<double> prob;  // pi(w | prefix)
  std::vector<double> x1;    // E[RM | prefix + w]
  std::vector<double> x2;    // coordinate of dlogpi(w | prefix)
};

inline BaselineVariates baseline_variates(const TabularPolicy& policy, const RewardSpec& spec,
                                          const Prefix& prefix, int coordinate) {
  const ContextIndex& ctx = policy.contexts();
  const int vocab = ctx.vocab();
  const int row = ctx.row_of(prefix);
  if (coordinate / vocab != row) {
    throw std::invalid_argument("baseline: coordinate does not belong to the prefix's context row");
  }
  const int col = coordinate % vocab;
  BaselineVariates vars;
  vars.prob = policy.probs_row(row);
  Vec m = expected_rm_rows(policy, spec);
  vars.x1.resize(static_cast<std::size_t>(vocab));
  vars.x2.resize(static_cast<std::size_t>(vocab));
  for (int w = 0; w < vocab; ++w) {
    Prefix child = prefix;
    child.push_back(w);
    vars.x1[w] = is_terminal(ctx.mdp(), child)
                     ? spec.rm_response(Trajectory{std::move(child)})
                     : m[static_cast<std::size_t>(ctx.row_of(child))];
    vars.x2[w] = (w == col ? 1.0 : 0.0) - vars.prob[col];
  }
  return vars;
}

}  // namespace detail

inline BaselineDiagnostics exact_optimal_baseline(const TabularPolicy& policy,
                                                  const RewardSpec& spec, const Prefix& prefix,
                                                  int coordinate) {
  detail::BaselineVariates vars = detail::baseline_variates(policy, spec, prefix, coordinate);
  const int vocab = policy.vocab();
  double e_x2 = 0.0, e_x2sq = 0.0, e_x1 = 0.0, e_y = 0.0, e_yx2 = 0.0;
  for (int w = 0; w < vocab; ++w) {
    const double p = vars.prob[w];
    const double y = vars.x1[w] * vars.x2[w];
    e_x2 += p * vars.x2[w];
    e_x2sq += p * vars.x2[w] * vars.x2[w];
    e_x1 += p * vars.x1[w];
    e_y += p * y;
    e_yx2 += p * y * vars.x2[w];
  }
  const double var_x2 = e_x2sq - e_x2 * e_x2;
  if (var_x2 < 1e-12) {
    throw std::runtime_error("undefined baseline: Var(X2) vanishes (near-one-hot policy)");
  }
  const double cov = e_yx2 - e_y * e_x2;
  return BaselineDiagnostics{cov / var_x2, e_x1, var_x2};
}

// Var(X1*X2 - b*X2) over w ~ pi(. | prefix), enumerated exactly. Used to
// certify that the closed-form baseline is the variance minimizer.
inline double baseline_objective_variance(const TabularPolicy& policy, const RewardSpec& spec,
                                          const Prefix& prefix, int coordinate, double b) {
  detail::BaselineVariates vars = detail::baseline_variates(policy, spec, prefix, coordinate);
  const int vocab = policy.vocab();
  double mean = 0.0, meansq = 0.0;
  for (int w = 0; w < vocab; ++w) {
    const double z = (vars.x1[w] - b) * vars.x2[w];
    mean += vars.prob[w] * z;
    meansq += vars.prob[w] * z * z;
  }
  return meansq - mean * mean;
}

}  // namespace pglab

#endif  // PGLAB_ORACLE_HPP_
