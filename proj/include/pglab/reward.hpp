#ifndef PGLAB_REWARD_HPP_
#define PGLAB_REWARD_HPP_

#include <cmath>
#include <functional>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pglab/rng.hpp"
#include "pglab/token_mdp.hpp"
#include "pglab/vec.hpp"

namespace pglab {

// Response-level reward model RM(W), optionally backed by a hidden table of
// per-step token rewards with discount gamma. For token-table specs
// RM(W) == sum_t gamma^(t-1) * r(W_{0,t-1}, w_t) holds by construction.
//
// Estimators under test must not see the hidden table: sealed() returns a
// view that keeps rm_response working but refuses token_rewards (and
// rm_prefix, unless the spec was declared prefix-scorable).
class RewardSpec {
 public:
  enum class Kind { TokenTable, OutcomeBinary, Custom, Composite };

  static RewardSpec token_table(std::shared_ptr<const ContextIndex> ctx, Vec table,
                                double gamma, bool prefix_scorable = false) {
    if (!ctx) throw std::invalid_argument("RewardSpec: null context index");
    if (static_cast<int>(table.size()) != ctx->param_count()) {
      throw std::invalid_argument("RewardSpec: table size does not match context index");
    }
    check_gamma(gamma);
    RewardSpec s(Kind::TokenTable);
    s.ctx_ = std::move(ctx);
    s.table_ = std::make_shared<const Vec>(std::move(table));
    s.gamma_ = gamma;
    s.prefix_scorable_ = prefix_scorable;
    return s;
  }

  // 1.0 per occurrence of `token`, 0 otherwise.
  static RewardSpec count_token(std::shared_ptr<const ContextIndex> ctx, int token,
                                double gamma = 1.0, bool prefix_scorable = true) {
    const int v = ctx->vocab();
    if (token < 0 || token >= v) throw std::invalid_argument("count_token: token out of range");
    Vec table(static_cast<std::size_t>(ctx->param_count()), 0.0);
    for (int r = 0; r < ctx->rows(); ++r) table[static_cast<std::size_t>(r) * v + token] = 1.0;
    return token_table(std::move(ctx), std::move(table), gamma, prefix_scorable);
  }

  static RewardSpec random_table(std::shared_ptr<const ContextIndex> ctx, double gamma,
                                 std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    RngStream rng(seed);
    Vec table(static_cast<std::size_t>(ctx->param_count()));
    for (double& x : table) x = rng.uniform(lo, hi);
    return token_table(std::move(ctx), std::move(table), gamma);
  }

  // Sparse 0/1 reward: 1 iff the trajectory equals the target token string.
  static RewardSpec outcome_match(std::vector<int> target) {
    RewardSpec s(Kind::OutcomeBinary);
    s.target_ = std::move(target);
    return s;
  }

  // Arbitrary response-level scorer; not decomposable, not prefix-scorable.
  static RewardSpec custom(std::function<double(const Trajectory&)> fn) {
    RewardSpec s(Kind::Custom);
    s.fn_ = std::move(fn);
    return s;
  }

  // Linear merge of reward models: RM = sum of component responses.
  static RewardSpec composite(std::vector<RewardSpec> components) {
    if (components.empty()) throw std::invalid_argument("composite: needs at least one component");
    RewardSpec s(Kind::Composite);
    s.components_ = std::move(components);
    return s;
  }

  Kind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  bool decomposable() const { return kind_ == Kind::TokenTable; }
  bool prefix_scorable() const { return kind_ == Kind::TokenTable && prefix_scorable_; }
  bool sealed() const { return sealed_; }
  std::shared_ptr<const ContextIndex> context_index() const { return ctx_; }

  // Estimator-facing view: hidden token rewards become inaccessible.
  RewardSpec sealed_view() const {
    RewardSpec s(*this);
    s.sealed_ = true;
    for (RewardSpec& c : s.components_) c = c.sealed_view();
    return s;
  }

  double rm_response(const Trajectory& w) const {
    switch (kind_) {
      case Kind::TokenTable: {
        require_terminal(w);
        double acc = 0.0;
        double discount = 1.0;
        Prefix cur;
        for (int token : w.tokens) {
          acc += discount * table_entry(cur, token);
          discount *= gamma_;
          cur.push_back(token);
        }
        return acc;
      }
      case Kind::OutcomeBinary:
        require_terminal(w);
        return w.tokens == target_ ? 1.0 : 0.0;
      case Kind::Custom:
        require_terminal(w);
        return fn_(w);
      case Kind::Composite: {
        double acc = 0.0;
        for (const RewardSpec& c : components_) acc += c.rm_response(w);
        return acc;
      }
    }
    throw std::logic_error("unreachable");
  }

  // Hidden per-step rewards r(W_{0,t-1}, w_t). Only the oracle side may call
  // this; estimators get the sealed view and land in the error below.
  std::vector<double> token_rewards(const Trajectory& w) const {
    if (kind_ != Kind::TokenTable) {
      throw std::runtime_error("hidden rewards unavailable: reward spec is not token-decomposable");
    }
    if (sealed_) {
      throw std::runtime_error("hidden rewards unavailable: spec is sealed to response-level access");
    }
    std::vector<double> out;
    out.reserve(w.tokens.size());
    Prefix cur;
    for (int token : w.tokens) {
      out.push_back(table_entry(cur, token));
      cur.push_back(token);
    }
    return out;
  }

  // Single hidden-table entry r(prefix, token); same access gating as
  // token_rewards.
  double hidden_token_reward(const Prefix& prefix, int token) const {
    if (kind_ != Kind::TokenTable) {
      throw std::runtime_error("hidden rewards unavailable: reward spec is not token-decomposable");
    }
    if (sealed_) {
      throw std::runtime_error("hidden rewards unavailable: spec is sealed to response-level access");
    }
    return table_entry(prefix, token);
  }

  // Zero-Reward Assumption view of a trajectory: zeros everywhere, full
  // response reward on the final step.
  std::vector<double> zero_reward_projection(const Trajectory& w) const {
    require_terminal(w);
    std::vector<double> out(w.tokens.size(), 0.0);
    if (!out.empty()) out.back() = rm_response(w);
    return out;
  }

  // Accumulated score of a partial trajectory. Available for token-table
  // specs; once sealed, only if the spec was declared prefix-scorable.
  double rm_prefix(const Prefix& prefix) const {
    if (kind_ != Kind::TokenTable) {
      throw std::runtime_error("prefix scoring unavailable: reward spec cannot score partial trajectories");
    }
    if (sealed_ && !prefix_scorable_) {
      throw std::runtime_error("prefix scoring unavailable: spec is sealed to response-level access");
    }
    double acc = 0.0;
    double discount = 1.0;
    Prefix cur;
    for (int token : prefix) {
      acc += discount * table_entry(cur, token);
      discount *= gamma_;
      cur.push_back(token);
    }
    return acc;
  }

  // Difference-of-prefix-scores shaping: entry t is
  // rm_prefix(W_{0,t}) - rm_prefix(W_{0,t-1}); the entries telescope to
  // rm_response - rm_prefix(empty).
  std::vector<double> r3hf_shape(const Trajectory& w) const {
    std::vector<double> out;
    out.reserve(w.tokens.size());
    Prefix cur;
    double prev = rm_prefix(cur);
    for (int token : w.tokens) {
      cur.push_back(token);
      double next = rm_prefix(cur);
      out.push_back(next - prev);
      prev = next;
    }
    return out;
  }

 private:
  explicit RewardSpec(Kind kind) : kind_(kind) {}

  static void check_gamma(double gamma) {
    if (!(gamma > 0.0) || gamma > 1.0) {
      throw std::invalid_argument("RewardSpec: gamma must be in (0, 1]");
    }
  }

  void require_terminal(const Trajectory& w) const {
    if (ctx_ && !is_terminal(ctx_->mdp(), w.tokens)) {
      throw std::invalid_argument("rm_response: trajectory is not terminal");
    }
  }

  double table_entry(const Prefix& prefix, int token) const {
    const int row = ctx_->row_of(prefix);
    return (*table_)[static_cast<std::size_t>(row) * ctx_->vocab() + token];
  }

  Kind kind_;
  double gamma_ = 1.0;
  bool prefix_scorable_ = false;
  bool sealed_ = false;
  std::shared_ptr<const ContextIndex> ctx_;
  std::shared_ptr<const Vec> table_;
  std::vector<int> target_;
  std::function<double(const Trajectory&)> fn_;
  std::vector<RewardSpec> components_;
};

// Text table loader, one entry per line: "<ctx> <token> <value>" where <ctx>
// is "-" for the empty prefix or comma-separated token indices. Missing
// entries default to 0. Lines starting with '#' are skipped.
inline RewardSpec token_table_from_stream(std::shared_ptr<const ContextIndex> ctx,
                                          std::istream& is, double gamma,
                                          bool prefix_scorable = false) {
  Vec table(static_cast<std::size_t>(ctx->param_count()), 0.0);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string ctx_label;
    int token = 0;
    double value = 0.0;
    if (!(ls >> ctx_label >> token >> value)) {
      throw std::runtime_error("token table: parse error at line " + std::to_string(line_no));
    }
    Prefix prefix;
    if (ctx_label != "-") {
      std::istringstream ps(ctx_label);
      std::string part;
      while (std::getline(ps, part, ',')) prefix.push_back(std::stoi(part));
    }
    if (token < 0 || token >= ctx->vocab()) {
      throw std::runtime_error("token table: token out of range at line " + std::to_string(line_no));
    }
    table[static_cast<std::size_t>(ctx->row_of(prefix)) * ctx->vocab() + token] = value;
  }
  return RewardSpec::token_table(std::move(ctx), std::move(table), gamma, prefix_scorable);
}

}  // namespace pglab

#endif  // PGLAB_REWARD_HPP_
