#ifndef PGLAB_POLICY_HPP_
#define PGLAB_POLICY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pglab/rng.hpp"
#include "pglab/token_mdp.hpp"
#include "pglab/vec.hpp"

namespace pglab {

inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Tabular softmax policy: one logit row per reachable non-terminal prefix of
// the bound TokenMdp. Immutable value type; gradient steps return a new
// policy. The flat parameter order is row * vocab + token.
class TabularPolicy {
 public:
  TabularPolicy(std::shared_ptr<const ContextIndex> ctx, Vec logits)
      : ctx_(std::move(ctx)), logits_(std::move(logits)) {
    if (!ctx_) throw std::invalid_argument("TabularPolicy: null context index");
    if (static_cast<int>(logits_.size()) != ctx_->param_count()) {
      throw std::invalid_argument("TabularPolicy: logits size does not match context index");
    }
  }

  static TabularPolicy uniform(std::shared_ptr<const ContextIndex> ctx) {
    Vec zeros(static_cast<std::size_t>(ctx->param_count()), 0.0);
    return TabularPolicy(std::move(ctx), std::move(zeros));
  }

  // Seeded uniform logit noise in [-scale, scale].
  static TabularPolicy random_init(std::shared_ptr<const ContextIndex> ctx,
                                   std::uint64_t seed, double scale = 1.0) {
    RngStream rng(seed);
    Vec logits(static_cast<std::size_t>(ctx->param_count()));
    for (double& x : logits) x = rng.uniform(-scale, scale);
    return TabularPolicy(std::move(ctx), std::move(logits));
  }

  const ContextIndex& contexts() const { return *ctx_; }
  std::shared_ptr<const ContextIndex> context_index() const { return ctx_; }
  const TokenMdp& mdp() const { return ctx_->mdp(); }
  int rows() const { return ctx_->rows(); }
  int vocab() const { return ctx_->vocab(); }
  int param_count() const { return ctx_->param_count(); }
  const Vec& logits() const { return logits_; }
  double logit(int row, int token) const {
    return logits_[static_cast<std::size_t>(row) * vocab() + token];
  }

  std::vector<double> probs_row(int row) const {
    std::vector<double> p = log_probs_row(row);
    for (double& x : p) x = std::exp(x);
    return p;
  }

  std::vector<double> log_probs_row(int row) const {
    const int v = vocab();
    std::vector<double> out(static_cast<std::size_t>(v));
    const double* l = logits_.data() + static_cast<std::size_t>(row) * v;
    double m = l[0];
    for (int k = 1; k < v; ++k) m = std::max(m, l[k]);
    double z = 0.0;
    for (int k = 0; k < v; ++k) z += std::exp(l[k] - m);
    double log_z = m + std::log(z);
    for (int k = 0; k < v; ++k) out[k] = l[k] - log_z;
    return out;
  }

  double log_prob(const Prefix& prefix, int token) const {
    check_token(token);
    return log_probs_row(ctx_->row_of(prefix))[static_cast<std::size_t>(token)];
  }

  double prob(const Prefix& prefix, int token) const { return std::exp(log_prob(prefix, token)); }

  // d log pi(token | prefix) / d theta. Nonzero only in the prefix's row:
  // chosen token gets 1 - pi(token), every other column -pi(k).
  Vec grad_log_prob(const Prefix& prefix, int token) const {
    check_token(token);
    Vec grad(static_cast<std::size_t>(param_count()), 0.0);
    add_grad_log_prob(grad, ctx_->row_of(prefix), token, 1.0);
    return grad;
  }

  // Accumulates coeff * d log pi(token | row) into acc. Hot path shared by
  // every estimator.
  void add_grad_log_prob(Vec& acc, int row, int token, double coeff) const {
    const int v = vocab();
    std::vector<double> p = probs_row(row);
    double* a = acc.data() + static_cast<std::size_t>(row) * v;
    for (int k = 0; k < v; ++k) a[k] -= coeff * p[k];
    a[token] += coeff;
  }

  // Temperature 0 is argmax with ties broken toward the lowest token index
  // and consumes no randomness. Temperature tau > 0 samples softmax(logits/tau).
  int sample_token(const Prefix& prefix, double temperature, RngStream& rng) const {
    if (temperature < 0.0) throw std::invalid_argument("sample_token: temperature must be >= 0");
    const int row = ctx_->row_of(prefix);
    const int v = vocab();
    const double* l = logits_.data() + static_cast<std::size_t>(row) * v;
    if (temperature == 0.0) {
      int best = 0;
      for (int k = 1; k < v; ++k) {
        if (l[k] > l[best]) best = k;
      }
      return best;
    }
    double m = l[0];
    for (int k = 1; k < v; ++k) m = std::max(m, l[k]);
    std::vector<double> w(static_cast<std::size_t>(v));
    double z = 0.0;
    for (int k = 0; k < v; ++k) {
      w[k] = std::exp((l[k] - m) / temperature);
      z += w[k];
    }
    double u = rng.uniform01() * z;
    double acc = 0.0;
    for (int k = 0; k < v; ++k) {
      acc += w[k];
      if (u < acc) return k;
    }
    return v - 1;
  }

  Trajectory sample_trajectory(const Prefix& from, double temperature, RngStream& rng) const {
    const TokenMdp& m = mdp();
    if (!is_valid_prefix(m, from)) throw std::invalid_argument("sample_trajectory: invalid prefix");
    Prefix cur = from;
    while (!is_terminal(m, cur)) {
      cur.push_back(sample_token(cur, temperature, rng));
    }
    return Trajectory{std::move(cur)};
  }

  double trajectory_log_prob(const Trajectory& w) const {
    const TokenMdp& m = mdp();
    double lp = 0.0;
    Prefix cur;
    for (int token : w.tokens) {
      if (is_terminal(m, cur)) throw std::invalid_argument("trajectory_log_prob: invalid trajectory");
      lp += log_prob(cur, token);
      cur.push_back(token);
    }
    if (!is_terminal(m, cur)) throw std::invalid_argument("trajectory_log_prob: trajectory not terminal");
    return lp;
  }

  double trajectory_prob(const Trajectory& w) const { return std::exp(trajectory_log_prob(w)); }

  TabularPolicy apply_gradient_step(const Vec& grad, double learning_rate) const {
    check_same_size(logits_, grad, "apply_gradient_step");
    Vec next = logits_;
    add_scaled(next, grad, learning_rate);
    return TabularPolicy(ctx_, std::move(next));
  }

  // Flat text snapshot: header with the MDP, then one line per row with the
  // context tokens and the logits. Round-trips exactly via %.17g.
  void save(std::ostream& os) const {
    const TokenMdp& m = mdp();
    os << "pglab-policy v1\n";
    os << "vocab " << m.vocab_size << " horizon " << m.horizon << " eos "
       << (m.eos_token ? std::to_string(*m.eos_token) : std::string("-")) << " prompt "
       << m.prompt_id << "\n";
    os << "rows " << rows() << "\n";
    for (int r = 0; r < rows(); ++r) {
      os << r << ' ' << context_label(ctx_->prefix_of(r));
      for (int k = 0; k < vocab(); ++k) os << ' ' << format_g17(logit(r, k));
      os << "\n";
    }
  }

  static TabularPolicy load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "pglab-policy v1") {
      throw std::runtime_error("policy load: bad header");
    }
    std::string kw, eos_s, prompt;
    int vocab = 0, horizon = 0;
    is >> kw >> vocab >> kw >> horizon >> kw >> eos_s >> kw >> prompt;
    std::optional<int> eos;
    if (eos_s != "-") eos = std::stoi(eos_s);
    int rows = 0;
    is >> kw >> rows;
    auto ctx = std::make_shared<ContextIndex>(make_mdp(vocab, horizon, eos, prompt));
    if (ctx->rows() != rows) throw std::runtime_error("policy load: row count mismatch");
    Vec logits(static_cast<std::size_t>(ctx->param_count()));
    for (int r = 0; r < rows; ++r) {
      int row_id = 0;
      std::string ctx_label;
      is >> row_id >> ctx_label;
      if (row_id != r || ctx_label != context_label(ctx->prefix_of(r))) {
        throw std::runtime_error("policy load: context mismatch at row " + std::to_string(r));
      }
      for (int k = 0; k < vocab; ++k) is >> logits[static_cast<std::size_t>(r) * vocab + k];
    }
    if (!is) throw std::runtime_error("policy load: truncated input");
    return TabularPolicy(std::move(ctx), std::move(logits));
  }

  static std::string context_label(const Prefix& prefix) {
    if (prefix.empty()) return "-";
    std::string out;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(prefix[i]);
    }
    return out;
  }

 private:
  void check_token(int token) const {
    if (token < 0 || token >= vocab()) throw std::invalid_argument("token out of range");
  }

  std::shared_ptr<const ContextIndex> ctx_;
  Vec logits_;
};

inline Trajectory greedy_trajectory(const TabularPolicy& policy) {
  RngStream unused(0);
  return policy.sample_trajectory(Prefix{}, 0.0, unused);
}

}  // namespace pglab

#endif  // PGLAB_POLICY_HPP_
