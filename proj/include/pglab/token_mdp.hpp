#ifndef PGLAB_TOKEN_MDP_HPP_
#define PGLAB_TOKEN_MDP_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pglab {

// Finite sequential generation process. States are token prefixes (implicitly
// preceded by the prompt symbol), actions are tokens, transitions are
// deterministic appends. A trajectory ends after `horizon` output tokens or
// as soon as the optional eos token is emitted.
struct TokenMdp {
  int vocab_size = 2;
  int horizon = 1;
  std::optional<int> eos_token;
  std::string prompt_id = "w0";
};

inline TokenMdp make_mdp(int vocab_size, int horizon,
                         std::optional<int> eos_token = std::nullopt,
                         std::string prompt_id = "w0") {
  if (vocab_size < 2) throw std::invalid_argument("TokenMdp: vocab_size must be >= 2");
  if (horizon < 1) throw std::invalid_argument("TokenMdp: horizon must be >= 1");
  if (eos_token && (*eos_token < 0 || *eos_token >= vocab_size)) {
    throw std::invalid_argument("TokenMdp: eos_token must be < vocab_size");
  }
  return TokenMdp{vocab_size, horizon, eos_token, std::move(prompt_id)};
}

// Ordered token indices following the prompt symbol. The empty prefix is the
// initial state.
using Prefix = std::vector<int>;

struct Trajectory {
  Prefix tokens;

  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.tokens == b.tokens;
  }
};

inline bool is_terminal(const TokenMdp& mdp, const Prefix& prefix) {
  if (static_cast<int>(prefix.size()) >= mdp.horizon) return true;
  return !prefix.empty() && mdp.eos_token && prefix.back() == *mdp.eos_token;
}

// True for prefixes the generation process can actually produce: tokens in
// range, eos (if any) only as the final element, length within the horizon.
inline bool is_valid_prefix(const TokenMdp& mdp, const Prefix& prefix) {
  if (static_cast<int>(prefix.size()) > mdp.horizon) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    int t = prefix[i];
    if (t < 0 || t >= mdp.vocab_size) return false;
    if (mdp.eos_token && t == *mdp.eos_token && i + 1 != prefix.size()) return false;
  }
  return true;
}

inline Prefix extend(const TokenMdp& mdp, const Prefix& prefix, int token) {
  if (token < 0 || token >= mdp.vocab_size) {
    throw std::invalid_argument("extend: token out of range");
  }
  if (is_terminal(mdp, prefix)) {
    throw std::logic_error("extend: cannot extend a terminal prefix");
  }
  Prefix out = prefix;
  out.push_back(token);
  return out;
}

struct EnumerationBudget {
  // Measured in trajectory-steps (sum of trajectory lengths over the space).
  std::int64_t max_steps = 10'000'000;
};

// Analytic size of the trajectory space, grouped by trajectory length.
// Returned as doubles so oversize spaces are detected instead of overflowing.
struct TrajectorySpaceSize {
  double trajectories = 0.0;
  double steps = 0.0;
};

inline TrajectorySpaceSize trajectory_space_size(const TokenMdp& mdp) {
  TrajectorySpaceSize out;
  const double v = mdp.vocab_size;
  if (!mdp.eos_token) {
    double n = std::pow(v, mdp.horizon);
    out.trajectories = n;
    out.steps = n * mdp.horizon;
    return out;
  }
  // Length L < horizon: L-1 non-eos tokens then eos. Length == horizon: any
  // final token after horizon-1 non-eos tokens.
  for (int len = 1; len < mdp.horizon; ++len) {
    double n = std::pow(v - 1, len - 1);
    out.trajectories += n;
    out.steps += n * len;
  }
  double n = std::pow(v - 1, mdp.horizon - 1) * v;
  out.trajectories += n;
  out.steps += n * mdp.horizon;
  return out;
}

inline void check_enumeration_budget(const TokenMdp& mdp, const EnumerationBudget& budget) {
  TrajectorySpaceSize size = trajectory_space_size(mdp);
  if (size.steps > static_cast<double>(budget.max_steps)) {
    throw std::runtime_error(
        "enumeration refused: trajectory space needs " +
        std::to_string(static_cast<long long>(size.steps)) +
        " trajectory-steps, over the budget of " + std::to_string(budget.max_steps));
  }
}

// Pure iterator over the complete trajectory space in lexicographic token
// order. Independent instances can be consumed concurrently.
class TrajectoryEnumerator {
 public:
  explicit TrajectoryEnumerator(const TokenMdp& mdp, EnumerationBudget budget = {})
      : mdp_(mdp) {
    check_enumeration_budget(mdp, budget);
    descend();
  }

  std::optional<Trajectory> next() {
    if (done_) return std::nullopt;
    Trajectory out{current_};
    advance();
    return out;
  }

 private:
  // Append token 0 until the prefix is terminal.
  void descend() {
    while (!is_terminal(mdp_, current_)) current_.push_back(0);
  }

  // Odometer step: bump the last position that still has a successor token,
  // then descend to the first terminal completion.
  void advance() {
    while (!current_.empty()) {
      if (current_.back() + 1 < mdp_.vocab_size) {
        ++current_.back();
        descend();
        return;
      }
      current_.pop_back();
    }
    done_ = true;
  }

  TokenMdp mdp_;
  Prefix current_;
  bool done_ = false;
};

inline std::vector<Trajectory> enumerate_trajectories(const TokenMdp& mdp,
                                                      EnumerationBudget budget = {}) {
  TrajectoryEnumerator it(mdp, budget);
  std::vector<Trajectory> out;
  while (auto w = it.next()) out.push_back(std::move(*w));
  return out;
}

// Bijection between reachable non-terminal prefixes (the policy's contexts)
// and dense row indices. Row order is breadth-first: the empty prefix first,
// then length-1 prefixes in lexicographic order, and so on. Immutable once
// built and intended to be shared via shared_ptr.
class ContextIndex {
 public:
  explicit ContextIndex(const TokenMdp& mdp, EnumerationBudget budget = {}) : mdp_(mdp) {
    check_enumeration_budget(mdp, budget);
    prefixes_.push_back(Prefix{});
    row_of_[Prefix{}] = 0;
    for (std::size_t head = 0; head < prefixes_.size(); ++head) {
      Prefix base = prefixes_[head];  // copy: prefixes_ may reallocate below
      for (int w = 0; w < mdp_.vocab_size; ++w) {
        Prefix child = base;
        child.push_back(w);
        if (is_terminal(mdp_, child)) continue;
        row_of_[child] = static_cast<int>(prefixes_.size());
        prefixes_.push_back(std::move(child));
      }
    }
  }

  const TokenMdp& mdp() const { return mdp_; }
  int rows() const { return static_cast<int>(prefixes_.size()); }
  int vocab() const { return mdp_.vocab_size; }
  int param_count() const { return rows() * vocab(); }

  int row_of(const Prefix& prefix) const {
    auto it = row_of_.find(prefix);
    if (it == row_of_.end()) {
      throw std::invalid_argument("ContextIndex: prefix is not a reachable non-terminal context");
    }
    return it->second;
  }

  std::optional<int> try_row(const Prefix& prefix) const {
    auto it = row_of_.find(prefix);
    if (it == row_of_.end()) return std::nullopt;
    return it->second;
  }

  const Prefix& prefix_of(int row) const { return prefixes_.at(static_cast<std::size_t>(row)); }

 private:
  TokenMdp mdp_;
  std::vector<Prefix> prefixes_;
  std::map<Prefix, int> row_of_;
};

}  // namespace pglab

#endif  // PGLAB_TOKEN_MDP_HPP_
