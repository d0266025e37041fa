#ifndef PGLAB_FIXTURES_HPP_
#define PGLAB_FIXTURES_HPP_

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "pglab/reward.hpp"
#include "pglab/token_mdp.hpp"

namespace pglab {

// Named task fixtures baked into the library so the verification suites need
// no external files.
struct Fixture {
  std::string name;
  TokenMdp mdp;
  std::shared_ptr<const ContextIndex> ctx;
  RewardSpec reward;
};

inline std::vector<std::string> fixture_names() {
  return {"canonical", "canonical3", "trap", "outcome4", "eos2"};
}

// - canonical:  vocab {a,b}, T=2, reward 1 per 'a', gamma=1. Dense and
//   decomposable; optimum 2.0 at the all-'a' policy.
// - canonical3: vocab 3, T=3, same count reward.
// - trap:       vocab {good,bad}, T=2. The first token decides the achievable
//   reward range (good branch about 2, bad branch about 0, +-0.2 at the second step),
//   so a global trajectory-level baseline is far off within each branch
//   while prefix-conditioned baselines stay tight.
// - outcome4:   vocab 4, T=4, binary reward for matching one target string.
// - eos2:       vocab {a,e}, T=2 with e as eos; exercises early termination.
inline Fixture make_fixture(const std::string& name) {
  if (name == "canonical") {
    TokenMdp mdp = make_mdp(2, 2);
    auto ctx = std::make_shared<ContextIndex>(mdp);
    return Fixture{name, mdp, ctx, RewardSpec::count_token(ctx, 0, 1.0)};
  }
  if (name == "canonical3") {
    TokenMdp mdp = make_mdp(3, 3);
    auto ctx = std::make_shared<ContextIndex>(mdp);
    return Fixture{name, mdp, ctx, RewardSpec::count_token(ctx, 0, 1.0)};
  }
  if (name == "trap") {
    TokenMdp mdp = make_mdp(2, 2);
    auto ctx = std::make_shared<ContextIndex>(mdp);
    Vec table(static_cast<std::size_t>(ctx->param_count()), 0.0);
    auto entry = [&](const Prefix& p, int w) -> double& {
      return table[static_cast<std::size_t>(ctx->row_of(p)) * 2 + w];
    };
    entry({}, 0) = 2.0;
    entry({}, 1) = 0.0;
    for (int first : {0, 1}) {
      entry({first}, 0) = 0.2;
      entry({first}, 1) = -0.2;
    }
    return Fixture{name, mdp, ctx, RewardSpec::token_table(ctx, std::move(table), 1.0)};
  }
  if (name == "outcome4") {
    TokenMdp mdp = make_mdp(4, 4);
    auto ctx = std::make_shared<ContextIndex>(mdp);
    return Fixture{name, mdp, ctx, RewardSpec::outcome_match({1, 2, 3, 0})};
  }
  if (name == "eos2") {
    TokenMdp mdp = make_mdp(2, 2, 1);
    auto ctx = std::make_shared<ContextIndex>(mdp);
    return Fixture{name, mdp, ctx, RewardSpec::count_token(ctx, 0, 1.0)};
  }
  throw std::invalid_argument("unknown fixture: " + name);
}

}  // namespace pglab

#endif  // PGLAB_FIXTURES_HPP_
