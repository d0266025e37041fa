#include "pglab/policy.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <sstream>

#include "pglab/token_mdp.hpp"

using namespace pglab;
using Catch::Matchers::WithinAbs;

namespace {

std::shared_ptr<const ContextIndex> ctx_2x2() {
  static auto ctx = std::make_shared<ContextIndex>(make_mdp(2, 2));
  return ctx;
}

TabularPolicy policy_with_row(std::shared_ptr<const ContextIndex> ctx, int row,
                              std::vector<double> row_logits) {
  Vec logits(static_cast<std::size_t>(ctx->param_count()), 0.0);
  for (int k = 0; k < ctx->vocab(); ++k) {
    logits[static_cast<std::size_t>(row) * ctx->vocab() + k] = row_logits[k];
  }
  return TabularPolicy(ctx, logits);
}

}  // namespace

TEST_CASE("log_prob on known rows") {
  auto p2 = TabularPolicy::uniform(ctx_2x2());
  CHECK_THAT(p2.log_prob({}, 0), WithinAbs(std::log(0.5), 1e-12));

  auto ctx3 = std::make_shared<ContextIndex>(make_mdp(3, 1));
  auto p3 = TabularPolicy::uniform(ctx3);
  CHECK_THAT(p3.log_prob({}, 1), WithinAbs(std::log(1.0 / 3.0), 1e-12));

  auto tilted = policy_with_row(ctx_2x2(), 0, {1.0, 0.0});
  CHECK_THAT(tilted.log_prob({}, 0), WithinAbs(std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)), 1e-12));
  CHECK_THAT(tilted.log_prob({}, 0), WithinAbs(-0.313262, 1e-6));

  CHECK_THROWS_AS(p2.log_prob({0, 1}, 0), std::invalid_argument);  // terminal prefix: no row
}

TEST_CASE("grad_log_prob is the softmax identity, sparse in the prefix row") {
  auto p2 = TabularPolicy::uniform(ctx_2x2());
  Vec g = p2.grad_log_prob({}, 0);
  CHECK_THAT(g[0], WithinAbs(0.5, 1e-12));
  CHECK_THAT(g[1], WithinAbs(-0.5, 1e-12));
  for (std::size_t i = 2; i < g.size(); ++i) CHECK(g[i] == 0.0);

  auto ctx3 = std::make_shared<ContextIndex>(make_mdp(3, 1));
  auto p3 = TabularPolicy::uniform(ctx3);
  Vec g3 = p3.grad_log_prob({}, 1);
  CHECK_THAT(g3[0], WithinAbs(-1.0 / 3.0, 1e-12));
  CHECK_THAT(g3[1], WithinAbs(2.0 / 3.0, 1e-12));
  CHECK_THAT(g3[2], WithinAbs(-1.0 / 3.0, 1e-12));

  auto tilted = policy_with_row(ctx_2x2(), 0, {1.0, 0.0});
  Vec gt = tilted.grad_log_prob({}, 0);
  CHECK_THAT(gt[0], WithinAbs(0.268941, 1e-6));
  CHECK_THAT(gt[1], WithinAbs(-0.268941, 1e-6));
}

TEST_CASE("grad_log_prob rows sum to zero and match finite differences") {
  auto ctx = std::make_shared<ContextIndex>(make_mdp(3, 2));
  for (std::uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
    auto policy = TabularPolicy::random_init(ctx, seed, 2.0);
    RngStream rng(seed);
    const Prefix prefix = {static_cast<int>(rng.below(3))};
    const int token = static_cast<int>(rng.below(3));
    Vec grad = policy.grad_log_prob(prefix, token);

    double row_sum = 0.0;
    const int row = ctx->row_of(prefix);
    for (int k = 0; k < 3; ++k) row_sum += grad[static_cast<std::size_t>(row) * 3 + k];
    CHECK_THAT(row_sum, WithinAbs(0.0, 1e-12));

    const double h = 1e-5;
    for (int d = 0; d < policy.param_count(); ++d) {
      Vec bump(static_cast<std::size_t>(policy.param_count()), 0.0);
      bump[d] = 1.0;
      double up = policy.apply_gradient_step(bump, h).log_prob(prefix, token);
      double down = policy.apply_gradient_step(bump, -h).log_prob(prefix, token);
      CHECK_THAT(grad[d], WithinAbs((up - down) / (2 * h), 1e-6));
    }
  }
}

TEST_CASE("probability normalization per context") {
  auto ctx = std::make_shared<ContextIndex>(make_mdp(4, 3));
  auto policy = TabularPolicy::random_init(ctx, 99, 2.0);
  for (int r = 0; r < ctx->rows(); ++r) {
    double sum = 0.0;
    for (double p : policy.probs_row(r)) sum += p;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("temperature zero sampling is greedy with lowest-index ties") {
  auto a = policy_with_row(ctx_2x2(), 0, {2.0, 1.0});
  auto b = policy_with_row(ctx_2x2(), 0, {1.0, 1.0});
  RngStream rng(7);
  CHECK(a.sample_token({}, 0.0, rng) == 0);
  CHECK(b.sample_token({}, 0.0, rng) == 0);
  // Seed-independent: no randomness consumed at temperature 0.
  RngStream r1(1), r2(2);
  CHECK(a.sample_token({}, 0.0, r1) == a.sample_token({}, 0.0, r2));
}

TEST_CASE("temperature-1 sampling matches softmax frequencies") {
  auto policy = TabularPolicy::uniform(ctx_2x2());
  RngStream rng(2024);
  const int n = 100000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) {
    if (policy.sample_token({}, 1.0, rng) == 0) ++zeros;
  }
  CHECK_THAT(static_cast<double>(zeros) / n, WithinAbs(0.5, 0.005));
}

TEST_CASE("sample_trajectory: greedy path, prefix preservation, uniform frequencies") {
  auto ctx = ctx_2x2();
  Vec logits = {2.0, 1.0, 2.0, 1.0, 2.0, 1.0};
  TabularPolicy greedy(ctx, logits);
  RngStream rng(3);
  CHECK(greedy.sample_trajectory({}, 0.0, rng).tokens == Prefix{0, 0});

  auto uniform = TabularPolicy::uniform(ctx);
  Trajectory from_b = uniform.sample_trajectory({1}, 1.0, rng);
  REQUIRE(from_b.tokens.size() == 2);
  CHECK(from_b.tokens[0] == 1);

  std::map<Prefix, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[uniform.sample_trajectory({}, 1.0, rng).tokens]++;
  REQUIRE(counts.size() == 4);
  for (const auto& [tokens, count] : counts) {
    CHECK_THAT(static_cast<double>(count) / n, WithinAbs(0.25, 0.01));
  }
}

TEST_CASE("trajectory_log_prob sums step log probs and normalizes") {
  auto uniform2 = TabularPolicy::uniform(ctx_2x2());
  CHECK_THAT(uniform2.trajectory_log_prob(Trajectory{{1, 0}}), WithinAbs(std::log(0.25), 1e-12));

  auto ctx3 = std::make_shared<ContextIndex>(make_mdp(3, 1));
  CHECK_THAT(TabularPolicy::uniform(ctx3).trajectory_log_prob(Trajectory{{2}}),
             WithinAbs(std::log(1.0 / 3.0), 1e-12));

  // Additivity on a row-dependent policy.
  auto ctx = ctx_2x2();
  Vec logits = {1.0, 0.0, 0.5, -0.5, 0.0, 0.0};
  TabularPolicy policy(ctx, logits);
  CHECK_THAT(policy.trajectory_log_prob(Trajectory{{0, 1}}),
             WithinAbs(policy.log_prob({}, 0) + policy.log_prob({0}, 1), 1e-12));

  // Normalization over the enumerated space, including eos.
  for (auto mdp : {make_mdp(2, 3), make_mdp(3, 2, 1), make_mdp(2, 2, 1)}) {
    auto c = std::make_shared<ContextIndex>(mdp);
    auto p = TabularPolicy::random_init(c, 5, 1.0);
    double total = 0.0;
    for (const auto& w : enumerate_trajectories(mdp)) total += p.trajectory_prob(w);
    CHECK_THAT(total, WithinAbs(1.0, 1e-10));
  }
}

TEST_CASE("apply_gradient_step: identity cases and immutability") {
  auto policy = TabularPolicy::random_init(ctx_2x2(), 42, 1.0);
  Vec zero(static_cast<std::size_t>(policy.param_count()), 0.0);
  CHECK(policy.apply_gradient_step(zero, 0.1).logits() == policy.logits());
  Vec grad(static_cast<std::size_t>(policy.param_count()), 1.0);
  CHECK(policy.apply_gradient_step(grad, 0.0).logits() == policy.logits());
  Vec short_grad(2, 1.0);
  CHECK_THROWS_AS(policy.apply_gradient_step(short_grad, 0.1), std::invalid_argument);
}

TEST_CASE("policy snapshots round-trip through the text format") {
  auto ctx = std::make_shared<ContextIndex>(make_mdp(3, 2, 2));
  auto policy = TabularPolicy::random_init(ctx, 77, 1.5);
  std::stringstream ss;
  policy.save(ss);
  TabularPolicy loaded = TabularPolicy::load(ss);
  CHECK(loaded.logits() == policy.logits());
  CHECK(loaded.mdp().vocab_size == 3);
  CHECK(loaded.mdp().eos_token == std::optional<int>{2});
}
