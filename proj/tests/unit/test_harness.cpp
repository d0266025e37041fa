#include "pglab/harness.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "pglab/fixtures.hpp"
#include "pglab/oracle.hpp"

using namespace pglab;
using Catch::Matchers::WithinAbs;

TEST_CASE("estimator spec validation") {
  EstimatorSpec spec;
  spec.name = "nonsense";
  CHECK_THROWS_WITH(spec.validate(), Catch::Matchers::ContainsSubstring("unknown estimator"));
  spec.name = "grpo";
  spec.group_k = 1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("constant rewards: estimator means sit within 3 SE of zero") {
  Fixture fx = make_fixture("canonical");
  Vec ones(static_cast<std::size_t>(fx.ctx->param_count()), 1.0);
  RewardSpec constant = RewardSpec::token_table(fx.ctx, std::move(ones), 1.0);
  TabularPolicy policy = TabularPolicy::random_init(fx.ctx, 3, 1.0);
  for (const char* name : {"reinforce", "rloo", "remax", "grpo"}) {
    EstimatorSpec spec;
    spec.name = name;
    EstimateStats stats = estimate_stats(spec, policy, constant, 20000, 7, 2);
    for (std::size_t d = 0; d < stats.mean.size(); ++d) {
      CHECK(std::abs(stats.mean[d]) <= 3.0 * stats.standard_error[d] + 1e-12);
    }
  }
}

TEST_CASE("response-level estimator mean matches the oracle at 1e5 samples") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  Vec oracle = exact_policy_gradient(uniform, fx.reward);
  EstimatorSpec spec;
  spec.name = "reinforce";
  EstimateStats stats = estimate_stats(spec, uniform, fx.reward, 100000, 11, 2);
  UnbiasednessReport report = unbiasedness_report(stats, oracle);
  CHECK(report.pass);
  CHECK(report.flagged == 0);
}

TEST_CASE("doubling the sample count halves the variance of the mean") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  EstimatorSpec spec;
  spec.name = "reinforce";
  EstimateStats small = estimate_stats(spec, uniform, fx.reward, 20000, 5, 2);
  EstimateStats big = estimate_stats(spec, uniform, fx.reward, 40000, 6, 2);
  const double ratio = (small.total_variance / small.sample_count) /
                       (big.total_variance / big.sample_count);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("estimate statistics are bit-identical across worker counts") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy policy = TabularPolicy::random_init(fx.ctx, 1, 1.0);
  for (const char* name : {"reinforce", "grpo", "trepo"}) {
    EstimatorSpec spec;
    spec.name = name;
    spec.trepo.d_size = 2;
    spec.trepo.rollouts_m = 2;
    EstimateStats a = estimate_stats(spec, policy, fx.reward, 3000, 42, 1);
    EstimateStats b = estimate_stats(spec, policy, fx.reward, 3000, 42, 3);
    CHECK(a.mean == b.mean);
    CHECK(a.standard_error == b.standard_error);
    CHECK(a.total_variance == b.total_variance);
    std::ostringstream csv_a, csv_b;
    write_stats_csv(a, csv_a);
    write_stats_csv(b, csv_b);
    CHECK(csv_a.str() == csv_b.str());
  }
}

TEST_CASE("unbiasedness report flags constructed deviations") {
  EstimateStats stats;
  stats.mean = {1.0, 2.0};
  stats.standard_error = {0.1, 0.1};
  stats.sample_count = 100;
  UnbiasednessReport ok = unbiasedness_report(stats, Vec{1.0, 2.0});
  CHECK(ok.pass);
  for (double z : ok.z) CHECK(z == 0.0);

  UnbiasednessReport shifted = unbiasedness_report(stats, Vec{1.0, 1.0});  // 10 SE off
  CHECK_FALSE(shifted.pass);
  CHECK(shifted.flagged == 1);

  stats.standard_error = {0.0, 0.1};
  UnbiasednessReport hard = unbiasedness_report(stats, Vec{1.5, 2.0});
  CHECK(hard.hard_failure);
  CHECK_FALSE(hard.pass);
}

TEST_CASE("an estimator compared with itself has identical variance") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  EstimatorSpec spec;
  spec.name = "reinforce";
  auto rows = variance_comparison({spec, spec}, uniform, fx.reward, 2000, {9, 10}, 2);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].total_variance == rows[2].total_variance);
  CHECK(rows[1].total_variance == rows[3].total_variance);
  CHECK_THROWS_AS(variance_comparison({spec}, uniform, fx.reward, 100, {1}, 1),
                  std::invalid_argument);
}

TEST_CASE("greedy baseline cuts variance when the greedy reward sits near the optimum baseline") {
  // At this random policy the greedy trajectory's reward is 1, close to the
  // variance-minimizing constant; subtracting it beats no baseline roughly
  // fourfold (exact totals 0.34 vs 1.33).
  Fixture fx = make_fixture("canonical");
  TabularPolicy policy = TabularPolicy::random_init(fx.ctx, 2, 1.0);
  REQUIRE(fx.reward.rm_response(greedy_trajectory(policy)) == 1.0);
  EstimatorSpec plain;
  plain.name = "reinforce";
  EstimatorSpec remax;
  remax.name = "remax";
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EstimateStats a = estimate_stats(plain, policy, fx.reward, 20000, seed, 2);
    EstimateStats b = estimate_stats(remax, policy, fx.reward, 20000, seed, 2);
    CHECK(b.total_variance < a.total_variance);
  }
}

TEST_CASE("trap fixture: prefix-conditioned advantages beat the group-normalized constant") {
  Fixture trap = make_fixture("trap");
  TabularPolicy uniform = TabularPolicy::uniform(trap.ctx);
  EstimatorSpec trepo;
  trepo.name = "trepo-exact";
  trepo.trepo.d_size = 2;
  EstimatorSpec grpo;
  grpo.name = "grpo";
  grpo.group_k = 4;
  auto rows = variance_comparison({trepo, grpo}, uniform, trap.reward, 10000, {1, 2}, 2);
  double trepo_var[2], grpo_var[2];
  for (const VarianceRow& row : rows) {
    (row.estimator == "trepo-exact" ? trepo_var : grpo_var)[row.seed - 1] = row.total_variance;
  }
  for (int s = 0; s < 2; ++s) CHECK(trepo_var[s] < grpo_var[s]);
}

TEST_CASE("adding a per-context constant to the advantages leaves the mean unchanged") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  Vec oracle = exact_policy_gradient(uniform, fx.reward);
  EstimatorSpec spec;
  spec.name = "reinforce";
  RngStream rng(12);
  Vec c(static_cast<std::size_t>(fx.ctx->rows()));
  for (double& x : c) x = rng.uniform(-2.0, 2.0);
  spec.advantage_baseline = std::make_shared<const Vec>(std::move(c));
  EstimateStats stats = estimate_stats(spec, uniform, fx.reward, 100000, 13, 2);
  UnbiasednessReport report = unbiasedness_report(stats, oracle);
  CHECK(report.pass);
}

TEST_CASE("per-sample streams show no lag-1 autocorrelation") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  EstimatorSpec spec;
  spec.name = "reinforce";
  EstimatorRunContext ctx = make_run_context(spec, uniform, fx.reward);
  RngStream master(99);
  const int n = 10000;
  std::vector<double> series(n);
  for (int i = 0; i < n; ++i) {
    series[i] = one_estimate(spec, uniform, ctx, master.substream(i))[0];
  }
  double mean = 0.0;
  for (double x : series) mean += x / n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    den += (series[i] - mean) * (series[i] - mean);
    if (i + 1 < n) num += (series[i] - mean) * (series[i + 1] - mean);
  }
  CHECK(std::abs(num / den) < 0.02);
}

TEST_CASE("ppo estimator with the oracle critic is unbiased at the snapshot") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  Vec oracle = exact_policy_gradient(uniform, fx.reward);
  EstimatorSpec spec;
  spec.name = "ppo";
  spec.lambda = 1.0;
  EstimateStats stats = estimate_stats(spec, uniform, fx.reward, 100000, 21, 2);
  UnbiasednessReport report = unbiasedness_report(stats, oracle);
  CHECK(report.pass);
}

TEST_CASE("convergence run: zero learning rate flatlines, exact ascent is monotone") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  EstimatorSpec spec;
  spec.name = "reinforce";
  RunLog flat = convergence_run(spec, TrainConfig{20, 8, 0.0}, uniform, fx.reward, 4).log;
  for (const RunLogRow& row : flat.rows) CHECK_THAT(row.exact_j, WithinAbs(1.0, 1e-12));

  EstimatorSpec exact;
  exact.name = "exact";
  RunLog ascent = convergence_run(exact, TrainConfig{100, 1, 0.05}, uniform, fx.reward, 4).log;
  for (std::size_t i = 1; i < ascent.rows.size(); ++i) {
    CHECK(ascent.rows[i].exact_j >= ascent.rows[i - 1].exact_j - 1e-12);
  }
  CHECK(ascent.rows.back().exact_j > 1.2);
}

TEST_CASE("convergence runs for the remaining estimators improve the canonical objective") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  for (const char* name : {"grpo", "rloo", "remax", "ppo"}) {
    EstimatorSpec spec;
    spec.name = name;
    spec.group_k = 4;
    spec.optimization_num = 2;
    spec.critic_oracle = false;
    RunLog log = convergence_run(spec, TrainConfig{60, 16, 0.3}, uniform, fx.reward, 8).log;
    REQUIRE(log.rows.size() == 60);
    CHECK(log.rows.back().exact_j > 1.3);
  }
}

TEST_CASE("batch advantage normalization is off by default and flag-controlled") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  EstimatorSpec spec;
  spec.name = "reinforce";
  RunLog plain = convergence_run(spec, TrainConfig{5, 8, 0.1}, uniform, fx.reward, 15).log;
  spec.normalize_advantages = true;
  RunLog normalized = convergence_run(spec, TrainConfig{5, 8, 0.1}, uniform, fx.reward, 15).log;
  // Same sampled batches, different step scaling.
  CHECK(plain.rows.back().exact_j != normalized.rows.back().exact_j);
}

TEST_CASE("runlog csv is deterministic and excludes wall clock") {
  Fixture fx = make_fixture("canonical");
  TabularPolicy uniform = TabularPolicy::uniform(fx.ctx);
  EstimatorSpec spec;
  spec.name = "grpo";
  std::ostringstream a, b, timing;
  RunLog log_a = convergence_run(spec, TrainConfig{10, 8, 0.2}, uniform, fx.reward, 33).log;
  RunLog log_b = convergence_run(spec, TrainConfig{10, 8, 0.2}, uniform, fx.reward, 33).log;
  write_runlog_csv(log_a, a);
  write_runlog_csv(log_b, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().find("wall") == std::string::npos);
  write_timing_csv(log_a, timing);
  CHECK(timing.str().find("wall_time_s") != std::string::npos);
}
