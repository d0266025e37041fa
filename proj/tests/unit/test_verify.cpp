#include "pglab/verify.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <sstream>

using namespace pglab;

TEST_CASE("every suite passes on a fresh tree") {
  for (const std::string& name : suite_names()) {
    SuiteReport report = name == "corollary1" ? run_corollary1_suite(1, false, 2, 20000)
                                              : run_suite(name, 1, 2, false);
    INFO("suite " << name);
    for (const CheckResult& check : report.checks) {
      INFO(check.name << ": " << check.detail);
      CHECK(check.pass);
    }
  }
}

TEST_CASE("mutated negative controls fail") {
  for (const std::string& name :
       {std::string("lemma2"), std::string("theorem1"), std::string("theorem2"),
        std::string("gamma-remark"), std::string("main-theorem"), std::string("gae-endpoints")}) {
    SuiteReport report = run_suite(name, 1, 1, true);
    INFO("suite " << name);
    CHECK_FALSE(report.pass);
    CHECK(report.mutated);
  }
  SuiteReport corollary = run_corollary1_suite(1, true, 2, 5000);
  bool pass = true;
  for (const CheckResult& check : corollary.checks) pass = pass && check.pass;
  CHECK_FALSE(pass);
}

TEST_CASE("lemma1 has no mutation mode and unknown suites are rejected") {
  CHECK_THROWS_WITH(run_suite("lemma1", 1, 1, true),
                    Catch::Matchers::ContainsSubstring("not defined"));
  CHECK_THROWS_WITH(run_suite("lemma9", 1, 1, false),
                    Catch::Matchers::ContainsSubstring("unknown suite"));
}

TEST_CASE("reports render as text and csv") {
  SuiteReport report = run_suite("lemma2", 1, 1, false);
  std::ostringstream human, csv;
  print_report(report, human);
  CHECK(human.str().find("PASS") != std::string::npos);
  write_report_csv(report, csv);
  CHECK(csv.str().find("suite,check,pass,detail") != std::string::npos);
  CHECK(csv.str().find("lemma2,") != std::string::npos);
}

TEST_CASE("suite results are deterministic in the seed") {
  SuiteReport a = run_suite("theorem1", 5, 1, false);
  SuiteReport b = run_suite("theorem1", 5, 1, false);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].detail == b.checks[i].detail);
  }
}
