#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end smoke tests against the built binary.

namespace fs = std::filesystem;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string out_file =
      (fs::temp_directory_path() / "pglab_cli_output.txt").string();
  const std::string command = std::string(PGLAB_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(command.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  result.output = ss.str();
  return result;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path make_temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("pglab_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("verify subcommand passes and writes a report") {
  fs::path out = make_temp_dir("verify");
  CommandResult result = run_cli("verify --suite lemma2 --out " + out.string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("PASS") != std::string::npos);
  CHECK(fs::exists(out / "lemma2_report.csv"));
}

TEST_CASE("verify with mutation is a failing negative control") {
  CommandResult result = run_cli("verify --suite theorem1 --mutate");
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("FAIL") != std::string::npos);
}

TEST_CASE("unknown suite names are rejected") {
  CommandResult result = run_cli("verify --suite lemma7");
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("unknown suite") != std::string::npos);
}

TEST_CASE("run subcommand emits byte-identical csv on rerun across job counts") {
  fs::path dir = make_temp_dir("run");
  const fs::path config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({
      "fixture": "canonical",
      "estimator": {"name": "grpo", "group_k": 4, "optimization_num": 2},
      "harness": {"batches": 12, "batch_size": 16, "learning_rate": 0.2, "seeds": [5]}
    })";
  }
  fs::path out_a = dir / "a", out_b = dir / "b";
  CommandResult a = run_cli("run --config " + config.string() + " --out " + out_a.string() + " --jobs 1");
  CommandResult b = run_cli("run --config " + config.string() + " --out " + out_b.string() + " --jobs 4");
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(out_a / "runlog.csv") == slurp(out_b / "runlog.csv"));
  CHECK(slurp(out_a / "config_hash.txt") == slurp(out_b / "config_hash.txt"));
  CHECK(slurp(out_a / "policy.txt") == slurp(out_b / "policy.txt"));
  CHECK(fs::exists(out_a / "runlog_timing.csv"));
  CHECK(fs::exists(out_a / "config.json"));
}

TEST_CASE("run in estimate mode writes stats and an unbiasedness report") {
  fs::path dir = make_temp_dir("estimate");
  const fs::path config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({
      "fixture": "canonical",
      "estimator": {"name": "corollary1"},
      "harness": {"mode": "estimate", "n_samples": 20000, "seeds": [2], "jobs": 2}
    })";
  }
  CommandResult result = run_cli("run --config " + config.string() + " --out " + (dir / "out").string());
  CHECK(result.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "stats.csv"));
  CHECK(fs::exists(dir / "out" / "unbiasedness.csv"));
  CHECK(result.output.find("PASS") != std::string::npos);
}

TEST_CASE("missing config fields produce a named diagnostic and nonzero exit") {
  fs::path dir = make_temp_dir("badconfig");
  const fs::path config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({"fixture": "canonical"})";
  }
  CommandResult result = run_cli("run --config " + config.string());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("estimator") != std::string::npos);
}

TEST_CASE("budget refusals surface verbatim") {
  fs::path dir = make_temp_dir("budget");
  const fs::path config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({
      "mdp": {"vocab_size": 6, "horizon": 10},
      "reward": {"kind": "count_token", "token": 0},
      "estimator": {"name": "reinforce"}
    })";
  }
  CommandResult result = run_cli("run --config " + config.string());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("enumeration refused") != std::string::npos);
  CHECK(result.output.find("budget") != std::string::npos);
}

TEST_CASE("PGLAB_OUT provides the default output root") {
  fs::path dir = make_temp_dir("envout");
  const fs::path config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({
      "fixture": "canonical",
      "estimator": {"name": "reinforce"},
      "harness": {"batches": 2, "batch_size": 4, "seeds": [1]}
    })";
  }
  const fs::path env_out = dir / "from_env";
  const std::string command = "PGLAB_OUT=" + env_out.string() + " " + PGLAB_CLI_PATH +
                              " run --config " + config.string() + " > /dev/null 2>&1";
  REQUIRE(std::system(command.c_str()) == 0);
  CHECK(fs::exists(env_out / "runlog.csv"));
}

TEST_CASE("compare subcommand reports the trap ordering") {
  fs::path dir = make_temp_dir("compare");
  const fs::path config = dir / "config.json";
  {
    std::ofstream out(config);
    out << R"({
      "fixture": "trap",
      "estimator": {"name": "grpo", "group_k": 4, "trepo": {"d_size": 2, "value_source": "exact"}},
      "harness": {"n_samples": 4000, "seeds": [1, 2], "jobs": 2}
    })";
  }
  CommandResult result = run_cli("compare --config " + config.string() + " --estimators trepo-exact,grpo --out " +
                                 (dir / "out").string());
  CHECK(result.exit_code == 0);
  const std::string csv = slurp(dir / "out" / "compare.csv");
  CHECK(csv.find("estimator,seed,metric,value") != std::string::npos);
  CHECK(csv.find("ordering,1") != std::string::npos);
  CHECK(result.output.find("PASS variance ordering") != std::string::npos);

  CommandResult empty = run_cli("compare --config " + config.string() + " --estimators");
  CHECK(empty.exit_code != 0);

  CommandResult single = run_cli("compare --config " + config.string() +
                                 " --estimators grpo --out " + (dir / "single").string());
  CHECK(single.exit_code == 0);
  const std::string single_csv = slurp(dir / "single" / "compare.csv");
  CHECK(single_csv.find("grpo,1,total_variance") != std::string::npos);
  CHECK(single_csv.find("ordering") == std::string::npos);
}
