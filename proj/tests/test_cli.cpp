#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <sys/wait.h>

#include "audit/config.hpp"
#include "audit/errors.hpp"
#include "audit/pipeline.hpp"

using namespace audit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / fmt::format("audit_test_cli_{}", ::getpid()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string value_of(const std::string& kv, const std::string& block, const std::string& key) {
  std::istringstream in(kv);
  std::string line, current;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '[') current = line.substr(1, line.size() - 2);
    else if (current == block && line.rfind(key + " = ", 0) == 0) return line.substr(key.size() + 3);
  }
  return {};
}

std::string symmetric_config(const fs::path& out, std::uint64_t seed = 5) {
  return fmt::format(R"([run]
analyses = simulate, benchmark
output_dir = {}
seed = {}

[benchmark]
columns = 1, 5
by_crime = false
heterogeneity = false

[dgp]
n_cases = 8000
n_judges = 40
n_courts = 8
n_years = 5
seed = {}
)",
                     out.string(), seed, seed);
}

#ifdef AUDIT_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("{} {} >/dev/null 2>&1", AUDIT_CLI_PATH, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_CASE("strict parsing and overrides") {
  const auto dir = scratch("parse");
  const auto cfg = write_file(dir / "a.ini", "[run]\nanalyses = kob\ninput = x.csv\nseed = 7\n[kob]\nbootstrap_replicates = 60\n");
  const auto c = load_config(cfg);
  CHECK(c.seed == 7);
  CHECK(c.kob_replicates == 60);
  CHECK(c.analyses == std::vector<std::string>{"kob"});

  const auto o = load_config(cfg, {"run.seed=9", "kob.bootstrap_replicates=80"});
  CHECK(o.seed == 9);
  CHECK(o.kob_replicates == 80);
  CHECK(o.hash() != c.hash());

  const auto t = load_config(cfg, {"run.threads=3"});
  CHECK(t.threads == 3);
  CHECK(t.hash() == c.hash());

  CHECK_THROWS_AS(load_config(write_file(dir / "b.ini", "[run]\nanalyses = kob\nflavour = 1\n")), ConfigError);
  CHECK_THROWS_AS(load_config(write_file(dir / "c.ini", "[nonsense]\nx = 1\n")), ConfigError);
  CHECK_THROWS_AS(load_config(cfg, {"kob.bootstrap_replicates=many"}), ConfigError);
  CHECK_THROWS_AS(load_config(cfg, {"kob.nothing=1"}), ConfigError);
  CHECK_THROWS_AS(load_config(cfg, {"run.analyses=benchmark,astrology"}), ConfigError);
  CHECK_THROWS_AS(load_config(write_file(dir / "d.ini", "[run]\nanalyses = kob\n[dgp]\nwobble = 2\n")), ConfigError);
}

TEST_CASE("scheduling adds prerequisites and rejects impossible ones") {
  auto c = parse_config({{"run.analyses", "oster"}, {"run.input", "x.csv"}});
  schedule_analyses(c);
  CHECK(c.analyses == std::vector<std::string>{"benchmark", "oster"});

  auto one = parse_config({{"run.analyses", "oster"}, {"run.input", "x.csv"}, {"benchmark.columns", "5"}});
  CHECK_THROWS_WITH_AS(schedule_analyses(one), doctest::Contains("oster requires benchmark columns"), ConfigError);

  auto sim = parse_config({{"run.analyses", "kob"}, {"dgp.n_cases", "1000"}});
  schedule_analyses(sim);
  CHECK(sim.analyses.front() == "simulate");

  auto nothing = parse_config({{"run.analyses", "kob"}});
  CHECK_THROWS_AS(schedule_analyses(nothing), ConfigError);

  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(DataError("x")) == 3);
  CHECK(exit_code_for(EstimationError("x")) == 4);
}

TEST_CASE("symmetric simulation shows no disparity and reruns byte for byte") {
  const auto dir = scratch("symmetric");
  const auto cfg_path = write_file(dir / "run.ini", symmetric_config(dir / "out"));
  const auto first = run_pipeline(load_config(cfg_path));
  CHECK(first.exit_code == kExitOk);
  const std::string kv = slurp(dir / "out" / "report.kv");
  const double alpha = std::stod(value_of(kv, "T2", "col5.alpha_d"));
  const double se = std::stod(value_of(kv, "T2", "col5.se"));
  CHECK(se > 0);
  CHECK(std::abs(alpha) < 3 * se);
  CHECK(value_of(kv, "meta", "config_hash").size() == 16);
  CHECK(fs::exists(dir / "out" / "report.txt"));
  CHECK(fs::exists(dir / "out" / "latent_truth.csv"));

  const auto second = run_pipeline(load_config(cfg_path, {"run.threads=2"}));
  CHECK(second.warnings.empty());
  CHECK(slurp(dir / "out" / "report.kv") == kv);

  const auto changed = run_pipeline(load_config(cfg_path, {"run.seed=6"}));
  REQUIRE(!changed.warnings.empty());
  CHECK(changed.warnings.front().find("different configuration") != std::string::npos);
}

TEST_CASE("a failing analysis leaves finished blocks intact") {
  const auto dir = scratch("partial");
  const auto cfg_path = write_file(dir / "run.ini", symmetric_config(dir / "out"));
  const auto good = run_pipeline(load_config(cfg_path));
  const std::string t2 = value_of(slurp(dir / "out" / "report.kv"), "T2", "col5.alpha_d");
  const auto bad = run_pipeline(
      load_config(cfg_path, {"run.analyses=simulate,benchmark,pbot", "pbot.marginal_share=0.0001", "pbot.diagnostics=false"}));
  CHECK(bad.exit_code == kExitEstimation);
  const std::string kv = slurp(dir / "out" / "report.kv");
  CHECK(value_of(kv, "T2", "col5.alpha_d") == t2);
  bool flagged = false;
  for (const auto& w : bad.warnings) flagged |= w.find("failed") != std::string::npos;
  CHECK(flagged);
  CHECK(good.exit_code == kExitOk);
}

#ifdef AUDIT_CLI_PATH
TEST_CASE("command line exit codes") {
  const auto dir = scratch("cli");
  const auto out = dir / "out";
  const auto ok = write_file(dir / "ok.ini", symmetric_config(out));
  CHECK(run_cli("validate " + ok.string()) == 0);
  CHECK(run_cli("run " + ok.string()) == 0);
  const std::string kv = slurp(out / "report.kv");
  CHECK(run_cli("run -j 2 " + ok.string()) == 0);
  CHECK(slurp(out / "report.kv") == kv);

  const auto oster = write_file(dir / "oster.ini", "[run]\nanalyses = oster\ninput = x.csv\n[benchmark]\ncolumns = 5\n");
  CHECK(run_cli("validate " + oster.string()) == 2);
  CHECK(run_cli("run " + oster.string()) == 2);
  CHECK(run_cli("run " + ok.string() + " --set run.colour=blue") == 2);
  CHECK(run_cli("frobnicate") == 2);

  const auto missing = write_file(dir / "missing.ini", fmt::format("[run]\nanalyses = benchmark\ninput = {}\n",
                                                                   (dir / "absent.csv").string()));
  CHECK(run_cli("run " + missing.string()) == 3);

  CHECK(run_cli("simulate " + ok.string() + " -o " + (dir / "sim").string()) == 0);
  CHECK(fs::exists(dir / "sim" / "simulated_records.csv"));
}
#endif
