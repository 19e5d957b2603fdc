// audit run|simulate|validate <config>

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "audit/config.hpp"
#include "audit/errors.hpp"
#include "audit/pipeline.hpp"
#include "audit/version.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string input;
  long long threads = 0;
  long long seed = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "INI configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override a setting, section.key=value (repeatable)");
  cmd->add_option("-o,--output-dir", c.output_dir, "Output directory (run.output_dir)");
  cmd->add_option("-i,--input", c.input, "Case-record CSV (run.input)");
  cmd->add_option("-j,--threads", c.threads, "Worker threads (run.threads; default from AUDIT_THREADS)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Base seed (run.seed)")->check(CLI::NonNegativeNumber);
}

audit::AuditConfig load(const Common& c) {
  auto ov = c.overrides;
  if (!c.output_dir.empty()) ov.push_back("run.output_dir=" + c.output_dir);
  if (!c.input.empty()) ov.push_back("run.input=" + c.input);
  if (c.threads > 0) ov.push_back("run.threads=" + std::to_string(c.threads));
  if (c.seed >= 0) ov.push_back("run.seed=" + std::to_string(c.seed));
  return audit::load_config(c.config, ov);
}

int finish(const audit::RunOutcome& out, const audit::AuditConfig& cfg) {
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "report written to " << (cfg.output_dir / "report.kv").string() << '\n';
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disparity audit toolkit for pretrial release decisions"};
  app.set_version_flag("--version", std::string(audit::kVersion));
  app.require_subcommand(1);

  Common run_opts, sim_opts, val_opts;
  auto* run = app.add_subcommand("run", "Run the configured analyses and write the report");
  add_common(run, run_opts);
  auto* sim = app.add_subcommand("simulate", "Generate synthetic case records from the [dgp] section");
  add_common(sim, sim_opts);
  auto* val = app.add_subcommand("validate", "Parse the configuration and check the analysis schedule");
  add_common(val, val_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : audit::kExitConfig;
  }

  try {
    if (*run) {
      const auto cfg = load(run_opts);
      return finish(audit::run_pipeline(cfg), cfg);
    }
    if (*sim) {
      const auto cfg = load(sim_opts);
      return finish(audit::simulate_only(cfg), cfg);
    }
    auto cfg = load(val_opts);
    audit::schedule_analyses(cfg);
    std::cout << "config ok, hash " << std::hex << cfg.hash() << std::dec << "\nanalyses:";
    for (const auto& a : cfg.analyses) std::cout << ' ' << a;
    std::cout << '\n';
    return audit::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return audit::exit_code_for(e);
  }
}
