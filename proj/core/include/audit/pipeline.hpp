#pragma once

#include <exception>
#include <string>
#include <vector>

#include "audit/config.hpp"
#include "audit/records.hpp"
#include "audit/report.hpp"

namespace audit {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitEstimation = 4 };

/// Exit code for an exception: config 2, data 3, estimation (and other) 4.
int exit_code_for(const std::exception& e);

struct RunOutcome {
  int exit_code = kExitOk;
  AuditReport report;
  /// Messages for stderr (rerun detection, partial failures); not part of the report.
  std::vector<std::string> warnings;
};

/// Runs the scheduled analyses and writes report.kv and report.txt into the
/// output directory.  Analysis failures are recorded in their blocks; the
/// remaining analyses still run.  Configuration and input errors throw.
RunOutcome run_pipeline(AuditConfig config);

/// Generates synthetic records only and writes them with the latent truth.
RunOutcome simulate_only(AuditConfig config);

}  // namespace audit
