#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace audit {

struct BootstrapOptions {
  int replicates = 500;
  std::uint64_t seed = 20240101;
  unsigned threads = 1;
  /// Share of failed replicates tolerated before the whole run is rejected.
  double max_failure_rate = 0.05;
  double ci_level = 0.95;
};

struct BootstrapResult {
  Eigen::VectorXd estimate;  ///< statistic on the original rows
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  /// Successful replicates in replicate order, one row each.
  Eigen::MatrixXd replicates;
  int failures = 0;
  std::vector<std::string> failure_log;
};

/// Statistic evaluated on a resample given as row indices into the data.
using BootstrapStatistic = std::function<Eigen::VectorXd(std::span<const Eigen::Index> rows)>;

/// Row indices of replicate `b`.  Rows are drawn with replacement; with a
/// cluster key, whole clusters are drawn and all their rows included.
std::vector<Eigen::Index> bootstrap_rows(Eigen::Index n_rows, std::uint64_t seed, std::uint64_t replicate,
                                         std::span<const int> cluster = {});

/// Nonparametric bootstrap.  Replicate b always draws from stream
/// (seed, b), so the result does not depend on the thread count.
BootstrapResult bootstrap(Eigen::Index n_rows, const BootstrapStatistic& statistic,
                          const BootstrapOptions& options, std::span<const int> cluster = {});

}  // namespace audit
