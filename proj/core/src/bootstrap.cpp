#include "audit/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/estimation.hpp"
#include "audit/parallel.hpp"
#include "audit/rng.hpp"

namespace audit {

using Eigen::Index;
using Eigen::VectorXd;

std::vector<Index> bootstrap_rows(Index n_rows, std::uint64_t seed, std::uint64_t replicate,
                                  std::span<const int> cluster) {
  CounterRng rng(seed, make_stream(StreamTag::Bootstrap, replicate));
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(n_rows));
  if (cluster.empty()) {
    for (Index i = 0; i < n_rows; ++i) rows.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_rows))));
    return rows;
  }
  int groups = 0;
  const auto codes = estimation::dense_codes(cluster, &groups);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(groups));
  for (Index i = 0; i < n_rows; ++i) members[codes[i]].push_back(i);
  for (int g = 0; g < groups; ++g) {
    const auto& pick = members[rng.below(static_cast<std::uint64_t>(groups))];
    rows.insert(rows.end(), pick.begin(), pick.end());
  }
  return rows;
}

namespace {

// Linear interpolation between order statistics (the default sample quantile
// of most statistics packages).
double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

BootstrapResult bootstrap(Index n_rows, const BootstrapStatistic& statistic, const BootstrapOptions& options,
                          std::span<const int> cluster) {
  if (options.replicates < 50) throw ConfigError("bootstrap: at least 50 replicates are required");
  if (n_rows < 1) throw DataError("bootstrap: empty data");
  if (!cluster.empty() && static_cast<Index>(cluster.size()) != n_rows)
    throw ConfigError("bootstrap: cluster key length differs from data");

  std::vector<Index> all(static_cast<std::size_t>(n_rows));
  std::iota(all.begin(), all.end(), Index{0});
  BootstrapResult out;
  out.estimate = statistic(all);
  const Index p = out.estimate.size();

  const auto b_count = static_cast<std::size_t>(options.replicates);
  std::vector<VectorXd> draws(b_count);
  std::vector<std::string> errors(b_count);
  parallel_for(b_count, options.threads, [&](std::size_t b) {
    try {
      const auto rows = bootstrap_rows(n_rows, options.seed, b, cluster);
      VectorXd v = statistic(rows);
      if (v.size() != p || !v.allFinite()) throw EstimationError("non-finite or mis-sized statistic");
      draws[b] = std::move(v);
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });

  std::vector<std::size_t> ok;
  for (std::size_t b = 0; b < b_count; ++b) {
    if (errors[b].empty()) ok.push_back(b);
    else out.failure_log.push_back(fmt::format("replicate {}: {}", b, errors[b]));
  }
  out.failures = static_cast<int>(b_count - ok.size());
  if (static_cast<double>(out.failures) > options.max_failure_rate * static_cast<double>(b_count)) {
    std::string log;
    for (std::size_t i = 0; i < out.failure_log.size() && i < 10; ++i) log += "\n  " + out.failure_log[i];
    throw EstimationError(fmt::format("bootstrap: {} of {} replicates failed{}", out.failures, b_count, log));
  }

  const Index m = static_cast<Index>(ok.size());
  out.replicates.resize(m, p);
  for (Index r = 0; r < m; ++r) out.replicates.row(r) = draws[ok[r]].transpose();
  out.se.resize(p);
  out.ci_lower.resize(p);
  out.ci_upper.resize(p);
  const double alpha = 1.0 - options.ci_level;
  for (Index j = 0; j < p; ++j) {
    const VectorXd col = out.replicates.col(j);
    const double mean = col.mean();
    out.se(j) = m > 1 ? std::sqrt((col.array() - mean).square().sum() / static_cast<double>(m - 1)) : 0.0;
    std::vector<double> sorted(col.data(), col.data() + m);
    std::sort(sorted.begin(), sorted.end());
    out.ci_lower(j) = quantile_sorted(sorted, alpha / 2);
    out.ci_upper(j) = quantile_sorted(sorted, 1 - alpha / 2);
  }
  return out;
}

}  // namespace audit
