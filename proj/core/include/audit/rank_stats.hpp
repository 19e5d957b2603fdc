#pragma once

#include <span>
#include <vector>

namespace audit {

/// Ranks 1..n with tied values sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);

double spearman_rho(std::span<const double> x, std::span<const double> y);
/// Kendall tau-b in O(n log n) (sort plus merge-count of discordant pairs).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
/// Same statistic by enumerating all pairs.
double kendall_tau_b_bruteforce(std::span<const double> x, std::span<const double> y);

struct RankCorrelation {
  double spearman = 0.0;
  double kendall = 0.0;
};

/// Both statistics; throws EstimationError when either input is constant.
RankCorrelation rank_correlations(std::span<const double> x, std::span<const double> y);

}  // namespace audit
