#include <benchmark/benchmark.h>

#include <vector>

#include "audit/bootstrap.hpp"
#include "audit/estimation.hpp"
#include "audit/normal.hpp"
#include "audit/rank_stats.hpp"
#include "audit/rng.hpp"

using namespace audit;
using estimation::Design;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

struct Data {
  VectorXd y;
  Design X;
  std::vector<int> fe, cluster;
};

Data make_data(Index n, int levels) {
  CounterRng rng(1, 0);
  Data d{VectorXd(n), Design(n), std::vector<int>(static_cast<std::size_t>(n)), std::vector<int>(static_cast<std::size_t>(n))};
  Eigen::MatrixXd m(n, 5);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < 5; ++j) m(i, j) = rng.normal();
    d.fe[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
    d.cluster[static_cast<std::size_t>(i)] = d.fe[static_cast<std::size_t>(i)];
    d.y(i) = rng.uniform() < normal_cdf(0.2 + m.row(i).sum() * 0.3);
  }
  d.X.add_intercept();
  for (Index j = 0; j < 5; ++j) d.X.add("x" + std::to_string(j), m.col(j));
  return d;
}

void BM_OlsAbsorbed(benchmark::State& state) {
  const auto d = make_data(state.range(0), 200);
  const std::vector<std::vector<int>> keys{d.fe};
  const Design X = d.X.without_columns(std::vector<std::string>{"intercept"});
  estimation::OlsOptions o;
  o.covariance = estimation::CovarianceType::Cluster;
  for (auto _ : state) benchmark::DoNotOptimize(estimation::ols_fe(d.y, X, keys, d.cluster, o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OlsAbsorbed)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_Probit(benchmark::State& state) {
  const auto d = make_data(state.range(0), 10);
  for (auto _ : state) benchmark::DoNotOptimize(estimation::probit_fit(d.y, d.X));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Probit)->Arg(10'000)->Arg(100'000)->Unit(benchmark::kMillisecond);

void BM_KendallTauB(benchmark::State& state) {
  CounterRng rng(2, 0);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(rng.below(50)), y[i] = x[i] + rng.normal() * 10;
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau_b(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KendallTauB)->RangeMultiplier(4)->Range(1 << 10, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_BootstrapOlsSe(benchmark::State& state) {
  const auto d = make_data(20'000, 100);
  BootstrapOptions o;
  o.replicates = 50;
  o.threads = static_cast<unsigned>(state.range(0));
  const BootstrapStatistic stat = [&](std::span<const Index> rows) {
    VectorXd y(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Index>(i)) = d.y(rows[i]);
    return VectorXd(estimation::ols_fe(y, d.X.select_rows(rows)).coefficients);
  };
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap(d.y.size(), stat, o));
}
BENCHMARK(BM_BootstrapOlsSe)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
