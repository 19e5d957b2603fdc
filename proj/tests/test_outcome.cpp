#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "audit/errors.hpp"
#include "audit/normal.hpp"
#include "audit/outcome_test.hpp"
#include "audit/rank_stats.hpp"
#include "audit/rng.hpp"
#include "support.hpp"

using namespace audit;
using namespace audit::outcome;

namespace {

// Pair counting with the tau-b tie correction, written out independently.
double tau_b_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  long long c = 0, d = 0, only_x = 0, only_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const int sx = (x[i] > x[j]) - (x[i] < x[j]);
      const int sy = (y[i] > y[j]) - (y[i] < y[j]);
      if (sx == 0 && sy == 0) continue;
      if (sx == 0) ++only_x;
      else if (sy == 0) ++only_y;
      else (sx == sy ? c : d) += 1;
    }
  return static_cast<double>(c - d) /
         std::sqrt(static_cast<double>(c + d + only_x) * static_cast<double>(c + d + only_y));
}

// Rank = #smaller + (#equal + 1) / 2, then Pearson.
double spearman_counting(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, eq = 0;
      for (double w : v) less += w < v[i], eq += w == v[i];
      r[i] = less + (eq + 1) / 2;
    }
    return r;
  };
  const auto a = ranks(x), b = ranks(y);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sab += (a[i] - ma) * (b[i] - mb), saa += (a[i] - ma) * (a[i] - ma), sbb += (b[i] - mb) * (b[i] - mb);
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> tied_draws(CounterRng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels)));
  return v;
}

double mean_where(const VectorXd& v, const std::vector<Index>& rows, const VectorXd& g, double which) {
  double s = 0, n = 0;
  for (Index i : rows)
    if (g(i) == which) s += v(i), n += 1;
  return s / n;
}

}  // namespace

TEST_CASE("rank correlations on identical and reversed orderings") {
  const std::vector<double> x{1, 2, 3}, up{1, 2, 3}, down{3, 2, 1};
  const auto same = rank_correlations(x, up);
  CHECK(same.spearman == doctest::Approx(1.0));
  CHECK(same.kendall == doctest::Approx(1.0));
  const auto rev = rank_correlations(x, down);
  CHECK(rev.spearman == doctest::Approx(-1.0));
  CHECK(rev.kendall == doctest::Approx(-1.0));

  CounterRng rng(71, 0);
  for (int t = 0; t < 20; ++t) {
    auto v = tied_draws(rng, 30 + rng.below(50), 7);
    v[0] = -1;  // never constant
    std::vector<double> r(v.rbegin(), v.rend()), neg(v.size());
    std::transform(v.begin(), v.end(), neg.begin(), [](double a) { return -a; });
    CHECK(spearman_rho(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kendall_tau_b(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman_rho(v, neg) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(kendall_tau_b(v, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("fast kendall equals pair enumeration exactly on tied data") {
  CounterRng rng(72, 0);
  int done = 0;
  while (done < 200) {
    const std::size_t n = 2 + rng.below(199);
    const auto x = tied_draws(rng, n, 2 + static_cast<int>(rng.below(10)));
    const auto y = tied_draws(rng, n, 2 + static_cast<int>(rng.below(10)));
    if (std::all_of(x.begin(), x.end(), [&](double a) { return a == x[0]; }) ||
        std::all_of(y.begin(), y.end(), [&](double a) { return a == y[0]; }))
      continue;
    ++done;
    const double oracle = tau_b_pairs(x, y);
    CHECK(kendall_tau_b(x, y) == oracle);
    CHECK(kendall_tau_b_bruteforce(x, y) == oracle);
    CHECK(spearman_rho(x, y) == doctest::Approx(spearman_counting(x, y)).epsilon(1e-12));
    CHECK(std::abs(oracle) <= 1.0);
  }
}

TEST_CASE("rank correlation errors and average ranks") {
  const std::vector<double> c{2, 2, 2}, v{1, 2, 3};
  CHECK_THROWS_AS(rank_correlations(c, v), EstimationError);
  CHECK_THROWS_AS(rank_correlations(v, std::vector<double>{1, 2}), ConfigError);
  CHECK_THROWS_AS(rank_correlations(std::vector<double>{1}, std::vector<double>{1}), ConfigError);
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("marginal rows follow the ranking only") {
  CounterRng rng(73, 0);
  const Index n = 1'000;
  VectorXd score(n);
  std::vector<Index> released;
  for (Index i = 0; i < n; ++i) {
    score(i) = rng.normal();
    if (rng.uniform() < 0.6) released.push_back(i);
  }
  const auto m = marginal_rows(score, released, 0.1);
  CHECK(m.size() == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(released.size()))));
  // Enumeration: a released row is marginal iff fewer than |m| released rows score below it.
  const std::set<Index> in(m.begin(), m.end());
  for (Index i : released) {
    const auto below = std::count_if(released.begin(), released.end(), [&](Index j) { return score(j) < score(i); });
    CHECK((static_cast<std::size_t>(below) < m.size()) == in.contains(i));
  }
  const VectorXd cubed = score.array().cube() * 3.0 + 7.0;
  const VectorXd squashed = score.unaryExpr([](double z) { return normal_cdf(z); });
  CHECK(marginal_rows(cubed, released, 0.1) == m);
  CHECK(marginal_rows(squashed, released, 0.1) == m);
  CHECK(marginal_rows(score, released, 1.0).size() == released.size());
  CHECK_THROWS_AS(marginal_rows(score, released, 0.0), ConfigError);
  CHECK_THROWS_AS(marginal_rows(score, released, 1.5), ConfigError);
}

TEST_CASE("ties at the cutoff are admitted in row order") {
  const VectorXd score = (VectorXd(8) << 0.3, 0.1, 0.2, 0.2, 0.2, 0.9, 0.2, 0.5).finished();
  const std::vector<Index> released{7, 6, 5, 4, 3, 2, 1, 0};
  CHECK(marginal_rows(score, released, 0.375) == std::vector<Index>{1, 2, 3});
  CHECK(marginal_rows(score, released, 0.5) == std::vector<Index>{1, 2, 3, 4});
}

TEST_CASE("a single-covariate probit ranks by that covariate") {
  CounterRng rng(74, 0);
  const Index n = 5'000;
  VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x(i) = rng.normal();
    y(i) = rng.uniform() < normal_cdf(0.3 + 0.8 * x(i));
  }
  estimation::Design d(n);
  d.add_intercept();
  d.add("x", x);
  const auto fit = estimation::probit_fit(y, d);
  std::vector<Index> released;
  for (Index i = 0; i < n; ++i)
    if (y(i) == 1.0) released.push_back(i);
  std::vector<Index> by_x = released;
  std::sort(by_x.begin(), by_x.end(), [&](Index a, Index b) { return x(a) < x(b); });
  by_x.resize(static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(released.size()))));
  CHECK(marginal_rows(fit.linear_index, released, 0.1) == by_x);
}

TEST_CASE("kpt on a symmetric sample and share one") {
  const auto s = testing::sample_from(testing::small_spec(20'000, 75));
  const auto k = kpt_test(s);
  const auto released = s.released_rows();
  CHECK(k.gap == doctest::Approx(mean_where(s.misconduct, released, s.group, 1) -
                                 mean_where(s.misconduct, released, s.group, 0))
                     .epsilon(1e-12));
  CHECK(std::abs(k.gap) < 3 * k.se);
  CHECK(k.n_group0 + k.n_group1 == static_cast<Index>(released.size()));

  PbotOptions o;
  o.marginal_share = 1.0;
  o.bootstrap_se = false;
  const auto p = pbot(s, o);
  CHECK(std::abs(p.diff_in_means - k.gap) < 1e-12);
  CHECK(p.marginal_mean_misconduct == doctest::Approx(p.released_mean_misconduct).epsilon(1e-12));
  CHECK(std::isnan(p.bootstrap_se));

  auto none = s;
  for (Index i = 0; i < none.rows(); ++i)
    if (none.group(i) == 1.0) none.release(i) = 0.0;
  CHECK_THROWS_AS(kpt_test(none), DataError);
}

TEST_CASE("marginal set bookkeeping") {
  auto spec = testing::small_spec(20'000, 76);
  spec.threshold_gap_group1 = -0.05;
  const auto s = testing::sample_from(spec);
  PbotOptions o;
  o.bootstrap_se = false;
  const auto p = pbot(s, o);
  const auto released = s.released_rows();
  CHECK(p.marginal_row_ids.size() == static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(released.size()))));
  for (Index i : p.marginal_row_ids) CHECK(s.release(i) == 1.0);
  CHECK(p.n_marginal_group0 + p.n_marginal_group1 == static_cast<Index>(p.marginal_row_ids.size()));
  CHECK(p.diff_in_means == doctest::Approx(mean_where(s.misconduct, p.marginal_row_ids, s.group, 1) -
                                           mean_where(s.misconduct, p.marginal_row_ids, s.group, 0))
                               .epsilon(1e-12));
  double highest = 0;
  for (Index i : p.marginal_row_ids) highest = std::max(highest, p.propensity(i));
  CHECK(p.cutoff == doctest::Approx(highest).epsilon(1e-12));
  // Marginal released rows are riskier than released rows overall.
  CHECK(p.marginal_mean_misconduct > p.released_mean_misconduct);

  const auto h = propensity_histogram(s, p.propensity);
  CHECK(h.edges.size() == 21);
  CHECK(h.cutoff_p10 <= h.upper_p20);
  const double mass0 = std::accumulate(h.group0.begin(), h.group0.end(), 0.0);
  CHECK(mass0 > 0.1);
  CHECK(mass0 < 0.3);

  o.marginal_share = 0.0005;
  CHECK_THROWS_WITH_AS(pbot(s, o), doctest::Contains("larger marginal share"), EstimationError);
}

TEST_CASE("kpt and pbot agree in sign under a planted threshold gap") {
  auto spec = testing::small_spec(40'000, 77);
  spec.threshold_gap_group1 = -0.1;
  const auto s = testing::sample_from(spec);
  const auto k = kpt_test(s);
  PbotOptions o;
  o.bootstrap_se = false;
  const auto p = pbot(s, o);
  CHECK(k.gap < 0);
  CHECK(p.diff_in_means < 0);
  CHECK(std::abs(p.diff_in_means - k.gap) > 1e-3);
}

TEST_CASE("pbot bootstrap is reproducible") {
  auto spec = testing::small_spec(8'000, 78);
  spec.threshold_gap_group1 = -0.05;
  const auto s = testing::sample_from(spec);
  PbotOptions o;
  o.marginal_share = 0.2;
  o.bootstrap.replicates = 50;
  const auto a = pbot(s, o);
  o.bootstrap.threads = 3;
  const auto b = pbot(s, o);
  CHECK(a.bootstrap_se > 0);
  CHECK(a.bootstrap_se == b.bootstrap_se);
}

TEST_CASE("monotonicity on a homogeneous sample") {
  const auto s = testing::sample_from(testing::small_spec(40'000, 79));
  const auto parts = default_partitions(s);
  CHECK(parts.size() == 8);
  for (const auto& p : parts) CHECK(p.low.size() + p.high.size() == static_cast<std::size_t>(s.rows()));
  const auto t = monotonicity_check(s, MonotonicityOutcome::Release, parts);
  CHECK(t.cells.size() == 16);
  CHECK(t.predictors == monotonicity_predictors());
  // Signs of clearly nonzero full-sample effects never flip; null effects may.
  int strong = 0;
  for (std::size_t k = 0; k < t.predictors.size(); ++k) {
    if (!t.full.identified[k] || std::abs(t.full.coef[k]) < 4 * t.full.se[k]) continue;
    ++strong;
    for (const auto& c : t.cells)
      if (!c.empty) CHECK(!c.sign_mismatch[k]);
  }
  CHECK(strong >= 3);
  CHECK(t.mismatches <= 2 * (static_cast<int>(t.predictors.size()) - strong) * 8);
  const auto m = monotonicity_check(s, MonotonicityOutcome::Misconduct, parts);
  for (const auto& c : m.cells) CHECK(c.n <= static_cast<Index>(s.release.sum()));
}

TEST_CASE("a sign flip in one subgroup is flagged") {
  auto s = testing::sample_from(testing::small_spec(30'000, 80));
  CounterRng rng(81, 0);
  SamplePartition p{"flipped", "rest", {}, {}};
  for (Index i = 0; i < s.rows(); ++i) {
    const bool flip = rng.uniform() < 0.3;
    (flip ? p.low : p.high).push_back(i);
    const double slope = flip ? -0.3 : 0.3;
    s.release(i) = rng.uniform() < 0.55 + slope * (s.severity_current(i) - 0.5);
  }
  const auto t = monotonicity_check(s, MonotonicityOutcome::Release, {p});
  const auto k = static_cast<std::size_t>(
      std::find(t.predictors.begin(), t.predictors.end(), "severity_current") - t.predictors.begin());
  REQUIRE(t.full.identified[k]);
  CHECK(t.full.coef[k] > 0);
  CHECK(t.cells[0].sign_mismatch[k]);
  CHECK(!t.cells[1].sign_mismatch[k]);
  CHECK(t.mismatches >= 1);

  SamplePartition empty{"none", "all", {}, s.all_rows()};
  const auto e = monotonicity_check(s, MonotonicityOutcome::Release, {empty});
  CHECK(e.cells[0].empty);
  CHECK(!e.cells[1].empty);
}

TEST_CASE("an orthogonal noise predictor leaves the ranking intact") {
  CounterRng rng(82, 0);
  const Index n = 40'000;
  estimation::Design X(n);
  const Eigen::MatrixXd z = testing::normal_matrix(rng, n, 4);
  VectorXd idx = VectorXd::Constant(n, 0.4);
  const double beta[] = {0.6, -0.5, 0.4, 0.3};
  for (Index j = 0; j < 4; ++j) {
    const VectorXd col = j < 2 ? VectorXd((z.col(j).array() > 0).cast<double>()) : VectorXd(z.col(j));
    X.add("x" + std::to_string(j), col);
    idx += beta[j] * col;
  }
  X.add("noise", VectorXd((testing::normals(rng, n).array() > 0).cast<double>()));
  VectorXd release(n);
  std::vector<int> year(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    release(i) = rng.uniform() < normal_cdf(idx(i));
    year[static_cast<std::size_t>(i)] = 2010 + static_cast<int>(rng.below(3));
  }
  const auto t = rank_validity(release, X, year);
  REQUIRE(t.rows.size() == 5);
  for (const auto& r : t.rows) {
    for (double v : {r.marginal_share.spearman, r.marginal_share.kendall, r.propensity.spearman, r.propensity.kendall}) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.n_cells >= 2);
  }
  const auto& noise = t.rows.back();
  CHECK(noise.excluded == "noise");
  CHECK(noise.marginal_share.spearman > 0.95);
  CHECK(noise.marginal_share.kendall > 0.95);
  CHECK(noise.propensity.spearman < 0);

  X.add("flat", VectorXd::Ones(n));
  CHECK_THROWS_AS(rank_validity(release, X, year), DataError);
}

TEST_CASE("sample rank validity skips predictors without a split") {
  auto spec = testing::small_spec(20'000, 83);
  spec.threshold_gap_group1 = -0.05;
  const auto s = testing::sample_from(spec);
  const auto t = rank_validity(s);
  CHECK(t.rows.size() + t.skipped.size() == rank_validity_predictors().size());
  for (const auto& r : t.rows) {
    CHECK(std::abs(r.marginal_share.spearman) <= 1.0);
    CHECK(std::abs(r.propensity.kendall) <= 1.0);
  }
  RankValidityOptions o;
  o.threads = 4;
  const auto u = rank_validity(s, o);
  REQUIRE(u.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(u.rows[i].marginal_share.kendall == t.rows[i].marginal_share.kendall);
}
