#include <doctest.h>

#include <cmath>

#include "audit/errors.hpp"
#include "audit/kob.hpp"
#include "audit/rng.hpp"
#include "support.hpp"

using namespace audit;
using namespace audit::kob;

namespace {

struct Toy {
  VectorXd y, group;
  estimation::Design X;
};

Toy random_toy(CounterRng& rng, Index n, Index k) {
  Toy t{VectorXd(n), VectorXd(n), estimation::Design(n)};
  const Eigen::MatrixXd m = testing::normal_matrix(rng, n, k);
  for (Index j = 0; j < k; ++j) t.X.add("x" + std::to_string(j), m.col(j));
  for (Index i = 0; i < n; ++i) {
    t.group(i) = i % 3 == 0 ? 1.0 : 0.0;
    t.y(i) = 0.4 * t.group(i) + m.row(i).sum() * (t.group(i) == 1 ? 0.7 : 0.3) + rng.normal();
  }
  return t;
}

double group_mean(const VectorXd& v, const VectorXd& g, double which) {
  double s = 0, n = 0;
  for (Index i = 0; i < v.size(); ++i)
    if (g(i) == which) s += v(i), n += 1;
  return s / n;
}

KOBResult made(double explained, double unexplained, Residualize r = Residualize::None) {
  KOBResult k;
  k.explained = explained;
  k.unexplained = unexplained;
  k.total_gap = explained + unexplained;
  k.residualized = r;
  return k;
}

}  // namespace

TEST_CASE("components add up to the raw gap on random samples") {
  CounterRng rng(61, 0);
  for (int t = 0; t < 100; ++t) {
    const Index n = 60 + static_cast<Index>(rng.below(200));
    const Index k = 1 + static_cast<Index>(rng.below(5));
    const auto toy = random_toy(rng, n, k);
    for (bool swap : {false, true}) {
      const auto r = kob_decompose(toy.y, toy.X, toy.group, swap);
      CHECK(std::abs(r.explained + r.unexplained - r.total_gap) < 1e-10);
      const double raw = group_mean(toy.y, toy.group, 1) - group_mean(toy.y, toy.group, 0);
      CHECK(std::abs(r.total_gap - raw) < 1e-10);
    }
  }
}

TEST_CASE("components match an independent per-group least squares") {
  CounterRng rng(62, 0);
  const auto toy = random_toy(rng, 300, 3);
  Eigen::MatrixXd A[2];
  VectorXd b[2], m[2];
  for (int g = 0; g < 2; ++g) {
    std::vector<Index> rows;
    for (Index i = 0; i < toy.y.size(); ++i)
      if (toy.group(i) == g) rows.push_back(i);
    A[g].resize(static_cast<Index>(rows.size()), 4);
    VectorXd yg(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      A[g](static_cast<Index>(i), 0) = 1.0;
      A[g].block(static_cast<Index>(i), 1, 1, 3) = toy.X.matrix.row(rows[i]);
      yg(static_cast<Index>(i)) = toy.y(rows[i]);
    }
    b[g] = (A[g].transpose() * A[g]).ldlt().solve(A[g].transpose() * yg);
    m[g] = A[g].colwise().mean().transpose();
  }
  const auto r = kob_decompose(toy.y, toy.X, toy.group);
  CHECK(r.explained == doctest::Approx((m[1] - m[0]).dot(b[1])).epsilon(1e-10));
  CHECK(r.unexplained == doctest::Approx(m[0].dot(b[1] - b[0])).epsilon(1e-10));
  const auto s = kob_decompose(toy.y, toy.X, toy.group, true);
  CHECK(s.explained == doctest::Approx((m[1] - m[0]).dot(b[0])).epsilon(1e-10));
  CHECK(s.unexplained == doctest::Approx(m[1].dot(b[1] - b[0])).epsilon(1e-10));
  CHECK(s.total_gap == doctest::Approx(r.total_gap).epsilon(1e-12));
  CHECK(s.explained != doctest::Approx(r.explained));
  CHECK(r.n_group1 == 100);
  CHECK(r.names.front() == "intercept");
}

TEST_CASE("equal coefficients leave nothing unexplained") {
  CounterRng rng(63, 0);
  for (int t = 0; t < 20; ++t) {
    const Index n = 150;
    estimation::Design X(n);
    const Eigen::MatrixXd m = testing::normal_matrix(rng, n, 3);
    VectorXd g(n), y(n);
    for (Index i = 0; i < n; ++i) g(i) = rng.uniform() < 0.4;
    for (Index j = 0; j < 3; ++j) X.add("x" + std::to_string(j), m.col(j) + g * (0.5 + static_cast<double>(j)));
    for (Index i = 0; i < n; ++i) y(i) = 0.2 + X.matrix.row(i).dot(Eigen::Vector3d(1.0, -0.5, 2.0));
    const auto r = kob_decompose(y, X, g);
    CHECK(std::abs(r.unexplained) < 1e-10);
    CHECK(r.explained == doctest::Approx(r.total_gap).epsilon(1e-10));
  }
}

TEST_CASE("equal means leave nothing explained") {
  CounterRng rng(64, 0);
  const Index half = 120;
  const Eigen::MatrixXd m = testing::normal_matrix(rng, half, 2);
  estimation::Design X(2 * half);
  Eigen::MatrixXd both(2 * half, 2);
  both << m, m.colwise().reverse();
  X.add("a", both.col(0));
  X.add("b", both.col(1));
  VectorXd g(2 * half), y(2 * half);
  for (Index i = 0; i < 2 * half; ++i) {
    g(i) = i >= half;
    y(i) = both(i, 0) * (g(i) == 1 ? 1.5 : 0.5) + 0.3 * g(i) + rng.normal();
  }
  const auto r = kob_decompose(y, X, g);
  CHECK(std::abs(r.explained) < 1e-10);
  CHECK(r.unexplained == doctest::Approx(r.total_gap).epsilon(1e-10));
}

TEST_CASE("group-specific rank deficiency names the group and the column") {
  CounterRng rng(65, 0);
  const Index n = 80;
  estimation::Design X(n);
  VectorXd g(n), y(n), d(n), x(n);
  for (Index i = 0; i < n; ++i) {
    g(i) = i < 30;
    d(i) = g(i) == 1 ? 0.0 : static_cast<double>(rng.uniform() < 0.5);
    x(i) = rng.normal();
    y(i) = rng.normal();
  }
  X.add("x", x);
  X.add("flag", d);
  CHECK_THROWS_WITH_AS(kob_decompose(y, X, g), doctest::Contains("group 1"), RankDeficiencyError);
  try {
    kob_decompose(y, X, g);
  } catch (const RankDeficiencyError& e) {
    CHECK(std::string(e.what()).find("flag") != std::string::npos);
  }
  CHECK_THROWS_AS(kob_decompose(y, X, VectorXd::Zero(n)), DataError);
}

TEST_CASE("sample decompositions") {
  auto spec = testing::small_spec(8'000, 66);
  spec.threshold_gap_group1 = -0.05;
  spec.history_scale_group1 = 0.5;
  const auto s = testing::sample_from(spec);
  KobOptions o;
  o.bootstrap_se = false;
  for (auto res : {Residualize::None, Residualize::Pooled, Residualize::GroupWise}) {
    o.residualize = res;
    const auto rel = kob::kob(s, KobOutcome::Release, o);
    const auto mis = kob::kob(s, KobOutcome::Misconduct, o);
    CHECK(std::abs(rel.explained + rel.unexplained - rel.total_gap) < 1e-10);
    CHECK(std::abs(mis.explained + mis.unexplained - mis.total_gap) < 1e-10);
    CHECK(rel.n_group0 + rel.n_group1 == s.rows());
    CHECK(mis.n_group0 + mis.n_group1 == static_cast<Index>(s.release.sum()));
    CHECK(rel.residualized == res);
    if (res == Residualize::None) {
      CHECK(rel.total_gap == doctest::Approx(group_mean(s.release, s.group, 1) - group_mean(s.release, s.group, 0)));
      CHECK(std::isnan(rel.se_total));
    }
  }
  o.residualize = Residualize::None;
  o.bootstrap_se = true;
  o.bootstrap.replicates = 50;
  const auto a = kob::kob(s, KobOutcome::Release, o);
  CHECK(a.se_total > 0);
  CHECK(a.se_explained > 0);
  CHECK(a.se_unexplained > 0);
  const auto b = kob::kob(s, KobOutcome::Release, o);
  CHECK(a.se_total == b.se_total);
}

TEST_CASE("reference release decomposition adds up to rounding") {
  CHECK(std::abs(-0.036 + 0.103 - 0.067) < 1e-12);
  CHECK(std::abs(0.065 - 0.014 - 0.050) <= 0.0015);
}

TEST_CASE("interpretation of the two decompositions") {
  const auto detected = kob_interpretation(made(-0.036, 0.103), made(0.076, -0.001));
  CHECK(detected.pattern == KobPattern::Detected);
  CHECK(detected.verdict.rfind("pattern-detected", 0) == 0);
  CHECK(detected.release_unexplained_share == doctest::Approx(0.103 / 0.139));
  CHECK(!detected.note.empty());

  const auto both = kob_interpretation(made(-0.02, 0.10), made(0.01, 0.08));
  CHECK(both.pattern == KobPattern::NotDetected);
  CHECK(both.verdict.find("OVB warning") != std::string::npos);

  const auto flat = kob_interpretation(made(0, 0), made(0, 0));
  CHECK(flat.pattern == KobPattern::Indeterminate);

  CHECK_THROWS_AS(kob_interpretation(made(0.1, 0.1), made(0.1, 0.1, Residualize::Pooled)), ConfigError);
}
