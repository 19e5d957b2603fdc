#include <doctest.h>

#include <cmath>
#include <sstream>

#include "audit/errors.hpp"
#include "audit/normal.hpp"
#include "audit/records.hpp"
#include "audit/synthdgp.hpp"
#include "support.hpp"

using namespace audit;
using namespace audit::dgp;

namespace {

// Latent risk reduces to Phi(X^u): no history, crime or noise terms.
DGPSpec unobs_only(std::size_t n, int judges) {
  DGPSpec s;
  s.n_cases = n;
  s.n_judges = judges;
  s.n_courts = 1;
  s.n_years = 2;
  s.coef_obs = {0, 0, 0, 0};
  s.coef_unobs = {1.0};
  s.intercept = 0.0;
  s.crime_risk_sd = 0.0;
  s.court_threshold_spread = 0.0;
  s.judge_threshold_spread = 0.0;
  return s;
}

std::string serialize(const CaseDataset& d) {
  std::ostringstream out;
  write_case_records(out, d.records);
  for (const auto& l : d.latent) out << l.y_star << ' ' << l.p << ' ' << l.d << ' ' << l.judge << '\n';
  return out.str();
}

}  // namespace

TEST_CASE("symmetric spec has no discrimination") {
  DGPSpec s = testing::small_spec(20'000, 5);
  const auto d = true_discrimination(s, 20'000);
  CHECK(d.d == 0.0);
  CHECK(d.se == 0.0);

  s.n_cases = 100'000;
  const auto data = generate(s);
  double r[2] = {0, 0}, n[2] = {0, 0};
  for (const auto& rec : data.records) {
    r[*rec.group_flag] += rec.released;
    n[*rec.group_flag] += 1;
  }
  CHECK(std::abs(r[1] / n[1] - r[0] / n[0]) < 0.02);
}

TEST_CASE("generation is deterministic and thread independent") {
  const DGPSpec s = testing::small_spec(5'000, 77);
  const auto a = serialize(generate(s, 1));
  CHECK(a == serialize(generate(s, 1)));
  CHECK(a == serialize(generate(s, 4)));
  DGPSpec other = s;
  other.seed = 78;
  CHECK(a != serialize(generate(other, 1)));
}

TEST_CASE("uniform risk and a single judge give D equal to the gap") {
  DGPSpec s = unobs_only(10'000, 1);
  s.threshold_gap_group1 = -0.05;
  const auto d = true_discrimination(s, 1'000'000);
  CHECK(std::abs(d.d + 0.05) < 3.0 * d.se);
}

TEST_CASE("two judges and a two-point risk support match exact enumeration") {
  DGPSpec s = unobs_only(10'000, 2);
  s.binary_unobs = true;
  s.coef_unobs = {-0.5};
  s.judge_threshold_spread = 0.1;
  s.threshold_gap_group1 = -0.05;
  const auto t = judge_thresholds(s);
  // p is Phi(0) or Phi(-0.5) with probability 1/2 each; judges 1/2 each.
  double exact = 0.0;
  for (const double p : {0.5, normal_cdf(-0.5)})
    for (const double tj : t) exact += 0.25 * (static_cast<int>(p <= tj + s.threshold_gap_group1) - static_cast<int>(p <= tj));
  const auto mc = true_discrimination(s, 400'000);
  CHECK(std::abs(mc.d - exact) < 3.0 * std::max(mc.se, 1e-12));
}

TEST_CASE("pointwise lower thresholds imply negative discrimination") {
  DGPSpec s = testing::small_spec(10'000, 8);
  s.threshold_gap_group1 = -0.03;
  s.no_priors_gap = -0.02;
  CHECK(true_discrimination(s, 50'000).d < 0.0);
}

TEST_CASE("counterfactual release flips exactly when risk crosses the threshold band") {
  DGPSpec s = testing::small_spec(20'000, 9);
  s.threshold_gap_group1 = -0.04;
  const auto data = generate(s);
  for (const auto& l : data.latent) {
    const bool in_band = l.p > l.threshold + s.threshold_gap_group1 && l.p <= l.threshold;
    CHECK(l.d == (in_band ? -1 : 0));
  }
}

TEST_CASE("misconduct is observed exactly on released cases") {
  DGPSpec s = testing::small_spec(20'000, 10);
  s.summons_rate = 0.02;
  const auto data = generate(s);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    CHECK(r.nonappearance.has_value() == (r.released == 1));
    CHECK(r.pretrial_recidivism.has_value() == (r.released == 1));
    const long li = data.latent_index[i];
    if (r.released && li >= 0) {
      const int observed = *r.nonappearance || *r.pretrial_recidivism;
      CHECK(observed == data.latent[static_cast<std::size_t>(li)].y_star);
    }
  }
}

TEST_CASE("uncorrelated unobservables") {
  DGPSpec s = testing::small_spec(100'000, 11);
  const auto data = generate(s);
  double sg = 0, su = 0, sgg = 0, suu = 0, sgu = 0;
  const double n = static_cast<double>(data.latent.size());
  for (const auto& l : data.latent) {
    sg += l.group;
    su += l.x_unobs;
    sgg += l.group * l.group;
    suu += l.x_unobs * l.x_unobs;
    sgu += l.group * l.x_unobs;
  }
  const double cov = sgu / n - sg / n * su / n;
  const double r = cov / std::sqrt((sgg / n - sg * sg / n / n) * (suu / n - su * su / n / n));
  CHECK(std::abs(r) < 0.02);

  s.corr_group_unobs = 0.4;
  s.n_cases = 50'000;
  const auto corr = generate(s);
  double a = 0, b = 0, na = 0, nb = 0;
  for (const auto& l : corr.latent) (l.group ? a : b) += l.x_unobs, (l.group ? na : nb) += 1;
  CHECK(a / na > b / nb);
}

TEST_CASE("thresholds outside the unit interval are rejected") {
  DGPSpec s = testing::small_spec(1'000, 12);
  s.threshold_base = 0.97;
  s.threshold_gap_group1 = 0.05;
  CHECK_THROWS_WITH_AS(generate(s), doctest::Contains("judge J"), ConfigError);
  s.threshold_gap_group1 = 0.0;
  s.share_group1 = 1.2;
  CHECK_THROWS_AS(generate(s), ConfigError);
}

TEST_CASE("key-value form round trips") {
  DGPSpec s = testing::small_spec(1'234, 99);
  s.threshold_gap_group1 = -0.0625;
  s.coef_unobs = {0.5, -0.25};
  s.link = Link::Logistic;
  DGPSpec back;
  apply_kv(back, to_kv(s));
  CHECK(to_kv(back) == to_kv(s));
  CHECK_THROWS_AS(apply_kv(back, {{"no_such_key", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_kv(back, {{"n_cases", "many"}}), ConfigError);
}

TEST_CASE("calibration hits the requested discrimination") {
  DGPSpec s = testing::small_spec(10'000, 13);
  const double gap = calibrate_threshold_gap(s, -0.03, 100'000);
  s.threshold_gap_group1 = gap;
  CHECK(gap < 0.0);
  CHECK(std::abs(true_discrimination(s, 100'000).d + 0.03) < 1e-3);
}
