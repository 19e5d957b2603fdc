#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "audit/errors.hpp"
#include "audit/ingest.hpp"
#include "audit/records.hpp"
#include "audit/rng.hpp"
#include "audit/synthdgp.hpp"
#include "support.hpp"

using namespace audit;
using namespace audit::ingest;

namespace {

Date day(int y, unsigned m, unsigned d) { return Date::from_ymd(y, m, d); }

CaseRecord record(std::string case_id, std::string defendant, Date hearing, Date end, int released,
                  std::string type = "T1") {
  CaseRecord r;
  r.case_id = std::move(case_id);
  r.defendant_id = std::move(defendant);
  r.judge_id = "J1";
  r.attorney_id = "A1";
  r.court_id = "C1";
  r.hearing_date = hearing;
  r.case_end_date = end;
  r.crime_type_code = std::move(type);
  r.crime_category = 3;
  r.group_flag = 0;
  r.released = released;
  if (released) {
    r.nonappearance = 0;
    r.pretrial_recidivism = 0;
  }
  return r;
}

RestrictionRules relaxed() {
  RestrictionRules r;
  r.min_judge_cases = 0;
  r.min_attorney_prior_cases = 0;
  return r;
}

// Residualized leave-out computed straight from its definition.
VectorXd brute_leave_out(const VectorXd& release, const std::vector<int>& cy, const std::vector<int>& key) {
  const Index n = release.size();
  VectorXd out(n);
  for (Index i = 0; i < n; ++i) {
    double sum = 0, cnt = 0;
    for (Index k = 0; k < n; ++k) {
      if (k == i || key[k] != key[i]) continue;
      double s = 0, c = 0;
      for (Index l = 0; l < n; ++l)
        if (l != i && cy[l] == cy[k]) s += release(l), c += 1;
      sum += release(k) - s / c;
      cnt += 1;
    }
    out(i) = sum / cnt;
  }
  return out;
}

EstimationSample leave_out_fixture(std::uint64_t seed, Index n) {
  CounterRng rng(seed, 0);
  EstimationSample s;
  s.release.resize(n);
  for (Index i = 0; i < n; ++i) {
    s.release(i) = rng.uniform() < 0.6;
    s.court_year.push_back(static_cast<int>(rng.below(4)));
    s.judge.push_back(static_cast<int>(rng.below(5)));
    s.attorney.push_back(static_cast<int>(rng.below(6)));
  }
  return s;
}

}  // namespace

TEST_CASE("severity is the detained share per crime type") {
  std::vector<CaseRecord> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(record("c" + std::to_string(i), "d", day(2010, 1, 1), day(2010, 2, 1), i >= 3));
  for (int i = 0; i < 4; ++i) rs.push_back(record("r" + std::to_string(i), "e", day(2010, 1, 1), day(2010, 2, 1), 1, "T2"));
  const auto sev = compute_severity(rs);
  CHECK(sev.at("T1") == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(sev.at("T2") == 0.0);
  CHECK_THROWS_AS(severity_of(sev, "T9"), DataError);
}

TEST_CASE("severity recovers binomial detention rates") {
  CounterRng rng(11, 0);
  std::vector<CaseRecord> rs;
  const std::map<std::string, double> p{{"A", 0.3}, {"B", 0.7}, {"C", 0.05}};
  for (const auto& [type, q] : p)
    for (int i = 0; i < 10'000; ++i)
      rs.push_back(record(type + std::to_string(i), "d", day(2010, 1, 1), day(2010, 2, 1), rng.uniform() >= q, type));
  const auto sev = compute_severity(rs);
  for (const auto& [type, q] : p) {
    const double se = std::sqrt(q * (1 - q) / 1e4);
    CHECK(std::abs(sev.at(type) - q) < 4 * se);
  }
}

TEST_CASE("history of a first case is empty") {
  const std::vector<CaseRecord> rs{record("c1", "d", day(2010, 1, 1), day(2010, 2, 1), 1)};
  const auto h = compute_history(rs, {{"T1", 0.4}});
  CHECK(h[0].prev_case == 0);
  CHECK(h[0].n_previous == 0);
  CHECK(h[0].prev_misconduct == 0);
  CHECK(h[0].prev_conviction == 0);
  CHECK(h[0].severity_last == 0.0);
}

TEST_CASE("two earlier cases with one conviction") {
  auto a = record("c1", "d", day(2009, 1, 1), day(2009, 2, 1), 1);
  a.convicted = 1;
  auto b = record("c2", "d", day(2009, 5, 1), day(2009, 6, 1), 0, "T2");
  b.convicted = 0;
  const auto c = record("c3", "d", day(2010, 1, 1), day(2010, 2, 1), 1);
  const std::vector<CaseRecord> rs{c, a, b};
  const auto h = compute_history(rs, {{"T1", 0.4}, {"T2", 0.2}});
  CHECK(h[0].n_previous == 2);
  CHECK(h[0].prev_case == 1);
  CHECK(h[0].prev_conviction == 1);
  CHECK(h[0].prev_misconduct == 0);
  CHECK(h[0].severity_last == 0.2);
}

TEST_CASE("hand traced timeline with an in-window re-arrest") {
  auto c1 = record("c1", "d", day(2010, 1, 1), day(2010, 2, 1), 1, "A");
  c1.convicted = 1;
  const auto c2 = record("c2", "d", day(2010, 3, 1), day(2010, 5, 1), 1, "B");
  const auto c3 = record("c3", "d", day(2010, 4, 1), day(2010, 7, 1), 0, "A");
  auto c4 = record("c4", "d", day(2010, 9, 1), day(2010, 10, 1), 1, "B");
  c4.nonappearance = 1;
  const auto c5 = record("c5", "d", day(2011, 1, 1), day(2011, 2, 1), 1, "A");
  // Nonappearance on a finished case; detention cannot produce misconduct.
  auto e1 = record("e1", "e", day(2010, 1, 1), day(2010, 2, 1), 1, "A");
  e1.nonappearance = 1;
  const auto e2 = record("e2", "e", day(2010, 3, 1), day(2010, 4, 1), 1, "A");
  const auto g1 = record("g1", "g", day(2010, 1, 1), day(2010, 6, 1), 0, "A");
  const auto g2 = record("g2", "g", day(2010, 3, 1), day(2010, 4, 1), 1, "A");

  const std::vector<CaseRecord> rs{c5, c3, c1, c4, c2, e1, e2, g1, g2};
  const SeverityMap sev{{"A", 0.4}, {"B", 0.2}};
  const auto h = compute_history(rs, sev);
  struct Want {
    int n, mis, conv;
    double last;
  };
  const std::vector<Want> want{{4, 1, 1, 0.2}, {2, 1, 1, 0.2}, {0, 0, 0, 0.0}, {3, 1, 1, 0.4}, {1, 0, 1, 0.4},
                               {0, 0, 0, 0.0}, {1, 1, 0, 0.4}, {0, 0, 0, 0.0}, {1, 0, 0, 0.4}};
  for (std::size_t i = 0; i < rs.size(); ++i) {
    INFO("record " << rs[i].case_id);
    CHECK(h[i].n_previous == want[i].n);
    CHECK(h[i].prev_case == (want[i].n > 0));
    CHECK(h[i].prev_misconduct == want[i].mis);
    CHECK(h[i].prev_conviction == want[i].conv);
    CHECK(h[i].severity_last == want[i].last);
  }

  const auto late = compute_history(rs, sev, day(2010, 2, 15));
  CHECK(late[4].n_previous == 0);
  CHECK(late[0].n_previous == 3);
}

TEST_CASE("duplicate defendant-case keys are rejected") {
  const std::vector<CaseRecord> rs{record("c1", "d", day(2010, 1, 1), day(2010, 2, 1), 1),
                                   record("c1", "d", day(2010, 1, 1), day(2010, 2, 1), 1)};
  CHECK_THROWS_AS(compute_history(rs, {{"T1", 0.4}}), DataError);
}

TEST_CASE("history never looks at later cases") {
  const auto data = dgp::generate(testing::small_spec(3'000, 9));
  const auto sev = compute_severity(data.records);
  std::vector<CaseRecord> base;
  for (const auto& r : data.records)
    if (r.crime_type_code.size() && !r.summons) base.push_back(r);
  std::map<std::pair<std::string, std::string>, int> seen;
  std::erase_if(base, [&](const CaseRecord& r) { return seen[{r.defendant_id, r.case_id}]++ > 0; });
  const auto full = compute_history(base, sev);
  Date cutoff = day(2010, 6, 30);
  std::vector<CaseRecord> early;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < base.size(); ++i)
    if (base[i].hearing_date <= cutoff) {
      early.push_back(base[i]);
      where.push_back(i);
    }
  REQUIRE(early.size() > 100);
  const auto part = compute_history(early, sev);
  for (std::size_t i = 0; i < early.size(); ++i) {
    const auto& a = part[i];
    const auto& b = full[where[i]];
    CHECK(a.n_previous == b.n_previous);
    CHECK(a.prev_conviction == b.prev_conviction);
    CHECK(a.severity_last == b.severity_last);
  }
  for (const auto& h : full) {
    CHECK(h.prev_case == (h.n_previous > 0));
    if (!h.prev_case) CHECK(h.prev_misconduct + h.prev_conviction == 0);
  }
}

TEST_CASE("leave-out mean of three residuals") {
  const VectorXd v = (VectorXd(3) << 0.2, -0.1, 0.1).finished();
  const std::vector<int> keys{7, 7, 7};
  const VectorXd lo = leave_out_means(v, keys);
  CHECK(lo(0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(lo(1) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(lo(2) == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("singleton keys") {
  const VectorXd v = (VectorXd(3) << 1, 0, 1).finished();
  const std::vector<int> keys{1, 1, 2};
  CHECK_THROWS_WITH_AS(leave_out_means(v, keys), doctest::Contains("key 2"), DataError);
  std::size_t lone = 0;
  const VectorXd lo = leave_out_means(v, keys, 0.0, &lone);
  CHECK(lone == 1);
  CHECK(lo(2) == 0.0);
}

TEST_CASE("leave-out means commute with row permutations") {
  CounterRng rng(3, 0);
  const Index n = 200;
  const VectorXd v = testing::normals(rng, n);
  std::vector<int> keys(n);
  for (auto& k : keys) k = static_cast<int>(rng.below(12));
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
  VectorXd pv(n);
  std::vector<int> pk(n);
  for (Index i = 0; i < n; ++i) {
    pv(i) = v(perm[i]);
    pk[i] = keys[perm[i]];
  }
  const VectorXd a = leave_out_means(v, keys);
  const VectorXd b = leave_out_means(pv, pk);
  for (Index i = 0; i < n; ++i) CHECK(b(i) == doctest::Approx(a(perm[i])).epsilon(1e-12));
}

TEST_CASE("residualized leave-out matches its definition") {
  const auto s = leave_out_fixture(21, 150);
  const auto lo = compute_leaveout_measures(s);
  const VectorXd judge = brute_leave_out(s.release, s.court_year, s.judge);
  const VectorXd att = brute_leave_out(s.release, s.court_year, s.attorney);
  CHECK((lo.judge_leniency - judge).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((lo.attorney_quality - att).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lo.attorney_singletons == 0);
}

TEST_CASE("own release never enters own leniency") {
  auto s = leave_out_fixture(22, 120);
  const auto before = compute_leaveout_measures(s);
  for (Index i : {Index{0}, Index{17}, Index{119}}) {
    s.release(i) = 1 - s.release(i);
    const auto after = compute_leaveout_measures(s);
    CHECK(after.judge_leniency(i) == doctest::Approx(before.judge_leniency(i)).epsilon(1e-13));
    CHECK(after.attorney_quality(i) == doctest::Approx(before.attorney_quality(i)).epsilon(1e-13));
    s.release(i) = 1 - s.release(i);
  }
}

TEST_CASE("clean toy input passes every rule") {
  const std::vector<CaseRecord> rs{record("c1", "a", day(2010, 1, 1), day(2010, 2, 1), 1),
                                   record("c2", "b", day(2010, 1, 2), day(2010, 2, 1), 0),
                                   record("c3", "c", day(2010, 1, 3), day(2010, 2, 1), 1)};
  const auto built = build_sample(rs, relaxed());
  CHECK(built.sample.rows() == 3);
  CHECK(built.ledger.input_rows == 3);
  CHECK(built.ledger.output_rows == 3);
  CHECK(built.ledger.entries.size() == kRuleNames.size());
  for (const auto& e : built.ledger.entries) CHECK(e.excluded == 0);
  CHECK(std::isnan(built.sample.misconduct(1)));
  CHECK(built.sample.misconduct(0) == 0.0);
}

TEST_CASE("detention longer than the case is excluded") {
  std::vector<CaseRecord> rs;
  for (int i = 0; i < 4; ++i)
    rs.push_back(record("c" + std::to_string(i), "d" + std::to_string(i), day(2010, 1, 1 + i), day(2010, 10, 28), i % 2));
  rs[0].pretrial_detention_days = 400;
  REQUIRE(rs[0].case_end_date.days - rs[0].hearing_date.days == 300);
  rs[2].pretrial_detention_days = 200;
  const auto built = build_sample(rs, relaxed());
  CHECK(built.ledger.excluded_by("detention longer than the case") == 1);
  CHECK(built.sample.rows() == 3);
}

TEST_CASE("the most severe line of a hearing is kept") {
  std::vector<CaseRecord> rs;
  for (int i = 0; i < 49; ++i)
    rs.push_back(record("x" + std::to_string(i), "dx" + std::to_string(i), day(2010, 2, 1), day(2010, 3, 1), i >= 9, "X"));
  for (int i = 0; i < 19; ++i)
    rs.push_back(record("y" + std::to_string(i), "dy" + std::to_string(i), day(2010, 2, 1), day(2010, 3, 1), i >= 1, "Y"));
  rs.push_back(record("m", "two", day(2010, 4, 1), day(2010, 5, 1), 1, "Y"));
  rs.push_back(record("m", "two", day(2010, 4, 1), day(2010, 5, 1), 1, "X"));
  const auto built = build_sample(rs, relaxed());
  CHECK(built.severity.at("X") == doctest::Approx(0.18));
  CHECK(built.severity.at("Y") == doctest::Approx(0.05));
  CHECK(built.ledger.excluded_by("less severe crime of the same hearing") == 1);
  const auto& s = built.sample;
  const auto it = std::find(s.case_id.begin(), s.case_id.end(), "m");
  REQUIRE(it != s.case_id.end());
  CHECK(s.severity_current(it - s.case_id.begin()) == doctest::Approx(0.18));
}

TEST_CASE("an exhausted sample names the rule") {
  std::vector<CaseRecord> rs{record("c1", "a", day(2010, 1, 1), day(2010, 2, 1), 1),
                             record("c2", "b", day(2010, 1, 2), day(2010, 2, 1), 0)};
  for (auto& r : rs) r.juvenile = true;
  CHECK_THROWS_WITH_AS(build_sample(rs, relaxed()), doctest::Contains("juvenile defendant"), DataError);
  CHECK_THROWS_AS(build_sample(std::vector<CaseRecord>{}), DataError);
}

TEST_CASE("synthetic sample obeys the ledger and retention invariants") {
  auto spec = testing::small_spec(8'000, 31);
  spec.summons_rate = 0.02;
  spec.juvenile_rate = 0.02;
  spec.private_attorney_rate = 0.03;
  spec.multi_crime_rate = 0.1;
  const auto data = dgp::generate(spec);
  const auto built = build_sample(data.records);
  const auto& L = built.ledger;
  CHECK(L.input_rows == data.records.size());
  CHECK(L.total_excluded() == L.input_rows - L.output_rows);
  std::size_t remaining = L.input_rows;
  for (const auto& e : L.entries) {
    CHECK(e.remaining == remaining - e.excluded);
    remaining = e.remaining;
  }
  CHECK(remaining == L.output_rows);
  CHECK(L.excluded_by("legal summons") > 0);
  CHECK(L.excluded_by("juvenile defendant") > 0);
  CHECK(L.excluded_by("exclusive private attorney") > 0);
  CHECK(L.excluded_by("less severe crime of the same hearing") > 0);

  const auto& s = built.sample;
  CHECK(s.rows() == static_cast<Index>(L.output_rows));
  CHECK(s.severity_current.minCoeff() >= 0.05);
  for (Index i = 0; i < s.rows(); ++i) {
    CHECK(std::isnan(s.misconduct(i)) == (s.release(i) == 0.0));
    CHECK(s.judge_leniency_sq(i) == doctest::Approx(s.judge_leniency(i) * s.judge_leniency(i)));
  }
  CHECK_NOTHROW(s.validate());

  const auto t = describe_sample(s);
  double rel[2] = {0, 0}, cnt[2] = {0, 0}, mis[2] = {0, 0}, nrel[2] = {0, 0};
  for (Index i = 0; i < s.rows(); ++i) {
    const int g = s.group(i) == 1.0;
    rel[g] += s.release(i);
    cnt[g] += 1;
    if (s.release(i) == 1.0) mis[g] += s.misconduct(i), nrel[g] += 1;
  }
  CHECK(t.row("Released").group0 == doctest::Approx(rel[0] / cnt[0]));
  CHECK(t.row("Released").group1 == doctest::Approx(rel[1] / cnt[1]));
  CHECK(t.row("Pretrial misconduct").group1 == doctest::Approx(mis[1] / nrel[1]));
  const auto& a = t.row("Observations (released)");
  const auto& b = t.row("Observations (nonreleased)");
  CHECK(a.group0 + a.group1 + b.group0 + b.group1 == doctest::Approx(static_cast<double>(s.rows())));
  CHECK_THROWS_AS(t.row("No such row"), ConfigError);
}

TEST_CASE("case records round trip through csv") {
  auto spec = testing::small_spec(500, 4);
  spec.multi_crime_rate = 0.1;
  const auto data = dgp::generate(spec);
  std::stringstream io;
  write_case_records(io, data.records);
  const auto back = read_case_records(io);
  REQUIRE(back.size() == data.records.size());
  std::stringstream again;
  write_case_records(again, back);
  std::stringstream first;
  write_case_records(first, data.records);
  CHECK(again.str() == first.str());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].case_id == data.records[i].case_id);
    CHECK(back[i].hearing_date == data.records[i].hearing_date);
    CHECK(back[i].judge_id == data.records[i].judge_id);
    CHECK(back[i].nonappearance == data.records[i].nonappearance);
  }
}

TEST_CASE("malformed csv reports the line") {
  std::stringstream io;
  write_case_records(io, std::vector<CaseRecord>{record("c1", "a", day(2010, 1, 1), day(2010, 2, 1), 1)});
  std::string text = io.str();
  std::string row = text.substr(text.find('\n') + 1);
  row.replace(row.find("2010-01-01"), 10, "2010-13-01");
  text += row;
  std::stringstream bad(text);
  CHECK_THROWS_WITH_AS(read_case_records(bad), doctest::Contains("line 3"), DataError);
}

TEST_CASE("dates") {
  CHECK(Date::from_ymd(1970, 1, 1).days == 0);
  CHECK(Date::parse("2016-02-29").iso() == "2016-02-29");
  CHECK(Date::parse("2016-02-29").year() == 2016);
  CHECK_THROWS_AS(Date::parse("2015-02-29"), DataError);
  CHECK_THROWS_AS(Date::parse("2015-2-01"), DataError);
}
