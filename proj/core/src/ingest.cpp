#include "audit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "audit/errors.hpp"

namespace audit::ingest {

const std::vector<std::string> kRuleNames{
    "case starts after it ends",
    "detention longer than the case",
    "missing group flag",
    "legal summons",
    "juvenile defendant",
    "exclusive private attorney",
    "case longer than two years",
    "less severe crime of the same hearing",
    "missing judge",
    "crime type rarely detained",
    "judge with few cases",
    "attorney with few prior cases",
};

std::size_t ExclusionLedger::total_excluded() const {
  std::size_t s = 0;
  for (const auto& e : entries) s += e.excluded;
  return s;
}

std::size_t ExclusionLedger::excluded_by(const std::string& rule) const {
  for (const auto& e : entries)
    if (e.rule == rule) return e.excluded;
  throw ConfigError(fmt::format("no ledger entry '{}'", rule));
}

std::string ExclusionLedger::render() const {
  std::string out = fmt::format("{:<40} {:>10} {:>10}\n", "rule", "excluded", "remaining");
  out += fmt::format("{:<40} {:>10} {:>10}\n", "input", "", input_rows);
  for (const auto& e : entries) out += fmt::format("{:<40} {:>10} {:>10}\n", e.rule, e.excluded, e.remaining);
  for (const auto& n : notes) out += "note: " + n + "\n";
  return out;
}

double severity_of(const SeverityMap& map, const std::string& crime_type) {
  const auto it = map.find(crime_type);
  if (it == map.end()) throw DataError(fmt::format("no severity for crime type '{}'", crime_type));
  return it->second;
}

SeverityMap compute_severity(std::span<const CaseRecord> records) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& r : records) {
    auto& c = counts[r.crime_type_code];
    c.first += r.released == 0;
    c.second += 1;
  }
  SeverityMap out;
  for (const auto& [code, c] : counts) out[code] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

namespace {

// Per-defendant case timeline answering history queries at any date.
class HistoryIndex {
public:
  HistoryIndex(std::span<const CaseRecord> cases, const SeverityMap& severity, std::optional<Date> start)
      : severity_(severity), start_(start) {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : cases) {
      if (!seen.emplace(r.defendant_id, r.case_id).second)
        throw DataError(fmt::format("duplicate case '{}' for defendant '{}'", r.case_id, r.defendant_id));
      by_defendant_[r.defendant_id].push_back(&r);
    }
    for (auto& [id, list] : by_defendant_)
      std::stable_sort(list.begin(), list.end(), [](const CaseRecord* a, const CaseRecord* b) {
        return std::tie(a->hearing_date, a->case_id) < std::tie(b->hearing_date, b->case_id);
      });
  }

  HistoryFeatures at(const std::string& defendant, Date date) const {
    HistoryFeatures h;
    const auto it = by_defendant_.find(defendant);
    if (it == by_defendant_.end()) return h;
    const auto& list = it->second;
    const CaseRecord* last = nullptr;
    for (std::size_t k = 0; k < list.size(); ++k) {
      const CaseRecord& past = *list[k];
      if (!(past.hearing_date < date)) break;
      if (start_ && past.hearing_date < *start_) continue;
      ++h.n_previous;
      last = &past;
      if (past.convicted.value_or(0) == 1) h.prev_conviction = 1;
      if (past.released == 1 && !h.prev_misconduct) {
        bool flagged = past.case_end_date < date &&
                       (past.nonappearance.value_or(0) == 1 || past.pretrial_recidivism.value_or(0) == 1);
        const Date window_end = std::min(past.case_end_date, date);
        for (std::size_t m = k + 1; m < list.size() && !flagged; ++m) {
          const Date arrest = list[m]->hearing_date;
          if (window_end < arrest) break;
          flagged = past.hearing_date < arrest;
        }
        // The current hearing is itself an arrest when it falls in the window.
        if (!flagged && past.hearing_date < date && !(past.case_end_date < date)) flagged = true;
        if (flagged) h.prev_misconduct = 1;
      }
    }
    h.prev_case = h.n_previous > 0;
    if (last) h.severity_last = severity_of(severity_, last->crime_type_code);
    return h;
  }

private:
  const SeverityMap& severity_;
  std::optional<Date> start_;
  std::unordered_map<std::string, std::vector<const CaseRecord*>> by_defendant_;
};

// Keeps the most severe crime line per (defendant, hearing date); ties go to
// the lowest crime type code, then to input order.
std::vector<std::size_t> most_severe_lines(std::span<const CaseRecord> records, std::span<const std::size_t> idx,
                                           const SeverityMap& severity) {
  std::map<std::pair<std::string, int>, std::size_t> best;
  for (std::size_t i : idx) {
    const auto& r = records[i];
    const auto key = std::make_pair(r.defendant_id, r.hearing_date.days);
    const auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(key, i);
      continue;
    }
    const auto& cur = records[it->second];
    const double s_new = severity_of(severity, r.crime_type_code);
    const double s_cur = severity_of(severity, cur.crime_type_code);
    if (s_new > s_cur || (s_new == s_cur && r.crime_type_code < cur.crime_type_code)) it->second = i;
  }
  std::vector<std::size_t> keep;
  keep.reserve(best.size());
  for (const auto& [key, i] : best) keep.push_back(i);
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

std::vector<HistoryFeatures> compute_history(std::span<const CaseRecord> records, const SeverityMap& severity,
                                             std::optional<Date> history_start) {
  const HistoryIndex index(records, severity, history_start);
  std::vector<HistoryFeatures> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(index.at(r.defendant_id, r.hearing_date));
  return out;
}

VectorXd leave_out_means(const VectorXd& values, std::span<const int> keys, std::optional<double> singleton_value,
                         std::size_t* singletons) {
  std::unordered_map<int, std::pair<double, std::size_t>> acc;
  for (Index i = 0; i < values.size(); ++i) {
    auto& a = acc[keys[static_cast<std::size_t>(i)]];
    a.first += values(i);
    a.second += 1;
  }
  VectorXd out(values.size());
  std::size_t lone = 0;
  for (Index i = 0; i < values.size(); ++i) {
    const int key = keys[static_cast<std::size_t>(i)];
    const auto& a = acc[key];
    if (a.second < 2) {
      if (!singleton_value) throw DataError(fmt::format("leave-out mean undefined: key {} has a single case", key));
      out(i) = *singleton_value;
      ++lone;
      continue;
    }
    out(i) = (a.first - values(i)) / static_cast<double>(a.second - 1);
  }
  if (singletons) *singletons = lone;
  return out;
}

namespace {

// Leave-out mean of release residualized on court-by-year means, where the
// court-by-year means also exclude the case itself.  The own release then
// drops out of the case's regressor entirely.
VectorXd residualized_leave_out(const VectorXd& release, std::span<const int> court_year, std::span<const int> keys,
                                std::optional<double> singleton_value, std::size_t* singletons) {
  const Index n = release.size();
  std::unordered_map<int, std::pair<double, double>> cy;
  std::map<std::pair<int, int>, double> cell;
  std::unordered_map<int, double> key_count;
  for (Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    auto& a = cy[court_year[u]];
    a.first += release(i);
    a.second += 1;
    cell[{keys[u], court_year[u]}] += 1;
    key_count[keys[u]] += 1;
  }
  VectorXd resid(n);
  for (Index i = 0; i < n; ++i) {
    const auto& a = cy[court_year[static_cast<std::size_t>(i)]];
    resid(i) = release(i) - a.first / a.second;
  }
  VectorXd out = leave_out_means(resid, keys, singleton_value, singletons);
  for (Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double nk = key_count[keys[u]];
    const auto& a = cy[court_year[u]];
    if (nk < 2 || a.second < 2) continue;
    const double shared = cell[{keys[u], court_year[u]}] - 1;
    out(i) += shared * (release(i) - a.first / a.second) / (a.second - 1) / (nk - 1);
  }
  return out;
}

}  // namespace

LeaveOutMeasures compute_leaveout_measures(const EstimationSample& sample) {
  LeaveOutMeasures out;
  out.judge_leniency = residualized_leave_out(sample.release, sample.court_year, sample.judge, std::nullopt, nullptr);
  out.attorney_quality =
      residualized_leave_out(sample.release, sample.court_year, sample.attorney, 0.0, &out.attorney_singletons);
  return out;
}

BuildResult build_sample(std::span<const CaseRecord> records, const RestrictionRules& rules) {
  if (records.empty()) throw DataError("build_sample: no input records");
  BuildResult result;
  auto& ledger = result.ledger;
  ledger.input_rows = records.size();

  std::vector<std::size_t> live(records.size());
  std::iota(live.begin(), live.end(), std::size_t{0});
  auto apply = [&](std::size_t rule, bool enabled, auto&& drop) {
    std::size_t before = live.size();
    if (enabled) std::erase_if(live, [&](std::size_t i) { return drop(records[i]); });
    ledger.entries.push_back({kRuleNames[rule], before - live.size(), live.size()});
    if (live.empty()) throw DataError(fmt::format("sample exhausted by rule '{}'", kRuleNames[rule]));
  };

  apply(0, rules.drop_inconsistent_dates, [](const CaseRecord& r) { return r.case_end_date < r.hearing_date; });
  apply(1, rules.drop_overlong_detention, [](const CaseRecord& r) {
    return r.pretrial_detention_days > r.case_end_date.days - r.hearing_date.days;
  });

  // Cleaned set: the basis for severity and criminal records.
  std::vector<CaseRecord> cleaned;
  cleaned.reserve(live.size());
  for (std::size_t i : live) cleaned.push_back(records[i]);
  result.severity = compute_severity(cleaned);
  const auto& severity = result.severity;

  std::vector<std::size_t> history_idx(cleaned.size());
  std::iota(history_idx.begin(), history_idx.end(), std::size_t{0});
  if (rules.deduplicate_crimes) history_idx = most_severe_lines(cleaned, history_idx, severity);
  std::vector<CaseRecord> timeline;
  timeline.reserve(history_idx.size());
  for (std::size_t i : history_idx) timeline.push_back(cleaned[i]);
  const HistoryIndex history(timeline, severity, rules.history_start_date);

  std::unordered_map<std::string, std::vector<int>> attorney_dates;
  for (const auto& r : timeline)
    if (r.attorney_id) attorney_dates[*r.attorney_id].push_back(r.hearing_date.days);
  for (auto& [id, d] : attorney_dates) std::sort(d.begin(), d.end());

  apply(2, true, [](const CaseRecord& r) { return !r.group_flag.has_value(); });
  apply(3, rules.exclude_summons, [](const CaseRecord& r) { return r.summons; });
  apply(4, rules.exclude_juvenile, [](const CaseRecord& r) { return r.juvenile; });
  apply(5, rules.exclude_private_attorney, [](const CaseRecord& r) { return r.private_attorney; });
  apply(6, rules.max_case_length_days > 0, [&](const CaseRecord& r) {
    return r.case_end_date.days - r.hearing_date.days > rules.max_case_length_days;
  });
  {
    const std::size_t before = live.size();
    if (rules.deduplicate_crimes) live = most_severe_lines(records, live, severity);
    ledger.entries.push_back({kRuleNames[7], before - live.size(), live.size()});
  }
  apply(8, true, [](const CaseRecord& r) { return !r.judge_id.has_value(); });
  apply(9, rules.min_crime_detention_rate > 0, [&](const CaseRecord& r) {
    return severity_of(severity, r.crime_type_code) < rules.min_crime_detention_rate;
  });
  {
    std::unordered_map<std::string, std::size_t> judge_cases;
    for (std::size_t i : live) ++judge_cases[*records[i].judge_id];
    apply(10, rules.min_judge_cases > 0, [&](const CaseRecord& r) {
      return judge_cases[*r.judge_id] < static_cast<std::size_t>(rules.min_judge_cases);
    });
  }
  apply(11, rules.min_attorney_prior_cases > 0, [&](const CaseRecord& r) {
    if (!r.attorney_id) return true;
    const auto& d = attorney_dates[*r.attorney_id];
    const auto prior = std::lower_bound(d.begin(), d.end(), r.hearing_date.days) - d.begin();
    return prior < rules.min_attorney_prior_cases;
  });
  ledger.output_rows = live.size();

  // Assemble the analysis rows.
  const Index n = static_cast<Index>(live.size());
  auto& s = result.sample;
  auto nan = std::numeric_limits<double>::quiet_NaN();
  for (VectorXd* v : {&s.release, &s.misconduct, &s.nonappearance, &s.recidivism, &s.group, &s.prev_case,
                      &s.n_previous, &s.prev_misconduct, &s.prev_conviction, &s.severity_last,
                      &s.severity_current, &s.cy_n_judges, &s.cy_release_rate, &s.cy_n_cases, &s.cy_avg_severity,
                      &s.male, &s.income_proxy, &s.origin_new})
    v->setConstant(n, nan);

  std::map<std::string, int> court_codes, judge_codes, attorney_codes;
  std::map<std::pair<std::string, int>, int> cy_codes;
  for (std::size_t i : live) {
    const auto& r = records[i];
    court_codes.emplace(r.court_id, 0);
    judge_codes.emplace(*r.judge_id, 0);
    attorney_codes.emplace(r.attorney_id.value_or(""), 0);
    cy_codes.emplace(std::make_pair(r.court_id, r.hearing_date.year()), 0);
  }
  auto number = [](auto& m) {
    int c = 0;
    for (auto& [k, v] : m) v = c++;
  };
  number(court_codes);
  number(judge_codes);
  number(attorney_codes);
  number(cy_codes);

  for (Index row = 0; row < n; ++row) {
    const auto& r = records[live[static_cast<std::size_t>(row)]];
    const auto h = history.at(r.defendant_id, r.hearing_date);
    s.release(row) = r.released;
    if (r.released == 1) {
      s.nonappearance(row) = r.nonappearance.value_or(0);
      s.recidivism(row) = r.pretrial_recidivism.value_or(0);
      s.misconduct(row) = (s.nonappearance(row) == 1.0 || s.recidivism(row) == 1.0) ? 1.0 : 0.0;
    }
    s.group(row) = *r.group_flag;
    s.prev_case(row) = h.prev_case;
    s.n_previous(row) = h.n_previous;
    s.prev_misconduct(row) = h.prev_misconduct;
    s.prev_conviction(row) = h.prev_conviction;
    s.severity_last(row) = h.severity_last;
    s.severity_current(row) = severity_of(severity, r.crime_type_code);
    s.crime_category.push_back(r.crime_category);
    s.court.push_back(court_codes.at(r.court_id));
    s.judge.push_back(judge_codes.at(*r.judge_id));
    s.attorney.push_back(attorney_codes.at(r.attorney_id.value_or("")));
    s.year.push_back(r.hearing_date.year());
    s.court_year.push_back(cy_codes.at({r.court_id, r.hearing_date.year()}));
    s.case_id.push_back(r.case_id);
    if (r.male) s.male(row) = *r.male;
    if (r.income_proxy) s.income_proxy(row) = *r.income_proxy;
    if (r.origin_new) s.origin_new(row) = *r.origin_new;
  }

  struct CyStats {
    std::set<int> judges;
    double released = 0, severity = 0, cases = 0;
  };
  std::vector<CyStats> cy(cy_codes.size());
  for (Index row = 0; row < n; ++row) {
    auto& c = cy[static_cast<std::size_t>(s.court_year[static_cast<std::size_t>(row)])];
    c.judges.insert(s.judge[static_cast<std::size_t>(row)]);
    c.released += s.release(row);
    c.severity += s.severity_current(row);
    c.cases += 1;
  }
  for (Index row = 0; row < n; ++row) {
    const auto& c = cy[static_cast<std::size_t>(s.court_year[static_cast<std::size_t>(row)])];
    s.cy_n_judges(row) = static_cast<double>(c.judges.size());
    s.cy_release_rate(row) = c.released / c.cases;
    s.cy_n_cases(row) = c.cases;
    s.cy_avg_severity(row) = c.severity / c.cases;
  }

  const auto lo = compute_leaveout_measures(s);
  s.judge_leniency = lo.judge_leniency;
  s.judge_leniency_sq = lo.judge_leniency.array().square();
  s.attorney_quality = lo.attorney_quality;
  s.attorney_quality_sq = lo.attorney_quality.array().square();
  if (lo.attorney_singletons > 0)
    ledger.notes.push_back(fmt::format("{} cases have the only sample case of their attorney; attorney quality set to 0",
                                       lo.attorney_singletons));
  s.validate();
  return result;
}

const DescriptiveRow& DescriptiveTable::row(const std::string& label) const {
  for (const auto& r : rows)
    if (r.label == label) return r;
  throw ConfigError(fmt::format("descriptive table has no row '{}'", label));
}

DescriptiveTable describe_sample(const EstimationSample& s) {
  DescriptiveTable t;
  const Index n = s.rows();
  auto mean_by_group = [&](const VectorXd& v, bool released_only) {
    std::array<double, 2> sum{0, 0}, cnt{0, 0};
    for (Index i = 0; i < n; ++i) {
      if (released_only && s.release(i) != 1.0) continue;
      if (std::isnan(v(i))) continue;
      const int g = s.group(i) == 1.0;
      sum[g] += v(i);
      cnt[g] += 1;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return std::array<double, 2>{cnt[0] > 0 ? sum[0] / cnt[0] : nan, cnt[1] > 0 ? sum[1] / cnt[1] : nan};
  };
  auto add = [&](std::string label, const VectorXd& v, bool released_only = false) {
    const auto m = mean_by_group(v, released_only);
    t.rows.push_back({std::move(label), m[0], m[1], false, false});
  };
  auto heading = [&](std::string label) { t.rows.push_back({std::move(label), 0, 0, false, true}); };

  add("Released", s.release);
  heading("Outcomes (only for released)");
  add("Nonappearance in court", s.nonappearance, true);
  add("Pretrial recidivism", s.recidivism, true);
  add("Pretrial misconduct", s.misconduct, true);
  heading("Individual Characteristics");
  add("Male", s.male);
  add("At least one previous case", s.prev_case);
  add("At least one previous pretrial misconduct", s.prev_misconduct);
  add("At least one previous conviction", s.prev_conviction);
  add("No. of previous cases", s.n_previous);
  add("Severity previous case", s.severity_last);
  add("Severity current case", s.severity_current);
  heading("Court Characteristics");
  add("Average severity (year/Court)", s.cy_avg_severity);
  add("No. of cases (year/Court)", s.cy_n_cases);
  add("No. of judges (year/Court)", s.cy_n_judges);
  std::array<double, 2> rel{0, 0}, det{0, 0};
  for (Index i = 0; i < n; ++i) {
    const int g = s.group(i) == 1.0;
    (s.release(i) == 1.0 ? rel : det)[g] += 1;
  }
  t.rows.push_back({"Observations (released)", rel[0], rel[1], true, false});
  t.rows.push_back({"Observations (nonreleased)", det[0], det[1], true, false});
  return t;
}

}  // namespace audit::ingest
