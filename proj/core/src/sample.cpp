#include "audit/sample.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/records.hpp"

namespace audit {

namespace {

VectorXd pick(const VectorXd& v, std::span<const Index> rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, std::span<const Index> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (Index r : rows) out.push_back(v[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace

EstimationSample EstimationSample::subset(std::span<const Index> rows) const {
  for (Index r : rows)
    if (r < 0 || r >= this->rows()) throw ConfigError("sample subset: row index out of range");
  EstimationSample s;
  s.release = pick(release, rows);
  s.misconduct = pick(misconduct, rows);
  s.nonappearance = pick(nonappearance, rows);
  s.recidivism = pick(recidivism, rows);
  s.group = pick(group, rows);
  s.prev_case = pick(prev_case, rows);
  s.n_previous = pick(n_previous, rows);
  s.prev_misconduct = pick(prev_misconduct, rows);
  s.prev_conviction = pick(prev_conviction, rows);
  s.severity_last = pick(severity_last, rows);
  s.severity_current = pick(severity_current, rows);
  s.crime_category = pick(crime_category, rows);
  s.judge_leniency = pick(judge_leniency, rows);
  s.judge_leniency_sq = pick(judge_leniency_sq, rows);
  s.attorney_quality = pick(attorney_quality, rows);
  s.attorney_quality_sq = pick(attorney_quality_sq, rows);
  s.court_year = pick(court_year, rows);
  s.cy_n_judges = pick(cy_n_judges, rows);
  s.cy_release_rate = pick(cy_release_rate, rows);
  s.cy_n_cases = pick(cy_n_cases, rows);
  s.cy_avg_severity = pick(cy_avg_severity, rows);
  s.judge = pick(judge, rows);
  s.attorney = pick(attorney, rows);
  s.court = pick(court, rows);
  s.year = pick(year, rows);
  s.case_id = pick(case_id, rows);
  s.male = pick(male, rows);
  s.income_proxy = pick(income_proxy, rows);
  s.origin_new = pick(origin_new, rows);
  return s;
}

std::vector<Index> EstimationSample::released_rows() const {
  std::vector<Index> out;
  for (Index i = 0; i < rows(); ++i)
    if (release(i) == 1.0) out.push_back(i);
  return out;
}

std::vector<Index> EstimationSample::all_rows() const {
  std::vector<Index> out(static_cast<std::size_t>(rows()));
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

VectorXd EstimationSample::column(std::string_view name) const {
  if (name == "group") return group;
  if (name == "release") return release;
  if (name == "misconduct") return misconduct;
  if (name == "prev_case") return prev_case;
  if (name == "n_previous") return n_previous;
  if (name == "prev_misconduct") return prev_misconduct;
  if (name == "prev_conviction") return prev_conviction;
  if (name == "severity_last") return severity_last;
  if (name == "severity_current") return severity_current;
  if (name == "judge_leniency") return judge_leniency;
  if (name == "judge_leniency_sq") return judge_leniency_sq;
  if (name == "attorney_quality") return attorney_quality;
  if (name == "attorney_quality_sq") return attorney_quality_sq;
  if (name == "cy_n_judges") return cy_n_judges;
  if (name == "cy_release_rate") return cy_release_rate;
  if (name == "cy_n_cases") return cy_n_cases;
  if (name == "cy_avg_severity") return cy_avg_severity;
  if (name == "male") return male;
  if (name == "income_proxy") return income_proxy;
  if (name == "origin_new") return origin_new;
  if (name == "year") {
    VectorXd out(rows());
    for (Index i = 0; i < rows(); ++i) out(i) = year[static_cast<std::size_t>(i)];
    return out;
  }
  if (name.starts_with("cat_") && name.size() == 5 && name[4] >= '1' && name[4] <= '9') {
    const int k = name[4] - '0';
    VectorXd out(rows());
    for (Index i = 0; i < rows(); ++i) out(i) = crime_category[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0;
    return out;
  }
  throw ConfigError(fmt::format("unknown sample column '{}'", name));
}

bool EstimationSample::has_column_data(std::string_view name) const {
  const VectorXd v = column(name);
  for (Index i = 0; i < v.size(); ++i)
    if (std::isnan(v(i))) return false;
  return v.size() > 0;
}

void EstimationSample::validate() const {
  const Index n = rows();
  auto check = [&](const VectorXd& v, std::string_view name, bool allow_nan) {
    if (v.size() != n) throw DataError(fmt::format("sample column '{}' has wrong length", name));
    if (!allow_nan)
      for (Index i = 0; i < n; ++i)
        if (!std::isfinite(v(i))) throw DataError(fmt::format("sample column '{}' has a missing value", name));
  };
  for (const auto& name : individual_control_names(false)) check(column(name), name, false);
  for (const auto& name : judge_attorney_names()) check(column(name), name, false);
  for (const auto& name : court_year_covariate_names()) check(column(name), name, false);
  check(group, "group", false);
  check(release, "release", false);
  if (crime_category.size() != static_cast<std::size_t>(n) || court_year.size() != static_cast<std::size_t>(n))
    throw DataError("sample key columns have wrong length");
  for (Index i = 0; i < n; ++i) {
    const bool released = release(i) == 1.0;
    if (released == std::isnan(misconduct(i)))
      throw DataError(fmt::format("row {}: misconduct must be observed exactly on released rows", i));
    const int k = crime_category[static_cast<std::size_t>(i)];
    if (k < 1 || k > kCrimeCategories) throw DataError(fmt::format("row {}: crime category outside 1..9", i));
  }
}

std::vector<std::string> individual_control_names(bool with_categories) {
  std::vector<std::string> out{"prev_case",     "n_previous",    "prev_misconduct",
                               "prev_conviction", "severity_last", "severity_current"};
  if (with_categories)
    for (int k = 1; k <= kCrimeCategories; ++k)
      if (k != kBaseCrimeCategory) out.push_back(fmt::format("cat_{}", k));
  return out;
}

std::vector<std::string> judge_attorney_names() {
  return {"judge_leniency", "judge_leniency_sq", "attorney_quality", "attorney_quality_sq"};
}

std::vector<std::string> court_year_covariate_names() { return {"cy_n_judges", "cy_release_rate", "cy_n_cases"}; }

estimation::Design make_design(const EstimationSample& sample, std::span<const std::string> columns,
                               bool intercept) {
  estimation::Design d(sample.rows());
  if (intercept) d.add_intercept();
  for (const auto& c : columns) d.add(c, sample.column(c));
  return d;
}

void write_sample_csv(std::ostream& out, const EstimationSample& s) {
  std::vector<std::string> cols{"case_id", "court_year", "release", "misconduct", "group"};
  for (auto& c : individual_control_names(false)) cols.push_back(c);
  cols.push_back("crime_category");
  for (auto& c : judge_attorney_names()) cols.push_back(c);
  for (auto& c : court_year_covariate_names()) cols.push_back(c);
  cols.push_back("cy_avg_severity");
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  std::vector<VectorXd> numeric;
  for (std::size_t c = 2; c < cols.size(); ++c)
    if (cols[c] != "crime_category") numeric.push_back(s.column(cols[c]));
  for (Index i = 0; i < s.rows(); ++i) {
    const auto row = static_cast<std::size_t>(i);
    out << s.case_id[row] << ',' << s.court_year[row];
    std::size_t v = 0;
    for (std::size_t c = 2; c < cols.size(); ++c) {
      out << ',';
      if (cols[c] == "crime_category") {
        out << s.crime_category[row];
        continue;
      }
      const double x = numeric[v++](i);
      if (!std::isnan(x)) out << fmt::format("{:.10g}", x);
    }
    out << '\n';
  }
}

void write_sample_csv(const std::filesystem::path& path, const EstimationSample& sample) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write sample file '{}'", path.string()));
  write_sample_csv(out, sample);
}

}  // namespace audit
