#include "audit/benchmark.hpp"

#include <cmath>
#include <unordered_map>

#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/records.hpp"

namespace audit::benchmark {

void BenchmarkSpec::validate() const {
  if (crime_interacted && !individual)
    throw ConfigError("benchmark: crime-interacted fits need the individual controls");
}

BenchmarkSpec standard_column(int column) {
  BenchmarkSpec s;
  s.label = fmt::format("({})", column);
  switch (column) {
    case 1: break;
    case 2: s.individual = true; break;
    case 3: s.judge_attorney = true; break;
    case 4: s.court_year_fe = true; break;
    case 5:
      s.individual = true;
      s.judge_attorney = true;
      s.court_year_fe = true;
      break;
    default: throw ConfigError(fmt::format("benchmark column {} outside 1..5", column));
  }
  return s;
}

estimation::Design benchmark_design(const EstimationSample& sample, const BenchmarkSpec& spec) {
  spec.validate();
  estimation::Design d(sample.rows());
  if (!spec.court_year_fe) d.add_intercept();
  if (spec.crime_interacted) {
    for (int k = 1; k <= kCrimeCategories; ++k)
      d.add(fmt::format("group_x_cat_{}", k),
            sample.group.cwiseProduct(sample.column(fmt::format("cat_{}", k))));
  } else {
    d.add("group", sample.group);
  }
  if (spec.individual)
    for (const auto& c : individual_control_names()) d.add(c, sample.column(c));
  if (spec.judge_attorney)
    for (const auto& c : judge_attorney_names()) d.add(c, sample.column(c));
  if (spec.court_year_covariates)
    for (const auto& c : court_year_covariate_names()) d.add(c, sample.column(c));
  return d;
}

FitResult fit_design(const EstimationSample& sample, const VectorXd& y, const estimation::Design& design,
                     bool court_year_fe, const estimation::OlsOptions& ols) {
  std::vector<std::vector<int>> fe;
  if (court_year_fe) fe.push_back(sample.court_year);
  return estimation::ols_fe(y, design, fe, sample.court_year, ols);
}

namespace {

BenchmarkResult finish(const EstimationSample& sample, const BenchmarkSpec& spec, FitResult fit) {
  BenchmarkResult r;
  r.label = spec.label;
  r.spec = spec;
  r.mean_dep = sample.release.mean();
  r.r_squared = fit.r_squared;
  r.n_group1 = static_cast<Index>(sample.group.sum());
  r.n_group0 = sample.rows() - r.n_group1;
  const Index j = fit.index_of("group");
  r.alpha_d = j >= 0 ? fit.coefficients(j) : std::nan("");
  r.se = j >= 0 ? fit.se(j) : std::nan("");
  r.fit = std::move(fit);
  return r;
}

}  // namespace

BenchmarkResult run_benchmark(const EstimationSample& sample, const BenchmarkSpec& spec) {
  const auto design = benchmark_design(sample, spec);
  return finish(sample, spec, fit_design(sample, sample.release, design, spec.court_year_fe, spec.ols));
}

CrimeBenchmark run_benchmark_by_crime(const EstimationSample& sample, const estimation::OlsOptions& ols) {
  BenchmarkSpec spec = standard_column(5);
  spec.crime_interacted = true;
  spec.ols = ols;
  CrimeBenchmark out;
  out.fit = fit_design(sample, sample.release, benchmark_design(sample, spec), true, ols);
  out.mean_dep = sample.release.mean();
  out.n_group1 = static_cast<Index>(sample.group.sum());
  out.n_group0 = sample.rows() - out.n_group1;
  for (int k = 1; k <= kCrimeCategories; ++k) {
    CrimeCell c;
    c.category = k;
    c.name = std::string(crime_category_name(k));
    for (Index i = 0; i < sample.rows(); ++i) {
      if (sample.crime_category[static_cast<std::size_t>(i)] != k) continue;
      (sample.group(i) == 1.0 ? c.n_group1 : c.n_group0) += 1;
    }
    c.present = c.n_group1 + c.n_group0 > 0;
    const Index j = out.fit.index_of(fmt::format("group_x_cat_{}", k));
    c.identified = c.present && c.n_group1 > 0 && j >= 0;
    if (c.identified) {
      c.coef = out.fit.coefficients(j);
      c.se = out.fit.se(j);
    }
    out.cells.push_back(c);
  }
  return out;
}

std::vector<SplitCell> run_benchmark_split(const EstimationSample& sample, const Partition& partition,
                                           const BenchmarkSpec& spec, const std::optional<Interaction>& interaction) {
  if (partition.labels.size() != partition.cells.size()) throw ConfigError("partition labels and cells differ");
  if (interaction && interaction->indicator.size() != sample.rows())
    throw ConfigError(fmt::format("interaction '{}' length differs from the sample", interaction->name));
  std::vector<SplitCell> out;
  for (std::size_t c = 0; c < partition.cells.size(); ++c) {
    const auto& rows = partition.cells[c];
    if (rows.empty()) throw ConfigError(fmt::format("partition cell '{}' is empty", partition.labels[c]));
    const EstimationSample sub = sample.subset(rows);
    auto design = benchmark_design(sub, spec);
    SplitCell cell;
    cell.label = partition.labels[c];
    std::vector<std::string> term_names;
    if (interaction) {
      VectorXd z(sub.rows());
      for (Index i = 0; i < sub.rows(); ++i) z(i) = interaction->indicator(rows[static_cast<std::size_t>(i)]);
      if (interaction->split_group) {
        const std::vector<std::string> drop{"group"};
        design = design.without_columns(drop);
        const VectorXd g0 = sub.group.cwiseProduct((1.0 - z.array()).matrix());
        const VectorXd g1 = sub.group.cwiseProduct(z);
        term_names = {"group_not_" + interaction->name, "group_" + interaction->name};
        design.add(term_names[0], g0);
        design.add(term_names[1], g1);
        cell.term_counts[term_names[0]] = static_cast<Index>(g0.sum());
        cell.term_counts[term_names[1]] = static_cast<Index>(g1.sum());
      } else {
        term_names = {interaction->name, "group_x_" + interaction->name};
        design.add(term_names[0], z);
        design.add(term_names[1], sub.group.cwiseProduct(z));
        cell.term_counts[term_names[1]] = static_cast<Index>(sub.group.cwiseProduct(z).sum());
      }
    }
    cell.result = finish(sub, spec, fit_design(sub, sub.release, design, spec.court_year_fe, spec.ols));
    for (const auto& t : term_names) {
      const Index j = cell.result.fit.index_of(t);
      if (j >= 0) cell.terms[t] = {cell.result.fit.coefficients(j), cell.result.fit.se(j)};
    }
    out.push_back(std::move(cell));
  }
  return out;
}

Partition partition_by_previous_prosecution(const EstimationSample& sample) {
  Partition p{{"Yes", "No"}, {{}, {}}};
  for (Index i = 0; i < sample.rows(); ++i) p.cells[sample.prev_case(i) == 1.0 ? 0 : 1].push_back(i);
  return p;
}

Partition partition_by_period(const EstimationSample& sample, int last_year_first_period) {
  Partition p;
  p.cells.resize(2);
  int lo[2] = {9999, 9999}, hi[2] = {0, 0};
  for (Index i = 0; i < sample.rows(); ++i) {
    const int y = sample.year[static_cast<std::size_t>(i)];
    const int c = y <= last_year_first_period ? 0 : 1;
    p.cells[static_cast<std::size_t>(c)].push_back(i);
    lo[c] = std::min(lo[c], y);
    hi[c] = std::max(hi[c], y);
  }
  for (int c = 0; c < 2; ++c)
    p.labels.push_back(p.cells[static_cast<std::size_t>(c)].empty()
                           ? (c == 0 ? fmt::format("up to {}", last_year_first_period)
                                     : fmt::format("after {}", last_year_first_period))
                           : fmt::format("{}-{}", lo[c], hi[c]));
  return p;
}

Interaction experienced_judge_interaction(const EstimationSample& sample, int last_year_first_period,
                                          int min_cases) {
  std::unordered_map<int, int> first_period_cases;
  for (Index i = 0; i < sample.rows(); ++i)
    if (sample.year[static_cast<std::size_t>(i)] <= last_year_first_period)
      ++first_period_cases[sample.judge[static_cast<std::size_t>(i)]];
  Interaction inter{"experienced_judge", VectorXd::Zero(sample.rows()), false};
  for (Index i = 0; i < sample.rows(); ++i) {
    const auto it = first_period_cases.find(sample.judge[static_cast<std::size_t>(i)]);
    inter.indicator(i) = it != first_period_cases.end() && it->second >= min_cases;
  }
  return inter;
}

Interaction origin_interaction(const EstimationSample& sample) {
  if (!sample.has_column_data("origin_new"))
    throw DataError("origin split unavailable: input lacks the origin_new column");
  return {"new_origin", sample.origin_new, true};
}

}  // namespace audit::benchmark
