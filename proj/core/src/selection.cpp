#include "audit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/normal.hpp"

namespace audit::selection {

using estimation::Design;

std::string model_tag(SelectionModel m) {
  switch (m) {
    case SelectionModel::Heckit: return "heckit";
    case SelectionModel::NeweyI: return "newey_I";
    case SelectionModel::NeweyII: return "newey_II";
    case SelectionModel::NeweyIII: return "newey_III";
  }
  return "?";
}

SelectionModel parse_model(std::string_view tag) {
  for (auto m : {SelectionModel::Heckit, SelectionModel::NeweyI, SelectionModel::NeweyII, SelectionModel::NeweyIII})
    if (model_tag(m) == tag) return m;
  throw ConfigError(fmt::format("unknown selection model '{}'", tag));
}

std::string OutcomeControls::label() const {
  if (individual && court_year_covariates) return "individual+court-year";
  if (individual) return "individual";
  if (court_year_covariates) return "court-year";
  return "none";
}

Design first_stage_design(const EstimationSample& sample) {
  std::vector<std::string> cols{"group"};
  for (const auto& block : {individual_control_names(), court_year_covariate_names(), judge_attorney_names()})
    cols.insert(cols.end(), block.begin(), block.end());
  return make_design(sample, cols, true);
}

std::vector<std::string> outcome_control_names(const OutcomeControls& controls) {
  std::vector<std::string> cols{"group"};
  if (controls.individual)
    for (const auto& c : individual_control_names()) cols.push_back(c);
  if (controls.court_year_covariates)
    for (const auto& c : court_year_covariate_names()) cols.push_back(c);
  return cols;
}

namespace {

// Control functions of the first stage, evaluated on every row.
struct FirstStage {
  Design controls;  // full-length
  std::optional<estimation::ProbitFit> probit;
  std::optional<snp::HermiteDensityFit> density;
};

FirstStage first_stage(const EstimationSample& s, SelectionModel model, const SelectionOptions& opt,
                       const snp::SnpOptions& snp_opt) {
  FirstStage fs;
  const Design X = first_stage_design(s);
  fs.controls = Design(s.rows());
  if (model == SelectionModel::Heckit) {
    fs.probit = estimation::probit_fit(s.release, X, opt.probit);
    VectorXd lambda(s.rows());
    for (Index i = 0; i < s.rows(); ++i) lambda(i) = inverse_mills(fs.probit->linear_index(i));
    fs.controls.add("lambda", lambda);
    return fs;
  }
  fs.density = snp::snp_density_fit(s.release, X, snp_opt);
  const VectorXd& f = fs.density->density_values;
  const double mean = f.mean();
  if ((f.array() - mean).square().mean() <= 1e-14 * std::max(1.0, mean * mean))
    throw EstimationError("control function is constant across rows: no selection variation");
  if (model == SelectionModel::NeweyI) {
    fs.controls.add("cf", f);
    fs.controls.add("cf_sq", f.cwiseProduct(f));
    return fs;
  }
  Design z(s.rows());
  z.add_intercept();
  z.add("cf", f);
  const auto a = estimation::probit_fit(s.release, z, opt.probit);
  VectorXd g(s.rows());
  for (Index i = 0; i < s.rows(); ++i)
    g(i) = model == SelectionModel::NeweyII ? normal_cdf(a.linear_index(i)) : inverse_mills(a.linear_index(i));
  fs.controls.add("cf", g);
  fs.controls.add("cf_sq", g.cwiseProduct(g));
  return fs;
}

SelectionFit estimate(const EstimationSample& s, SelectionModel model, const OutcomeControls& controls,
                      const SelectionOptions& opt, const snp::SnpOptions& snp_opt) {
  SelectionFit out;
  out.model = model;
  out.controls = controls;
  auto fs = first_stage(s, model, opt, snp_opt);
  out.first_stage_names = first_stage_design(s).names;

  const auto released = s.released_rows();
  if (released.empty()) throw DataError("no released rows for the outcome equation");
  const EstimationSample r = s.subset(released);
  Design Z = make_design(r, outcome_control_names(controls), true);
  out.control_functions = fs.controls.select_rows(released);
  for (Index j = 0; j < out.control_functions.cols(); ++j)
    Z.add(out.control_functions.names[static_cast<std::size_t>(j)], out.control_functions.matrix.col(j));
  for (const auto& n : Z.names)
    for (const auto& ex : judge_attorney_names())
      if (n == ex) throw AuditError("exclusion restriction broken: " + n + " in the outcome equation");

  out.second_stage = estimation::ols_fe(r.misconduct, Z, {}, r.court_year, {});
  for (const auto& d : out.second_stage.dropped)
    for (const auto& cf : out.control_functions.names)
      if (d == cf)
        throw EstimationError(fmt::format("control function '{}' is collinear with the outcome controls", cf));
  out.beta_d = out.second_stage.coef("group");
  out.se_second_stage = out.second_stage.stderr_of("group");
  out.se = std::nan("");
  out.mean_dep = r.misconduct.mean();
  out.n_released = r.rows();
  if (fs.probit) {
    out.excluded_f = estimation::wald_f_test(*fs.probit, judge_attorney_names());
    out.first_stage = std::move(fs.probit);
  } else {
    out.density = std::move(fs.density);
  }
  return out;
}

}  // namespace

SelectionFit fit_selection(const EstimationSample& sample, SelectionModel model, const OutcomeControls& controls,
                           const SelectionOptions& options) {
  SelectionFit fit = estimate(sample, model, controls, options, options.snp);
  if (model != SelectionModel::Heckit) {
    // The excluded-variable test is reported from the probit release equation.
    const auto p = estimation::probit_fit(sample.release, first_stage_design(sample), options.probit);
    fit.excluded_f = estimation::wald_f_test(p, judge_attorney_names());
  }
  if (!options.bootstrap_se) return fit;

  snp::SnpOptions rep = options.snp;
  rep.restarts = std::max(1, options.bootstrap_snp_restarts);
  rep.threads = 1;
  if (fit.density) rep.start = fit.density->parameters();
  const BootstrapStatistic stat = [&](std::span<const Index> rows) {
    const EstimationSample s = sample.subset(rows);
    VectorXd v(1);
    v(0) = estimate(s, model, controls, options, rep).beta_d;
    return v;
  };
  std::span<const int> cluster;
  if (options.cluster_bootstrap) cluster = sample.court_year;
  auto b = audit::bootstrap(sample.rows(), stat, options.bootstrap, cluster);
  fit.se = b.se(0);
  fit.bootstrap = std::move(b);
  return fit;
}

SelectionFit heckit(const EstimationSample& sample, const OutcomeControls& controls, const SelectionOptions& options) {
  return fit_selection(sample, SelectionModel::Heckit, controls, options);
}

SelectionFit newey_correction(const EstimationSample& sample, SelectionModel model, const OutcomeControls& controls,
                              const SelectionOptions& options) {
  if (model == SelectionModel::Heckit) throw ConfigError("newey_correction needs model I, II or III");
  return fit_selection(sample, model, controls, options);
}

estimation::FitResult naive_released_ols(const EstimationSample& sample, const OutcomeControls& controls) {
  const EstimationSample r = sample.subset(sample.released_rows());
  return estimation::ols_fe(r.misconduct, make_design(r, outcome_control_names(controls), true), {}, r.court_year,
                            {});
}

OvbVerdict ovb_verdict(const std::vector<std::pair<std::string, std::pair<double, double>>>& estimates,
                       double critical) {
  if (estimates.empty()) throw ConfigError("ovb verdict needs at least the fully controlled estimate");
  OvbVerdict v;
  const double base = std::abs(estimates.front().second.first);
  for (const auto& [label, est] : estimates) {
    VerdictEntry e;
    e.label = label;
    e.beta = est.first;
    e.se = est.second;
    e.t_stat = e.se > 0 ? e.beta / e.se : std::numeric_limits<double>::infinity();
    e.significant = std::abs(e.t_stat) >= critical;
    e.gap_closure = base > 0 ? 1.0 - std::abs(e.beta) / base : 0.0;
    v.chain.push_back(e);
  }
  v.ovb_detected = v.chain.back().significant;
  v.verdict = v.ovb_detected ? "OVB-flagged" : "no-OVB-detected";
  return v;
}

}  // namespace audit::selection
