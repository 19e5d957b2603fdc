#include "audit/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/parallel.hpp"

namespace audit {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string AuditConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : effective)
    if (k != "run.threads") out += k + " = " + v + "\n";
  return out;
}

std::uint64_t AuditConfig::hash() const { return fnv1a(canonical_text()); }

bool AuditConfig::wants(const std::string& analysis) const {
  return std::find(analyses.begin(), analyses.end(), analysis) != analyses.end();
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  if (boost::algorithm::trim_copy(value).empty()) return parts;
  boost::algorithm::split(parts, value, boost::algorithm::is_any_of(","));
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

int positive(const std::string& key, long long v, long long min = 1) {
  if (v < min) throw ConfigError(fmt::format("{} must be at least {}", key, min));
  return static_cast<int>(v);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split_list(v)) out.push_back(to_double(key, p));
  if (out.empty()) throw ConfigError(key + " must not be empty");
  return out;
}

selection::OutcomeControls parse_controls(const std::string& v) {
  if (v == "none") return {false, false};
  if (v == "individual") return {true, false};
  if (v == "court_year") return {false, true};
  if (v == "both") return {true, true};
  throw ConfigError(fmt::format("selection.controls: unknown control set '{}'", v));
}

std::string controls_name(const selection::OutcomeControls& c) {
  if (c.individual && c.court_year_covariates) return "both";
  if (c.individual) return "individual";
  if (c.court_year_covariates) return "court_year";
  return "none";
}

template <class T>
std::string join(const std::vector<T>& v, auto&& fmt_one) {
  std::string out;
  for (const auto& x : v) out += (out.empty() ? "" : ",") + fmt_one(x);
  return out;
}

}  // namespace

AuditConfig parse_config(const std::map<std::string, std::string>& settings) {
  AuditConfig c;
  c.threads = default_thread_count();
  std::map<std::string, std::string> dgp_kv;
  for (const auto& [key, v] : settings) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw ConfigError(fmt::format("setting '{}' has no section", key));
    const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
    auto& r = c.rules;
    if (section == "dgp") {
      dgp_kv[name] = v;
      c.has_dgp = true;
      continue;
    }
    if (key == "run.input") c.input_path = v;
    else if (key == "run.output_dir") c.output_dir = v;
    else if (key == "run.analyses") {
      c.analyses.clear();
      for (const auto& a : split_list(v)) {
        if (std::find(kAnalysisNames.begin(), kAnalysisNames.end(), a) == kAnalysisNames.end())
          throw ConfigError(fmt::format("run.analyses: unknown analysis '{}'", a));
        c.analyses.push_back(a);
      }
    } else if (key == "run.group_labels") {
      c.group_labels = split_list(v);
      if (c.group_labels.size() != 2) throw ConfigError("run.group_labels needs two labels");
    } else if (key == "run.seed") c.seed = static_cast<std::uint64_t>(positive(key, to_int(key, v), 0));
    else if (key == "run.threads") c.threads = static_cast<unsigned>(positive(key, to_int(key, v)));
    else if (key == "restrictions.drop_inconsistent_dates") r.drop_inconsistent_dates = to_bool(key, v);
    else if (key == "restrictions.drop_overlong_detention") r.drop_overlong_detention = to_bool(key, v);
    else if (key == "restrictions.exclude_summons") r.exclude_summons = to_bool(key, v);
    else if (key == "restrictions.exclude_juvenile") r.exclude_juvenile = to_bool(key, v);
    else if (key == "restrictions.exclude_private_attorney") r.exclude_private_attorney = to_bool(key, v);
    else if (key == "restrictions.max_case_length_days") r.max_case_length_days = positive(key, to_int(key, v), 0);
    else if (key == "restrictions.deduplicate_crimes") r.deduplicate_crimes = to_bool(key, v);
    else if (key == "restrictions.min_crime_detention_rate") r.min_crime_detention_rate = to_double(key, v);
    else if (key == "restrictions.min_judge_cases") r.min_judge_cases = positive(key, to_int(key, v), 0);
    else if (key == "restrictions.min_attorney_prior_cases") r.min_attorney_prior_cases = positive(key, to_int(key, v), 0);
    else if (key == "restrictions.history_start_date") {
      if (v.empty()) r.history_start_date.reset();
      else r.history_start_date = Date::parse(v);
    } else if (key == "benchmark.columns") {
      c.benchmark_columns.clear();
      for (const auto& p : split_list(v)) {
        const auto col = to_int(key, p);
        if (col < 1 || col > 5) throw ConfigError(fmt::format("benchmark.columns: column {} outside 1..5", col));
        c.benchmark_columns.push_back(static_cast<int>(col));
      }
      if (c.benchmark_columns.empty()) throw ConfigError("benchmark.columns must not be empty");
    } else if (key == "benchmark.small_sample_correction") c.small_sample_correction = to_bool(key, v);
    else if (key == "benchmark.collinear") {
      if (v == "drop") c.collinear = estimation::CollinearPolicy::Drop;
      else if (v == "error") c.collinear = estimation::CollinearPolicy::Error;
      else throw ConfigError("benchmark.collinear must be drop or error");
    } else if (key == "benchmark.by_crime") c.benchmark_by_crime = to_bool(key, v);
    else if (key == "benchmark.heterogeneity") c.benchmark_heterogeneity = to_bool(key, v);
    else if (key == "benchmark.first_period_last_year") c.first_period_last_year = static_cast<int>(to_int(key, v));
    else if (key == "benchmark.experienced_judge_min_cases") c.experienced_judge_min_cases = positive(key, to_int(key, v));
    else if (key == "oster.deltas") c.oster_deltas = to_doubles(key, v);
    else if (key == "oster.rmaxes") c.oster_rmaxes = to_doubles(key, v);
    else if (key == "oster.mode") {
      if (v == "restricted") c.oster_mode = oster::OsterMode::Restricted;
      else if (v == "exact") c.oster_mode = oster::OsterMode::Exact;
      else throw ConfigError("oster.mode must be restricted or exact");
    } else if (key == "oster.uncontrolled_column") c.oster_uncontrolled_column = static_cast<int>(to_int(key, v));
    else if (key == "oster.controlled_column") c.oster_controlled_column = static_cast<int>(to_int(key, v));
    else if (key == "selection.models") {
      c.selection_models.clear();
      for (const auto& p : split_list(v)) c.selection_models.push_back(selection::parse_model(p));
      if (c.selection_models.empty()) throw ConfigError("selection.models must not be empty");
    } else if (key == "selection.controls") {
      c.selection_controls.clear();
      for (const auto& p : split_list(v)) c.selection_controls.push_back(parse_controls(p));
      if (c.selection_controls.empty()) throw ConfigError("selection.controls must not be empty");
    } else if (key == "selection.bootstrap_replicates") c.selection_replicates = positive(key, to_int(key, v), 0);
    else if (key == "selection.cluster_bootstrap") c.selection_cluster_bootstrap = to_bool(key, v);
    else if (key == "selection.snp_restarts") c.snp_restarts = positive(key, to_int(key, v));
    else if (key == "kob.bootstrap_replicates") c.kob_replicates = positive(key, to_int(key, v), 0);
    else if (key == "kob.variants") {
      c.kob_variants = split_list(v);
      for (const auto& p : c.kob_variants)
        if (p != "raw" && p != "pooled" && p != "groupwise")
          throw ConfigError(fmt::format("kob.variants: unknown variant '{}'", p));
    } else if (key == "kob.swap_reference") c.kob_swap_reference = to_bool(key, v);
    else if (key == "pbot.marginal_share") {
      c.marginal_share = to_double(key, v);
      if (!(c.marginal_share > 0 && c.marginal_share <= 1)) throw ConfigError("pbot.marginal_share outside (0, 1]");
    } else if (key == "pbot.bootstrap_replicates") c.pbot_replicates = positive(key, to_int(key, v), 0);
    else if (key == "pbot.propensity_fe") {
      if (v == "covariates") c.pbot_fe = outcome::PropensityFe::CourtYearCovariates;
      else if (v == "dummies") c.pbot_fe = outcome::PropensityFe::CourtYearDummies;
      else throw ConfigError("pbot.propensity_fe must be covariates or dummies");
    } else if (key == "pbot.diagnostics") c.pbot_diagnostics = to_bool(key, v);
    else if (key == "pbot.rank_validity_year_fe") c.rank_validity_year_fe = to_bool(key, v);
    else throw ConfigError(fmt::format("unknown setting '{}'", key));
  }
  for (int b : {c.selection_replicates, c.kob_replicates, c.pbot_replicates})
    if (b != 0 && b < 50) throw ConfigError("bootstrap replicates must be 0 (off) or at least 50");
  if (c.has_dgp) {
    dgp::apply_kv(c.dgp, dgp_kv);
    if (!dgp_kv.contains("seed")) c.dgp.seed = c.seed;
    c.dgp.validate();
  }

  // Effective settings: every tunable with its final value.
  auto& e = c.effective;
  e["run.input"] = c.input_path;
  e["run.output_dir"] = c.output_dir.string();
  e["run.analyses"] = join(c.analyses, [](const std::string& s) { return s; });
  e["run.group_labels"] = join(c.group_labels, [](const std::string& s) { return s; });
  e["run.seed"] = fmt::format("{}", c.seed);
  e["run.threads"] = fmt::format("{}", c.threads);
  const auto& r = c.rules;
  e["restrictions.drop_inconsistent_dates"] = fmt::format("{}", r.drop_inconsistent_dates);
  e["restrictions.drop_overlong_detention"] = fmt::format("{}", r.drop_overlong_detention);
  e["restrictions.exclude_summons"] = fmt::format("{}", r.exclude_summons);
  e["restrictions.exclude_juvenile"] = fmt::format("{}", r.exclude_juvenile);
  e["restrictions.exclude_private_attorney"] = fmt::format("{}", r.exclude_private_attorney);
  e["restrictions.max_case_length_days"] = fmt::format("{}", r.max_case_length_days);
  e["restrictions.deduplicate_crimes"] = fmt::format("{}", r.deduplicate_crimes);
  e["restrictions.min_crime_detention_rate"] = fmt::format("{}", r.min_crime_detention_rate);
  e["restrictions.min_judge_cases"] = fmt::format("{}", r.min_judge_cases);
  e["restrictions.min_attorney_prior_cases"] = fmt::format("{}", r.min_attorney_prior_cases);
  e["restrictions.history_start_date"] = r.history_start_date ? r.history_start_date->iso() : "";
  e["benchmark.columns"] = join(c.benchmark_columns, [](int x) { return std::to_string(x); });
  e["benchmark.small_sample_correction"] = fmt::format("{}", c.small_sample_correction);
  e["benchmark.collinear"] = c.collinear == estimation::CollinearPolicy::Drop ? "drop" : "error";
  e["benchmark.by_crime"] = fmt::format("{}", c.benchmark_by_crime);
  e["benchmark.heterogeneity"] = fmt::format("{}", c.benchmark_heterogeneity);
  e["benchmark.first_period_last_year"] = fmt::format("{}", c.first_period_last_year);
  e["benchmark.experienced_judge_min_cases"] = fmt::format("{}", c.experienced_judge_min_cases);
  e["oster.deltas"] = join(c.oster_deltas, [](double x) { return fmt::format("{}", x); });
  e["oster.rmaxes"] = join(c.oster_rmaxes, [](double x) { return fmt::format("{}", x); });
  e["oster.mode"] = c.oster_mode == oster::OsterMode::Restricted ? "restricted" : "exact";
  e["oster.uncontrolled_column"] = fmt::format("{}", c.oster_uncontrolled_column);
  e["oster.controlled_column"] = fmt::format("{}", c.oster_controlled_column);
  e["selection.models"] = join(c.selection_models, [](auto m) { return selection::model_tag(m); });
  e["selection.controls"] = join(c.selection_controls, [](const auto& x) { return controls_name(x); });
  e["selection.bootstrap_replicates"] = fmt::format("{}", c.selection_replicates);
  e["selection.cluster_bootstrap"] = fmt::format("{}", c.selection_cluster_bootstrap);
  e["selection.snp_restarts"] = fmt::format("{}", c.snp_restarts);
  e["kob.bootstrap_replicates"] = fmt::format("{}", c.kob_replicates);
  e["kob.variants"] = join(c.kob_variants, [](const std::string& s) { return s; });
  e["kob.swap_reference"] = fmt::format("{}", c.kob_swap_reference);
  e["pbot.marginal_share"] = fmt::format("{}", c.marginal_share);
  e["pbot.bootstrap_replicates"] = fmt::format("{}", c.pbot_replicates);
  e["pbot.propensity_fe"] = c.pbot_fe == outcome::PropensityFe::CourtYearCovariates ? "covariates" : "dummies";
  e["pbot.diagnostics"] = fmt::format("{}", c.pbot_diagnostics);
  e["pbot.rank_validity_year_fe"] = fmt::format("{}", c.rank_validity_year_fe);
  if (c.has_dgp)
    for (const auto& [k, v] : dgp::to_kv(c.dgp)) e["dgp." + k] = v;
  return c;
}

std::map<std::string, std::string> read_config_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("config '{}': {}", path.string(), e.message()));
  }
  std::map<std::string, std::string> out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(fmt::format("config '{}': key '{}' outside a section", path.string(), section));
    for (const auto& [key, value] : body) out[section + "." + key] = boost::algorithm::trim_copy(value.data());
  }
  return out;
}

AuditConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  auto settings = read_config_settings(path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not section.key=value", o));
    settings[boost::algorithm::trim_copy(o.substr(0, eq))] = boost::algorithm::trim_copy(o.substr(eq + 1));
  }
  return parse_config(settings);
}

void schedule_analyses(AuditConfig& c) {
  std::set<std::string> want(c.analyses.begin(), c.analyses.end());
  if (want.empty()) throw ConfigError("run.analyses is empty");
  if (want.contains("oster")) {
    const auto has = [&](int col) {
      return std::find(c.benchmark_columns.begin(), c.benchmark_columns.end(), col) != c.benchmark_columns.end();
    };
    if (c.benchmark_columns.size() < 2 || !has(c.oster_uncontrolled_column) || !has(c.oster_controlled_column) ||
        c.oster_uncontrolled_column == c.oster_controlled_column)
      throw ConfigError(fmt::format(
          "oster requires benchmark columns {} and {} (benchmark.columns = {}); add both to benchmark.columns",
          c.oster_uncontrolled_column, c.oster_controlled_column, c.effective["benchmark.columns"]));
    want.insert("benchmark");
  }
  if (c.input_path.empty() && !want.contains("simulate")) {
    if (!c.has_dgp) throw ConfigError("no run.input given and no [dgp] section to simulate from");
    want.insert("simulate");
  }
  if (want.contains("simulate") && !c.has_dgp) throw ConfigError("simulate requires a [dgp] section");
  c.analyses.clear();
  for (const auto& a : kAnalysisNames)
    if (want.contains(a)) c.analyses.push_back(a);
}

}  // namespace audit
