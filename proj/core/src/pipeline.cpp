#include "audit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "audit/benchmark.hpp"
#include "audit/errors.hpp"
#include "audit/ingest.hpp"
#include "audit/kob.hpp"
#include "audit/oster.hpp"
#include "audit/outcome_test.hpp"
#include "audit/parallel.hpp"
#include "audit/selection.hpp"
#include "audit/synthdgp.hpp"
#include "audit/version.hpp"

namespace audit {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  return kExitEstimation;
}

namespace {

using benchmark::BenchmarkResult;

struct Context {
  const AuditConfig& cfg;
  const EstimationSample& sample;
  unsigned inner_threads = 1;
  std::string g0, g1;

  BootstrapOptions bootstrap(int replicates) const {
    BootstrapOptions b;
    b.replicates = replicates;
    b.seed = cfg.seed;
    b.threads = inner_threads;
    return b;
  }
  estimation::OlsOptions ols() const {
    estimation::OlsOptions o;
    o.small_sample_correction = cfg.small_sample_correction;
    o.collinear = cfg.collinear;
    return o;
  }
};

std::string yes_no(bool b) { return b ? "Yes" : "No"; }

// Runs fn into a fresh block; failures are kept in the block.
ReportBlock guarded(std::string key, std::string title, const std::function<void(ReportBlock&)>& fn) {
  ReportBlock b;
  b.key = std::move(key);
  b.title = std::move(title);
  try {
    fn(b);
  } catch (const std::exception& e) {
    b.values.clear();
    b.error = fmt::format("{} (exit {})", e.what(), exit_code_for(e));
    b.put("exit_code", exit_code_for(e));
  }
  return b;
}

// ---------------------------------------------------------------- describe

ReportBlock describe_block(const Context& ctx) {
  return guarded("T1", "Descriptive statistics", [&](ReportBlock& b) {
    const auto t = ingest::describe_sample(ctx.sample);
    TextTable tt({"", ctx.g0, ctx.g1});
    int k = 0;
    for (const auto& r : t.rows) {
      if (r.heading) {
        tt.row({r.label});
        continue;
      }
      const std::string id = fmt::format("row{:02d}", k++);
      b.put(id + ".label", r.label);
      b.put(id + ".group0", r.group0);
      b.put(id + ".group1", r.group1);
      if (r.count)
        tt.row({r.label, fmt::format("{:.0f}", r.group0), fmt::format("{:.0f}", r.group1)});
      else
        tt.row({r.label, cell(r.group0), cell(r.group1)});
    }
    b.text = tt.render();
  });
}

// ---------------------------------------------------------------- benchmark

void put_fit(ReportBlock& b, const std::string& p, const BenchmarkResult& r) {
  b.put(p + ".alpha_d", r.alpha_d);
  b.put(p + ".se", r.se);
  b.put(p + ".mean_dep", r.mean_dep);
  b.put(p + ".r2", r.r_squared);
  b.put(p + ".n_group1", static_cast<long long>(r.n_group1));
  b.put(p + ".n_group0", static_cast<long long>(r.n_group0));
  b.put(p + ".n_clusters", static_cast<long long>(r.fit.n_clusters));
}

struct BenchmarkOutput {
  std::vector<ReportBlock> blocks;
  std::map<int, BenchmarkResult> columns;
};

BenchmarkOutput benchmark_blocks(const Context& ctx) {
  BenchmarkOutput out;
  const auto& cfg = ctx.cfg;
  out.blocks.push_back(guarded("T2", "Benchmark regressions: alpha_D", [&](ReportBlock& b) {
    b.put("options.covariance", std::string("cluster(court_year)"));
    b.put("options.small_sample_correction", cfg.small_sample_correction);
    b.put("options.collinear", cfg.effective.at("benchmark.collinear"));
    std::vector<std::string> head{""};
    std::vector<std::string> coef{"alpha_D"}, se{""}, ind{"Individual controls"}, ja{"Judge/attorney controls"},
        fe{"Court-by-year FE"}, md{"Mean dep. var."}, r2{"R-squared"}, n1{"No. " + ctx.g1}, n0{"No. " + ctx.g0};
    for (int col : cfg.benchmark_columns) {
      auto spec = benchmark::standard_column(col);
      spec.ols = ctx.ols();
      const auto r = benchmark::run_benchmark(ctx.sample, spec);
      out.columns[col] = r;
      const std::string p = fmt::format("col{}", col);
      put_fit(b, p, r);
      for (const auto& d : r.fit.dropped) b.put(p + ".dropped", d);
      head.push_back(fmt::format("({})", col));
      coef.push_back(cell(r.alpha_d));
      se.push_back(se_cell(r.se));
      ind.push_back(yes_no(spec.individual));
      ja.push_back(yes_no(spec.judge_attorney));
      fe.push_back(yes_no(spec.court_year_fe));
      md.push_back(cell(r.mean_dep));
      r2.push_back(cell(r.r_squared));
      n1.push_back(fmt::format("{}", r.n_group1));
      n0.push_back(fmt::format("{}", r.n_group0));
    }
    TextTable tt(head);
    for (auto* row : {&coef, &se}) tt.row(*row);
    tt.rule();
    for (auto* row : {&ind, &ja, &fe}) tt.row(*row);
    tt.rule();
    for (auto* row : {&md, &r2, &n1, &n0}) tt.row(*row);
    b.text = tt.render() + "Standard errors clustered at the court-by-year level in parentheses.\n";
  }));

  if (cfg.benchmark_heterogeneity) {
    out.blocks.push_back(guarded("T4_drivers", "Previous prosecution and judge experience: alpha_D", [&](ReportBlock& b) {
      auto spec = benchmark::standard_column(5);
      spec.ols = ctx.ols();
      TextTable tt({"", "Prev. prosecution: Yes", "Prev. prosecution: No", "Later period x experience"});
      std::vector<std::string> coef{"alpha_D"}, se{""}, inter{"alpha_D x experienced"}, ise{""}, n1{"No. " + ctx.g1};
      const auto prev = benchmark::partition_by_previous_prosecution(ctx.sample);
      for (std::size_t c = 0; c < 2; ++c) {
        const std::string p = c == 0 ? "prev_yes" : "prev_no";
        if (prev.cells[c].empty()) {
          b.put(p + ".status", std::string("empty"));
          coef.push_back("");
          se.push_back("");
          inter.push_back("");
          ise.push_back("");
          n1.push_back("0");
          continue;
        }
        const benchmark::Partition one{{prev.labels[c]}, {prev.cells[c]}};
        const auto r = benchmark::run_benchmark_split(ctx.sample, one, spec).front().result;
        put_fit(b, p, r);
        coef.push_back(cell(r.alpha_d));
        se.push_back(se_cell(r.se));
        inter.push_back("");
        ise.push_back("");
        n1.push_back(fmt::format("{}", r.n_group1));
      }
      const auto periods = benchmark::partition_by_period(ctx.sample, cfg.first_period_last_year);
      if (periods.cells[0].empty() || periods.cells[1].empty()) {
        b.put("experience.status", std::string("needs cases in both periods"));
        for (auto* row : {&coef, &se, &inter, &ise}) row->push_back("");
        n1.push_back("");
      } else {
        const auto exper = benchmark::experienced_judge_interaction(ctx.sample, cfg.first_period_last_year,
                                                                    cfg.experienced_judge_min_cases);
        const benchmark::Partition later{{periods.labels[1]}, {periods.cells[1]}};
        const auto cellr = benchmark::run_benchmark_split(ctx.sample, later, spec, exper).front();
        put_fit(b, "experience", cellr.result);
        b.put("experience.period", periods.labels[1]);
        b.put("experience.min_cases", cfg.experienced_judge_min_cases);
        const auto it = cellr.terms.find("group_x_experienced_judge");
        const double ic = it != cellr.terms.end() ? it->second.first : std::nan("");
        const double is = it != cellr.terms.end() ? it->second.second : std::nan("");
        b.put("experience.interaction", ic);
        b.put("experience.interaction_se", is);
        coef.push_back(cell(cellr.result.alpha_d));
        se.push_back(se_cell(cellr.result.se));
        inter.push_back(cell(ic));
        ise.push_back(se_cell(is));
        n1.push_back(fmt::format("{}", cellr.result.n_group1));
      }
      for (auto* row : {&coef, &se, &inter, &ise, &n1}) tt.row(*row);
      b.text = tt.render() + "Full benchmark controls; court-by-year FE; clustered SEs in parentheses.\n";
    }));
  }

  if (cfg.benchmark_by_crime) {
    out.blocks.push_back(guarded("T5", "Discrimination by type of crime: alpha_D^k", [&](ReportBlock& b) {
      const auto cb = benchmark::run_benchmark_by_crime(ctx.sample, ctx.ols());
      TextTable tt({"Crime category", "alpha_D^k", "SE", "No. " + ctx.g1, "No. " + ctx.g0});
      for (const auto& c : cb.cells) {
        const std::string p = fmt::format("cat{}", c.category);
        b.put(p + ".name", c.name);
        b.put(p + ".identified", c.identified);
        b.put(p + ".coef", c.identified ? c.coef : std::nan(""));
        b.put(p + ".se", c.identified ? c.se : std::nan(""));
        b.put(p + ".n_group1", static_cast<long long>(c.n_group1));
        b.put(p + ".n_group0", static_cast<long long>(c.n_group0));
        tt.row({c.name, c.identified ? cell(c.coef) : "n.i.", c.identified ? se_cell(c.se) : "",
                fmt::format("{}", c.n_group1), fmt::format("{}", c.n_group0)});
      }
      b.put("mean_dep", cb.mean_dep);
      b.text = tt.render() + "n.i.: not identified (no group-1 cases in the category).\n";
    }));

    out.blocks.push_back(guarded("T6", "Discrimination in different periods: alpha_D", [&](ReportBlock& b) {
      auto spec = benchmark::standard_column(5);
      spec.ols = ctx.ols();
      const auto periods = benchmark::partition_by_period(ctx.sample, cfg.first_period_last_year);
      const bool origin = ctx.sample.has_column_data("origin_new");
      TextTable tt({"", "Period", "alpha_D", "SE", "Old origin", "SE", "New origin", "SE"});
      for (std::size_t c = 0; c < 2; ++c) {
        const std::string p = fmt::format("period{}", c + 1);
        b.put(p + ".label", periods.labels[c]);
        if (periods.cells[c].empty()) {
          b.put(p + ".status", std::string("empty"));
          tt.row({p, periods.labels[c], "", "", "", "", "", ""});
          continue;
        }
        const benchmark::Partition one{{periods.labels[c]}, {periods.cells[c]}};
        const auto r = benchmark::run_benchmark_split(ctx.sample, one, spec).front().result;
        put_fit(b, p, r);
        std::vector<std::string> row{p, periods.labels[c], cell(r.alpha_d), se_cell(r.se)};
        if (origin) {
          const auto split =
              benchmark::run_benchmark_split(ctx.sample, one, spec, benchmark::origin_interaction(ctx.sample)).front();
          for (const std::string t : {"group_not_new_origin", "group_new_origin"}) {
            const auto it = split.terms.find(t);
            const double v = it != split.terms.end() ? it->second.first : std::nan("");
            const double s = it != split.terms.end() ? it->second.second : std::nan("");
            b.put(p + "." + t, v);
            b.put(p + "." + t + "_se", s);
            b.put(p + "." + t + "_n", static_cast<long long>(split.term_counts.at(t)));
            row.push_back(split.term_counts.at(t) > 0 ? cell(v) : "n.i.");
            row.push_back(split.term_counts.at(t) > 0 ? se_cell(s) : "");
          }
        } else {
          row.insert(row.end(), {"", "", "", ""});
        }
        tt.row(row);
      }
      b.put("origin_split", origin);
      b.text = tt.render();
    }));
  }
  return out;
}

// ---------------------------------------------------------------- oster

ReportBlock oster_block(const Context& ctx, const std::map<int, BenchmarkResult>& columns) {
  return guarded("T3", "Coefficient stability under proportional selection", [&](ReportBlock& b) {
    const auto& cfg = ctx.cfg;
    const auto u = columns.find(cfg.oster_uncontrolled_column), c = columns.find(cfg.oster_controlled_column);
    if (u == columns.end() || c == columns.end())
      throw EstimationError("oster: the required benchmark columns did not complete");
    const auto in = oster::inputs_from_fits(u->second.fit, c->second.fit);
    std::optional<oster::OsterMoments> moments;
    if (cfg.oster_mode == oster::OsterMode::Exact) {
      const auto& spec = c->second.spec;
      moments = oster::moments_from_sample(ctx.sample, benchmark::benchmark_design(ctx.sample, spec), spec.court_year_fe);
    }
    const auto grid = oster::oster_grid(in, cfg.oster_deltas, cfg.oster_rmaxes, cfg.oster_mode, moments);
    b.put("mode", cfg.effective.at("oster.mode"));
    b.put("beta_uncontrolled", in.beta_uncontrolled);
    b.put("beta_controlled", in.beta_controlled);
    b.put("r2_uncontrolled", in.r2_uncontrolled);
    b.put("r2_controlled", in.r2_controlled);
    std::vector<std::string> head{"R_max \\ delta"};
    for (double d : grid.deltas) head.push_back(fmt::format("{}", d));
    TextTable tt(head);
    bool any_sensitive = false;
    for (std::size_t r = 0; r < grid.rmaxes.size(); ++r) {
      std::vector<std::string> row{fmt::format("{}", grid.rmaxes[r])};
      for (std::size_t d = 0; d < grid.deltas.size(); ++d) {
        const auto& cellv = grid.cells[r][d];
        const std::string p = fmt::format("r{}.d{}", r, d);
        b.put(p + ".delta", cellv.delta);
        b.put(p + ".r_max", cellv.r_max);
        b.put(p + ".beta", cellv.beta);
        b.put(p + ".variant_sensitive", cellv.variant_sensitive);
        for (std::size_t k = 0; k < cellv.roots.size(); ++k) b.put(fmt::format("{}.root{}", p, k), cellv.roots[k]);
        any_sensitive |= cellv.variant_sensitive;
        row.push_back(cell(cellv.beta) + (cellv.variant_sensitive ? "*" : ""));
      }
      tt.row(row);
    }
    b.text = tt.render() +
             fmt::format("Inputs: beta uncontrolled {:.3f} (R2 {:.3f}), controlled {:.3f} (R2 {:.3f}).\n",
                         in.beta_uncontrolled, in.r2_uncontrolled, in.beta_controlled, in.r2_controlled);
    if (any_sensitive) b.text += "* restricted and exact solutions may differ noticeably in this cell.\n";
  });
}

// ---------------------------------------------------------------- selection

std::vector<ReportBlock> selection_blocks(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  selection::SelectionOptions opt;
  opt.bootstrap = ctx.bootstrap(cfg.selection_replicates);
  opt.bootstrap_se = cfg.selection_replicates > 0;
  opt.cluster_bootstrap = cfg.selection_cluster_bootstrap;
  opt.snp.restarts = cfg.snp_restarts;
  opt.snp.seed = cfg.seed;
  opt.snp.threads = ctx.inner_threads;

  auto block_for = [&](const std::string& key, const std::string& title,
                       const std::vector<selection::SelectionModel>& models) {
    return guarded(key, title, [&](ReportBlock& b) {
      b.put("options.bootstrap_replicates", cfg.selection_replicates);
      b.put("options.cluster_bootstrap", cfg.selection_cluster_bootstrap);
      b.put("options.first_stage_fe", std::string("court-year covariates"));
      std::vector<std::string> head{"Model"};
      for (const auto& c : cfg.selection_controls) head.push_back(c.label());
      TextTable tt(head);
      for (auto m : models) {
        const std::string tag = selection::model_tag(m);
        std::vector<std::string> coef{tag}, se{""}, fstat{"Excluded F"};
        std::vector<std::pair<std::string, std::pair<double, double>>> chain;
        for (std::size_t k = 0; k < cfg.selection_controls.size(); ++k) {
          const auto& ctl = cfg.selection_controls[k];
          const auto fit = selection::fit_selection(ctx.sample, m, ctl, opt);
          const std::string p = fmt::format("{}.c{}", tag, k);
          b.put(p + ".controls", ctl.label());
          b.put(p + ".beta_d", fit.beta_d);
          b.put(p + ".se", fit.se);
          b.put(p + ".se_second_stage", fit.se_second_stage);
          b.put(p + ".excluded_f", fit.excluded_f.f_statistic);
          b.put(p + ".excluded_f_p", fit.excluded_f.p_value);
          b.put(p + ".mean_dep", fit.mean_dep);
          b.put(p + ".n_released", static_cast<long long>(fit.n_released));
          if (fit.bootstrap) b.put(p + ".bootstrap_failures", fit.bootstrap->failures);
          if (fit.density) {
            for (int j = 1; j <= 3; ++j) b.put(fmt::format("{}.hermite{}", p, j), fit.density->density.coefficients()[static_cast<std::size_t>(j)]);
            b.put(p + ".density_integral", fit.density->integral_check);
          }
          const double s = std::isfinite(fit.se) ? fit.se : fit.se_second_stage;
          chain.push_back({ctl.label(), {fit.beta_d, s}});
          coef.push_back(cell(fit.beta_d));
          se.push_back(se_cell(fit.se));
          fstat.push_back(cell(fit.excluded_f.f_statistic, 1));
        }
        const auto v = selection::ovb_verdict(chain);
        b.put(tag + ".verdict", v.verdict);
        std::vector<std::string> closure{"Gap closure"};
        for (std::size_t k = 0; k < v.chain.size(); ++k) {
          b.put(fmt::format("{}.c{}.gap_closure", tag, k), v.chain[k].gap_closure);
          closure.push_back(cell(v.chain[k].gap_closure, 2));
        }
        for (auto* row : {&coef, &se, &fstat, &closure}) tt.row(*row);
        tt.row({"Verdict (last column)", v.verdict});
        tt.rule();
      }
      b.text = tt.render() + "Bootstrap standard errors over both steps in parentheses.\n";
    });
  };

  std::vector<ReportBlock> out;
  std::vector<selection::SelectionModel> param, semi;
  for (auto m : cfg.selection_models) (m == selection::SelectionModel::Heckit ? param : semi).push_back(m);
  if (!param.empty()) out.push_back(block_for("T4_selection", "Parametric selection model: beta_D", param));
  if (!semi.empty()) out.push_back(block_for("TA1", "Semiparametric selection model: beta_D", semi));
  return out;
}

// ---------------------------------------------------------------- kob

ReportBlock kob_block(const Context& ctx) {
  return guarded("TC1", "Kitagawa-Oaxaca-Blinder decomposition", [&](ReportBlock& b) {
    const auto& cfg = ctx.cfg;
    b.put("options.sign", std::string("group 1 minus group 0"));
    b.put("options.reference", std::string(cfg.kob_swap_reference ? "group 0 coefficients" : "group 1 coefficients"));
    b.put("options.bootstrap_replicates", cfg.kob_replicates);
    std::vector<std::string> head{""};
    std::vector<std::string> tot{"Total difference"}, tse{""}, ex{"Explained"}, exse{""}, un{"Unexplained"}, unse{""};
    std::vector<std::string> notes;
    for (const auto& variant : cfg.kob_variants) {
      kob::KobOptions o;
      o.residualize = variant == "raw" ? kob::Residualize::None
                      : variant == "pooled" ? kob::Residualize::Pooled
                                            : kob::Residualize::GroupWise;
      o.swap_reference = cfg.kob_swap_reference;
      o.bootstrap_se = cfg.kob_replicates > 0;
      o.bootstrap = ctx.bootstrap(cfg.kob_replicates);
      kob::KOBResult res[2];
      for (int k = 0; k < 2; ++k) {
        const auto outc = k == 0 ? kob::KobOutcome::Release : kob::KobOutcome::Misconduct;
        res[k] = kob::kob(ctx.sample, outc, o);
        const std::string p = fmt::format("{}.{}", k == 0 ? "release" : "misconduct", variant);
        b.put(p + ".total", res[k].total_gap);
        b.put(p + ".explained", res[k].explained);
        b.put(p + ".unexplained", res[k].unexplained);
        b.put(p + ".se_total", res[k].se_total);
        b.put(p + ".se_explained", res[k].se_explained);
        b.put(p + ".se_unexplained", res[k].se_unexplained);
        b.put(p + ".n_group1", static_cast<long long>(res[k].n_group1));
        b.put(p + ".n_group0", static_cast<long long>(res[k].n_group0));
        head.push_back(fmt::format("{} {}", k == 0 ? "Release" : "Misconduct", variant));
        tot.push_back(cell(res[k].total_gap));
        tse.push_back(se_cell(res[k].se_total));
        ex.push_back(cell(res[k].explained));
        exse.push_back(se_cell(res[k].se_explained));
        un.push_back(cell(res[k].unexplained));
        unse.push_back(se_cell(res[k].se_unexplained));
      }
      const auto interp = kob::kob_interpretation(res[0], res[1]);
      b.put(variant + ".verdict", interp.verdict);
      b.put(variant + ".release_unexplained_share", interp.release_unexplained_share);
      b.put(variant + ".misconduct_unexplained_share", interp.misconduct_unexplained_share);
      notes.push_back(fmt::format("{}: {}", variant, interp.verdict));
      if (notes.size() == 1) notes.push_back("Caveat: " + interp.note);
    }
    TextTable tt(head);
    for (auto* row : {&tot, &tse, &ex, &exse, &un, &unse}) tt.row(*row);
    b.text = tt.render();
    for (const auto& n : notes) b.text += n + "\n";
  });
}

// ---------------------------------------------------------------- pbot

std::vector<ReportBlock> pbot_blocks(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<ReportBlock> out;
  std::optional<VectorXd> propensity;
  out.push_back(guarded("T4_outcome", "Outcome tests on released defendants", [&](ReportBlock& b) {
    const auto k = outcome::kpt_test(ctx.sample);
    b.put("kpt.gap", k.gap);
    b.put("kpt.se", k.se);
    b.put("kpt.mean_dep", k.mean_dep);
    b.put("kpt.n_group1", static_cast<long long>(k.n_group1));
    b.put("kpt.n_group0", static_cast<long long>(k.n_group0));
    outcome::PbotOptions o;
    o.marginal_share = cfg.marginal_share;
    o.fe = cfg.pbot_fe;
    o.bootstrap_se = cfg.pbot_replicates > 0;
    o.bootstrap = ctx.bootstrap(cfg.pbot_replicates);
    const auto p = outcome::pbot(ctx.sample, o);
    propensity = p.propensity;
    b.put("pbot.options.marginal_share", cfg.marginal_share);
    b.put("pbot.options.propensity_fe", cfg.effective.at("pbot.propensity_fe"));
    b.put("pbot.gap", p.diff_in_means);
    b.put("pbot.se", p.bootstrap_se);
    b.put("pbot.marginal_mean_misconduct", p.marginal_mean_misconduct);
    b.put("pbot.released_mean_misconduct", p.released_mean_misconduct);
    b.put("pbot.n_marginal_group1", static_cast<long long>(p.n_marginal_group1));
    b.put("pbot.n_marginal_group0", static_cast<long long>(p.n_marginal_group0));
    b.put("pbot.cutoff", p.cutoff);
    TextTable tt({"", "KPT", "P-BOT"});
    tt.row({"Misconduct gap", cell(k.gap), cell(p.diff_in_means)});
    tt.row({"", se_cell(k.se), se_cell(p.bootstrap_se)});
    tt.row({"Mean misconduct", cell(k.mean_dep), cell(p.marginal_mean_misconduct)});
    tt.row({"No. " + ctx.g1, fmt::format("{}", k.n_group1), fmt::format("{}", p.n_marginal_group1)});
    tt.row({"No. " + ctx.g0, fmt::format("{}", k.n_group0), fmt::format("{}", p.n_marginal_group0)});
    b.text = tt.render() + fmt::format("P-BOT marginal set: lowest {:.0f}% of released propensity.\n", 100 * cfg.marginal_share);
  }));
  if (!cfg.pbot_diagnostics) return out;

  out.push_back(guarded("FD1", "Released propensity histograms up to the 20th percentile", [&](ReportBlock& b) {
    if (!propensity) throw EstimationError("propensity model unavailable");
    const auto h = outcome::propensity_histogram(ctx.sample, *propensity);
    b.put("cutoff_p10", h.cutoff_p10);
    b.put("upper_p20", h.upper_p20);
    TextTable tt({"Bin lower", "Bin upper", ctx.g0, ctx.g1});
    for (std::size_t i = 0; i < h.group0.size(); ++i) {
      const std::string p = fmt::format("bin{:02d}", i);
      b.put(p + ".lower", h.edges[i]);
      b.put(p + ".upper", h.edges[i + 1]);
      b.put(p + ".group0", h.group0[i]);
      b.put(p + ".group1", h.group1[i]);
      tt.row({cell(h.edges[i], 4), cell(h.edges[i + 1], 4), cell(h.group0[i], 4), cell(h.group1[i], 4)});
    }
    b.text = tt.render() + fmt::format("10th percentile: {:.4f}\n", h.cutoff_p10);
  }));

  const auto partitions = outcome::default_partitions(ctx.sample);
  for (int k = 0; k < 2; ++k) {
    const bool rel = k == 0;
    out.push_back(guarded(rel ? "TD1" : "TD2",
                          rel ? "Monotonicity in observables (release)" : "Monotonicity in observables (misconduct)",
                          [&](ReportBlock& b) {
                            const auto t = outcome::monotonicity_check(
                                ctx.sample,
                                rel ? outcome::MonotonicityOutcome::Release : outcome::MonotonicityOutcome::Misconduct,
                                partitions);
                            std::vector<std::string> head{"Estimation sample"};
                            for (const auto& p : t.predictors) head.push_back(p);
                            TextTable tt(head);
                            auto emit = [&](const outcome::MonotonicityCell& c, const std::string& id) {
                              b.put(id + ".label", c.label);
                              b.put(id + ".n", static_cast<long long>(c.n));
                              std::vector<std::string> row{c.label}, se{""};
                              for (std::size_t j = 0; j < t.predictors.size(); ++j) {
                                b.put(fmt::format("{}.{}", id, t.predictors[j]), c.coef[j]);
                                b.put(fmt::format("{}.{}_se", id, t.predictors[j]), c.se[j]);
                                if (c.sign_mismatch[j]) b.put(fmt::format("{}.{}_flag", id, t.predictors[j]), true);
                                row.push_back(c.empty ? "empty" : cell(c.coef[j]) + (c.sign_mismatch[j] ? "!" : ""));
                                se.push_back(se_cell(c.se[j]));
                              }
                              tt.row(row);
                              tt.row(se);
                            };
                            emit(t.full, "all");
                            for (std::size_t i = 0; i < t.cells.size(); ++i) emit(t.cells[i], fmt::format("cell{:02d}", i));
                            b.put("consistency", t.consistency);
                            b.put("mismatches", t.mismatches);
                            b.text = tt.render() +
                                     fmt::format("Sign consistency with the full sample: {:.1f}% ({} mismatches, marked !).\n",
                                                 100 * t.consistency, t.mismatches);
                          }));
  }

  out.push_back(guarded("TD3", "Rank correlations", [&](ReportBlock& b) {
    outcome::RankValidityOptions o;
    o.marginal_share = cfg.marginal_share;
    o.year_fe = cfg.rank_validity_year_fe;
    o.threads = ctx.inner_threads;
    const auto t = outcome::rank_validity(ctx.sample, o);
    b.put("options.year_fe", cfg.rank_validity_year_fe);
    TextTable tt({"Excluded predictor", "Share: Spearman", "Share: Kendall", "Score: Spearman", "Score: Kendall",
                  "Cells"});
    for (const auto& r : t.rows) {
      b.put(r.excluded + ".share_spearman", r.marginal_share.spearman);
      b.put(r.excluded + ".share_kendall", r.marginal_share.kendall);
      b.put(r.excluded + ".score_spearman", r.propensity.spearman);
      b.put(r.excluded + ".score_kendall", r.propensity.kendall);
      b.put(r.excluded + ".cells", static_cast<long long>(r.n_cells));
      tt.row({r.excluded, cell(r.marginal_share.spearman), cell(r.marginal_share.kendall),
              cell(r.propensity.spearman), cell(r.propensity.kendall), fmt::format("{}", r.n_cells)});
    }
    b.text = tt.render();
    if (!t.skipped.empty()) {
      b.put("skipped", fmt::format("{}", fmt::join(t.skipped, ",")));
      b.text += fmt::format("Skipped (no split among released): {}.\n", fmt::join(t.skipped, ", "));
    }
  }));
  return out;
}

// ---------------------------------------------------------------- data

std::string file_hash(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fmt::format("{:016x}", fnv1a(ss.str()));
}

void write_latent(const std::filesystem::path& path, const dgp::CaseDataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AuditError("cannot write " + path.string());
  out << "case_id,y_star,p,eta,d,threshold,judge,group\n";
  for (std::size_t r = 0; r < data.records.size(); ++r) {
    const long li = data.latent_index[r];
    if (li < 0) continue;
    const auto& l = data.latent[static_cast<std::size_t>(li)];
    out << data.records[r].case_id << ',' << l.y_star << ',' << format_number(l.p) << ',' << format_number(l.eta)
        << ',' << l.d << ',' << format_number(l.threshold) << ',' << l.judge << ',' << l.group << '\n';
  }
}

ReportBlock simulation_block(const AuditConfig& cfg, const dgp::CaseDataset& data) {
  return guarded("SIM", "Synthetic data", [&](ReportBlock& b) {
    const auto d = dgp::dataset_discrimination(data);
    b.put("records", static_cast<long long>(data.records.size()));
    b.put("latent_cases", static_cast<long long>(data.latent.size()));
    b.put("true_d", d.d);
    b.put("true_d_se", d.se);
    b.put("true_d_given_y0", d.d_given_y0);
    b.put("true_d_given_y1", d.d_given_y1);
    b.put("share_y1", d.share_y1);
    b.put("dgp_seed", static_cast<long long>(cfg.dgp.seed));
    b.text = fmt::format("Records: {}  Planted D: {:.4f} (MC se {:.4f})\n", data.records.size(), d.d, d.se);
  });
}

void check_rerun(const AuditConfig& cfg, RunOutcome& out) {
  const auto path = cfg.output_dir / "report.kv";
  std::ifstream in(path);
  if (!in) return;
  const std::string want = fmt::format("config_hash = {:016x}", cfg.hash());
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("config_hash = ", 0) == 0) {
      if (line != want)
        out.warnings.push_back(fmt::format("{} was written by a different configuration ({}); overwriting",
                                           path.string(), line.substr(14)));
      return;
    }
}

void base_metadata(const AuditConfig& cfg, AuditReport& report) {
  report.metadata.emplace_back("tool_version", kVersion);
  report.metadata.emplace_back("config_hash", fmt::format("{:016x}", cfg.hash()));
  report.metadata.emplace_back("seed", fmt::format("{}", cfg.seed));
  std::string analyses;
  for (const auto& a : cfg.analyses) analyses += (analyses.empty() ? "" : ",") + a;
  report.metadata.emplace_back("analyses", analyses);
  report.metadata.emplace_back("group_labels", cfg.group_labels[0] + "," + cfg.group_labels[1]);
  for (const auto& [k, v] : cfg.effective)
    if (k != "run.threads") report.metadata.emplace_back("config." + k, v);
}

int first_error_code(const AuditReport& r) {
  for (const auto& b : r.blocks)
    if (!b.error.empty())
      for (const auto& [k, v] : b.values)
        if (k == "exit_code") return std::stoi(v);
  return kExitOk;
}

}  // namespace

RunOutcome simulate_only(AuditConfig cfg) {
  if (!cfg.has_dgp) throw ConfigError("simulate requires a [dgp] section");
  cfg.analyses = {"simulate"};
  RunOutcome out;
  check_rerun(cfg, out);
  base_metadata(cfg, out.report);
  std::filesystem::create_directories(cfg.output_dir);
  const auto data = dgp::generate(cfg.dgp, cfg.threads);
  const auto rec = cfg.output_dir / "simulated_records.csv";
  write_case_records(rec, data.records);
  write_latent(cfg.output_dir / "latent_truth.csv", data);
  out.report.metadata.emplace_back("input", "simulated");
  out.report.metadata.emplace_back("input_hash", file_hash(rec));
  out.report.blocks.push_back(simulation_block(cfg, data));
  out.report.write(cfg.output_dir);
  out.exit_code = first_error_code(out.report);
  return out;
}

RunOutcome run_pipeline(AuditConfig cfg) {
  schedule_analyses(cfg);
  RunOutcome out;
  check_rerun(cfg, out);
  base_metadata(cfg, out.report);
  std::filesystem::create_directories(cfg.output_dir);

  std::vector<CaseRecord> records;
  std::filesystem::path input = cfg.input_path;
  if (cfg.wants("simulate")) {
    const auto data = dgp::generate(cfg.dgp, cfg.threads);
    input = cfg.output_dir / "simulated_records.csv";
    write_case_records(input, data.records);
    write_latent(cfg.output_dir / "latent_truth.csv", data);
    out.report.blocks.push_back(simulation_block(cfg, data));
    records = data.records;
    out.report.metadata.emplace_back("input", "simulated");
  } else {
    records = read_case_records(input);
    out.report.metadata.emplace_back("input", input.filename().string());
  }
  out.report.metadata.emplace_back("input_hash", file_hash(input));

  const auto built = ingest::build_sample(records, cfg.rules);
  const auto& L = built.ledger;
  out.report.metadata.emplace_back("ledger.input_rows", fmt::format("{}", L.input_rows));
  for (std::size_t i = 0; i < L.entries.size(); ++i) {
    out.report.metadata.emplace_back(fmt::format("ledger.rule{:02d}", i),
                                     fmt::format("{}: excluded {}, remaining {}", L.entries[i].rule,
                                                 L.entries[i].excluded, L.entries[i].remaining));
  }
  for (std::size_t i = 0; i < L.notes.size(); ++i)
    out.report.metadata.emplace_back(fmt::format("ledger.note{:02d}", i), L.notes[i]);
  out.report.metadata.emplace_back("ledger.output_rows", fmt::format("{}", L.output_rows));

  Context ctx{cfg, built.sample, 1, cfg.group_labels[0], cfg.group_labels[1]};

  // Independent analyses run side by side; oster waits for the benchmark.
  std::vector<std::string> tasks;
  for (const auto& a : cfg.analyses)
    if (a != "simulate" && a != "oster") tasks.push_back(a);
  const unsigned outer = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(tasks.size())));
  ctx.inner_threads = std::max(1u, cfg.threads / outer);
  std::vector<std::vector<ReportBlock>> results(tasks.size());
  std::map<int, BenchmarkResult> columns;
  parallel_for(tasks.size(), outer, [&](std::size_t t) {
    const auto& a = tasks[t];
    if (a == "describe") results[t].push_back(describe_block(ctx));
    else if (a == "benchmark") {
      auto bo = benchmark_blocks(ctx);
      results[t] = std::move(bo.blocks);
      columns = std::move(bo.columns);
    } else if (a == "selection") results[t] = selection_blocks(ctx);
    else if (a == "kob") results[t].push_back(kob_block(ctx));
    else if (a == "pbot") results[t] = pbot_blocks(ctx);
  });
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (auto& b : results[t]) out.report.blocks.push_back(std::move(b));
    if (tasks[t] == "benchmark" && cfg.wants("oster")) out.report.blocks.push_back(oster_block(ctx, columns));
  }
  for (const auto& b : out.report.blocks)
    if (!b.error.empty()) out.warnings.push_back(fmt::format("{} failed: {}", b.key, b.error));

  out.report.write(cfg.output_dir);
  out.exit_code = first_error_code(out.report);
  return out;
}

}  // namespace audit
