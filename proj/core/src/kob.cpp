#include "audit/kob.hpp"

#include <cmath>

#include <fmt/format.h>

#include "audit/errors.hpp"

namespace audit::kob {

using estimation::Design;

KOBResult kob_decompose(const VectorXd& y, const Design& controls, const VectorXd& group, bool swap_reference) {
  std::vector<Index> rows[2];
  for (Index i = 0; i < y.size(); ++i) rows[group(i) == 1.0 ? 1 : 0].push_back(i);
  KOBResult r;
  r.swapped = swap_reference;
  r.n_group0 = static_cast<Index>(rows[0].size());
  r.n_group1 = static_cast<Index>(rows[1].size());
  if (rows[0].empty() || rows[1].empty()) throw DataError("kob: both groups need at least one row");

  Design X(y.size());
  X.add_intercept();
  for (Index j = 0; j < controls.cols(); ++j) X.add(controls.names[static_cast<std::size_t>(j)], controls.matrix.col(j));
  r.names = X.names;

  estimation::OlsOptions strict;
  strict.collinear = estimation::CollinearPolicy::Error;
  VectorXd mean[2], beta[2];
  for (int g = 0; g < 2; ++g) {
    const Design Xg = X.select_rows(rows[g]);
    VectorXd yg(static_cast<Index>(rows[g].size()));
    for (std::size_t i = 0; i < rows[g].size(); ++i) yg(static_cast<Index>(i)) = y(rows[g][i]);
    try {
      beta[g] = estimation::ols_fe(yg, Xg, {}, {}, strict).coefficients;
    } catch (const RankDeficiencyError& e) {
      std::string cols;
      for (const auto& c : e.columns()) cols += (cols.empty() ? "" : ", ") + c;
      throw RankDeficiencyError(fmt::format("kob: group {} design is rank deficient in {}", g, cols), e.columns());
    }
    mean[g] = Xg.matrix.colwise().mean().transpose();
  }
  r.mean0 = mean[0];
  r.mean1 = mean[1];
  r.beta0 = beta[0];
  r.beta1 = beta[1];
  r.total_gap = mean[1].dot(beta[1]) - mean[0].dot(beta[0]);
  if (!swap_reference) {
    r.explained = (mean[1] - mean[0]).dot(beta[1]);
    r.unexplained = mean[0].dot(beta[1] - beta[0]);
  } else {
    r.explained = (mean[1] - mean[0]).dot(beta[0]);
    r.unexplained = mean[1].dot(beta[1] - beta[0]);
  }
  return r;
}

namespace {

KOBResult decompose_sample(const EstimationSample& s, KobOutcome outcome, const KobOptions& opt) {
  const EstimationSample sub = outcome == KobOutcome::Misconduct ? s.subset(s.released_rows()) : s;
  if (sub.rows() == 0) throw DataError("kob: no rows for the outcome");
  VectorXd y = outcome == KobOutcome::Misconduct ? sub.misconduct : sub.release;
  Design X = make_design(sub, individual_control_names(), false);

  if (opt.residualize != Residualize::None) {
    Eigen::MatrixXd data(sub.rows(), X.cols() + 1);
    data.col(0) = y;
    data.rightCols(X.cols()) = X.matrix;
    auto absorb = [&](std::span<const Index> rows) {
      Eigen::MatrixXd block(static_cast<Index>(rows.size()), data.cols());
      std::vector<int> key;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        block.row(static_cast<Index>(i)) = data.row(rows[i]);
        key.push_back(sub.court_year[static_cast<std::size_t>(rows[i])]);
      }
      const std::vector<std::vector<int>> keys{estimation::dense_codes(key)};
      estimation::absorb_fixed_effects(block, keys, 1e-12, 100);
      for (std::size_t i = 0; i < rows.size(); ++i) data.row(rows[i]) = block.row(static_cast<Index>(i));
    };
    if (opt.residualize == Residualize::Pooled) {
      absorb(sub.all_rows());
    } else {
      std::vector<Index> rows[2];
      for (Index i = 0; i < sub.rows(); ++i) rows[sub.group(i) == 1.0 ? 1 : 0].push_back(i);
      for (auto& r : rows)
        if (!r.empty()) absorb(r);
    }
    y = data.col(0);
    X.matrix = data.rightCols(X.cols());
  }
  KOBResult r = kob_decompose(y, X, sub.group, opt.swap_reference);
  r.outcome = outcome;
  r.residualized = opt.residualize;
  return r;
}

}  // namespace

KOBResult kob(const EstimationSample& sample, KobOutcome outcome, const KobOptions& options) {
  KOBResult r = decompose_sample(sample, outcome, options);
  if (!options.bootstrap_se) {
    r.se_total = r.se_explained = r.se_unexplained = std::nan("");
    return r;
  }
  const BootstrapStatistic stat = [&](std::span<const Index> rows) {
    const KOBResult b = decompose_sample(sample.subset(rows), outcome, options);
    VectorXd v(3);
    v << b.total_gap, b.explained, b.unexplained;
    return v;
  };
  std::span<const int> cluster;
  if (options.cluster_bootstrap) cluster = sample.court_year;
  const auto b = bootstrap(sample.rows(), stat, options.bootstrap, cluster);
  r.se_total = b.se(0);
  r.se_explained = b.se(1);
  r.se_unexplained = b.se(2);
  return r;
}

KobInterpretation kob_interpretation(const KOBResult& release, const KOBResult& misconduct, double release_share_min,
                                     double misconduct_share_max) {
  if (release.residualized != misconduct.residualized)
    throw ConfigError("kob interpretation needs both decompositions with the same residualization");
  auto share = [](const KOBResult& r) {
    const double denom = std::abs(r.explained) + std::abs(r.unexplained);
    return denom > 0 ? std::abs(r.unexplained) / denom : 0.0;
  };
  KobInterpretation out;
  out.release_unexplained_share = share(release);
  out.misconduct_unexplained_share = share(misconduct);
  out.note =
      "The misconduct decomposition uses released defendants only; if release selects on an unobservable with "
      "little variation among the released, the decomposition cannot reveal it.";
  constexpr double kZero = 1e-8;
  const bool degenerate = std::abs(release.total_gap) < kZero && std::abs(release.explained) < kZero &&
                          std::abs(release.unexplained) < kZero;
  if (degenerate) {
    out.pattern = KobPattern::Indeterminate;
    out.verdict = "indeterminate: no release gap to decompose";
    return out;
  }
  if (out.release_unexplained_share >= release_share_min && out.misconduct_unexplained_share <= misconduct_share_max) {
    out.pattern = KobPattern::Detected;
    out.verdict =
        "pattern-detected: release gap is mostly unexplained while the misconduct gap is explained by observables";
  } else {
    out.pattern = KobPattern::NotDetected;
    out.verdict = out.misconduct_unexplained_share > misconduct_share_max
                      ? "pattern-not-detected: OVB warning, the misconduct gap is also unexplained"
                      : "pattern-not-detected: release gap is mostly explained by observables";
  }
  return out;
}

}  // namespace audit::kob
