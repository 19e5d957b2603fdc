#include "audit/oster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "audit/errors.hpp"

namespace audit::oster {

void OsterInputs::validate() const {
  for (double v : {beta_uncontrolled, beta_controlled, r2_uncontrolled, r2_controlled})
    if (!std::isfinite(v)) throw ConfigError("oster inputs must be finite");
  if (r2_controlled == r2_uncontrolled)
    throw EstimationError("oster: controls leave R-squared unchanged, the adjustment is undefined");
  if (r2_controlled < r2_uncontrolled || r2_controlled > 1.0)
    throw ConfigError(fmt::format("oster: need R° <= R~ <= 1, got {} and {}", r2_uncontrolled, r2_controlled));
}

namespace {

void check_rmax(const OsterInputs& in, double r_max) {
  if (!(r_max >= in.r2_controlled) || r_max > 1.0)
    throw ConfigError(fmt::format("oster: r_max {} outside [R~ = {}, 1]", r_max, in.r2_controlled));
}

}  // namespace

double oster_adjusted_beta(const OsterInputs& in, double delta, double r_max) {
  in.validate();
  check_rmax(in, r_max);
  return in.beta_controlled - delta * (in.beta_uncontrolled - in.beta_controlled) * (r_max - in.r2_controlled) /
                                  (in.r2_controlled - in.r2_uncontrolled);
}

std::vector<double> real_polynomial_roots(std::vector<double> c) {
  double scale = 0.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  while (!c.empty() && std::abs(c.back()) <= 1e-14 * scale) c.pop_back();
  if (c.size() < 2) return {};
  const auto deg = static_cast<Eigen::Index>(c.size() - 1);
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (Eigen::Index i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < deg; ++i) comp(i, deg - 1) = -c[static_cast<std::size_t>(i)] / c.back();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < deg; ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) <= 1e-9 * std::max(1.0, std::abs(z.real()))) out.push_back(z.real());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> oster_exact_roots(const OsterInputs& in, const OsterMoments& m, double delta, double r_max) {
  in.validate();
  check_rmax(in, r_max);
  if (!(m.var_outcome > 0 && m.var_treatment > 0 && m.var_treatment_resid > 0))
    throw ConfigError("oster exact mode needs positive outcome, treatment and residual variances");
  const double b0 = in.beta_uncontrolled - in.beta_controlled;
  const double rm = (r_max - in.r2_controlled) * m.var_outcome;
  const double rt = (in.r2_controlled - in.r2_uncontrolled) * m.var_outcome;
  const double sx = m.var_treatment, tx = m.var_treatment_resid;
  const double c3 = (delta - 1.0) * (tx * sx - tx * tx);
  const double c2 = tx * b0 * sx * (delta - 2.0);
  const double c1 = delta * rm * (sx - tx) - rt * tx - sx * tx * b0 * b0;
  const double c0 = rm * delta * b0 * sx;
  auto nu = real_polynomial_roots({c0, c1, c2, c3});
  std::vector<double> beta;
  for (double v : nu) beta.push_back(in.beta_controlled - v);
  std::sort(beta.begin(), beta.end());
  return beta;
}

OsterCell oster_cell(const OsterInputs& in, double delta, double r_max, OsterMode mode,
                     const std::optional<OsterMoments>& moments) {
  OsterCell c;
  c.delta = delta;
  c.r_max = r_max;
  c.beta = oster_adjusted_beta(in, delta, r_max);
  c.variant_sensitive =
      std::abs(delta) * (r_max - in.r2_controlled) / (in.r2_controlled - in.r2_uncontrolled) > 0.5;
  if (mode == OsterMode::Exact) {
    if (!moments) throw ConfigError("oster exact mode needs sample moments");
    c.roots = oster_exact_roots(in, *moments, delta, r_max);
    if (c.roots.empty()) throw EstimationError(fmt::format("oster: no real root at delta={} r_max={}", delta, r_max));
    c.beta = *std::min_element(c.roots.begin(), c.roots.end(), [&](double a, double b) {
      return std::abs(a - in.beta_controlled) < std::abs(b - in.beta_controlled);
    });
  }
  return c;
}

std::vector<double> default_deltas() { return {-1.0, -0.5, -0.25, 0.25, 0.5, 1.0}; }
std::vector<double> default_rmaxes() { return {0.25, 0.5, 0.75, 1.0}; }

OsterGrid oster_grid(const OsterInputs& in, const std::vector<double>& deltas, const std::vector<double>& rmaxes,
                     OsterMode mode, const std::optional<OsterMoments>& moments) {
  if (deltas.empty() || rmaxes.empty()) throw ConfigError("oster grid axes must be non-empty");
  OsterGrid g{deltas, rmaxes, {}, mode};
  for (double r : rmaxes) {
    auto& row = g.cells.emplace_back();
    for (double d : deltas) row.push_back(oster_cell(in, d, r, mode, moments));
  }
  return g;
}

OsterInputs inputs_from_fits(const estimation::FitResult& uncontrolled, const estimation::FitResult& controlled,
                             std::string_view treatment) {
  if (uncontrolled.n_obs != controlled.n_obs)
    throw ConfigError(fmt::format("oster: fits use {} and {} observations", uncontrolled.n_obs, controlled.n_obs));
  OsterInputs in{uncontrolled.coef(treatment), controlled.coef(treatment), uncontrolled.r_squared,
                 controlled.r_squared};
  in.validate();
  return in;
}

OsterMoments moments_from_sample(const EstimationSample& sample, const estimation::Design& controls,
                                 bool court_year_fe) {
  auto pop_var = [](const VectorXd& v) { return (v.array() - v.mean()).square().mean(); };
  OsterMoments m;
  m.var_outcome = pop_var(sample.release);
  m.var_treatment = pop_var(sample.group);
  const std::vector<std::string> drop{"group"};
  const auto rhs = controls.without_columns(drop);
  std::vector<std::vector<int>> fe;
  if (court_year_fe) fe.push_back(sample.court_year);
  const auto fit = estimation::ols_fe(sample.group, rhs, fe, {}, {});
  m.var_treatment_resid = pop_var(fit.residuals);
  return m;
}

}  // namespace audit::oster
