#include "audit/snp_density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/normal.hpp"
#include "audit/parallel.hpp"
#include "audit/rng.hpp"

namespace audit::snp {

namespace {

constexpr double kFactorial[4] = {1.0, 1.0, 2.0, 6.0};
/// Probabilists' Hermite polynomials in monomial form.
constexpr double kHermite[4][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {-1, 0, 1, 0}, {0, -3, 0, 1}};

// E[e^k] under N(0,1).
double normal_moment(int k) {
  if (k % 2) return 0.0;
  double m = 1.0;
  for (int j = k - 1; j > 1; j -= 2) m *= j;
  return m;
}

// Integral of poly(e) phi(e) over [x, inf), by J_k = x^(k-1) phi(x) + (k-1) J_(k-2).
double upper_integral(std::span<const double> poly, double x) noexcept {
  const double phi = normal_pdf(x);
  std::array<double, 16> J{};
  const std::size_t n = std::min(poly.size(), J.size());
  double total = 0.0, xp = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0) J[0] = normal_cdf(-x);
    else if (k == 1) J[1] = phi;
    else {
      xp *= x;
      J[k] = xp * phi + static_cast<double>(k - 1) * J[k - 2];
    }
    total += poly[k] * J[k];
  }
  return total;
}

// Integral of poly(e) e^r phi(e) over the real line.
double raw_moment(std::span<const double> poly, int r) noexcept {
  double t = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) t += poly[k] * normal_moment(static_cast<int>(k) + r);
  return t;
}

double total_integral(std::span<const double> poly) noexcept {
  double t = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) t += poly[k] * normal_moment(static_cast<int>(k));
  return t;
}

}  // namespace

double lower_normal_poly_integral(std::span<const double> poly, double x) noexcept {
  if (x > 0) return total_integral(poly) - upper_integral(poly, x);
  // (-inf, x] mirrors [-x, inf) with odd powers negated.
  std::array<double, 16> mirrored{};
  const std::size_t n = std::min(poly.size(), mirrored.size());
  for (std::size_t k = 0; k < n; ++k) mirrored[k] = (k % 2 ? -1.0 : 1.0) * poly[k];
  return upper_integral(std::span<const double>(mirrored.data(), n), -x);
}

HermiteDensity::HermiteDensity(const std::array<double, 3>& a) {
  hermite_ = {1.0, a[0], a[1], a[2]};
  mono_.fill(0.0);
  for (int k = 0; k < 4; ++k)
    for (int j = 0; j < 4; ++j) mono_[static_cast<std::size_t>(j)] += hermite_[static_cast<std::size_t>(k)] * kHermite[k][j];
  square_.fill(0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) square_[i + j] += mono_[i] * mono_[j];
  norm_ = 0.0;
  for (std::size_t k = 0; k < 4; ++k) norm_ += hermite_[k] * hermite_[k] * kFactorial[k];
}

double HermiteDensity::pdf(double e) const noexcept {
  const double p = mono_[0] + e * (mono_[1] + e * (mono_[2] + e * mono_[3]));
  return p * p * normal_pdf(e) / norm_;
}

double HermiteDensity::cdf(double e) const noexcept {
  if (e > 0) return 1.0 - survival(e);
  return std::clamp(lower_normal_poly_integral(square_, e) / norm_, 0.0, 1.0);
}

double HermiteDensity::survival(double e) const noexcept {
  if (e <= 0) return 1.0 - cdf(e);
  return std::clamp(upper_integral(square_, e) / norm_, 0.0, 1.0);
}

double HermiteDensity::mean() const noexcept {
  return raw_moment(square_, 1) / norm_;
}

double HermiteDensity::variance() const noexcept {
  const double mu = mean();
  return raw_moment(square_, 2) / norm_ - mu * mu;
}

double HermiteDensityFit::standardized_pdf(double z) const noexcept {
  return scale * density.pdf(location + scale * z);
}

VectorXd HermiteDensityFit::parameters() const {
  const auto k = index_coefficients.size();
  VectorXd p(k + 3);
  p.head(k) = index_coefficients;
  for (int j = 0; j < 3; ++j) p(k + j) = density.coefficients()[static_cast<std::size_t>(j + 1)];
  return p;
}

double snp_log_likelihood(const VectorXd& y, const Eigen::MatrixXd& X, const VectorXd& params, VectorXd* gradient) {
  const Eigen::Index k = X.cols();
  const HermiteDensity dens({params(k), params(k + 1), params(k + 2)});
  const VectorXd t = X * params.head(k);
  const auto& a = dens.coefficients();
  const auto& sq = dens.squared_poly();
  const double C = dens.normalization();
  const double mu = dens.mean();
  const double m2 = raw_moment(sq, 2) / C;
  const double sigma = std::sqrt(m2 - mu * mu);

  // 2 P(e) He_j(e) in monomial form, for the derivative in a_j.
  std::array<std::array<double, 7>, 3> dpoly{};
  std::array<double, 3> dC{}, dmu{}, dsigma{};
  if (gradient) {
    std::array<double, 4> mono{};
    for (int m = 0; m < 4; ++m)
      for (int j = 0; j < 4; ++j) mono[static_cast<std::size_t>(j)] += a[static_cast<std::size_t>(m)] * kHermite[m][j];
    for (int j = 1; j <= 3; ++j) {
      const auto jj = static_cast<std::size_t>(j - 1);
      for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t v = 0; v < 4; ++v) dpoly[jj][u + v] += 2.0 * mono[u] * kHermite[j][v];
      dC[jj] = 2.0 * a[static_cast<std::size_t>(j)] * kFactorial[j];
      dmu[jj] = (raw_moment(dpoly[jj], 1) - mu * dC[jj]) / C;
      const double dm2 = (raw_moment(dpoly[jj], 2) - m2 * dC[jj]) / C;
      dsigma[jj] = (dm2 - 2.0 * mu * dmu[jj]) / (2.0 * sigma);
    }
    gradient->setZero(k + 3);
  }

  double ll = 0.0;
  constexpr double kFloor = 1e-300;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = mu + sigma * t(i);
    const double F = std::max(dens.cdf(e), kFloor);
    const double S = std::max(dens.survival(e), kFloor);
    const bool one = y(i) == 1.0;
    ll += std::log(one ? F : S);
    if (!gradient) continue;
    const double w = one ? 1.0 / F : -1.0 / S;  // d ll / d F
    const double f = dens.pdf(e);
    gradient->head(k) += (w * f * sigma) * X.row(i).transpose();
    for (std::size_t j = 0; j < 3; ++j) {
      const double A = lower_normal_poly_integral(dpoly[j], e);
      (*gradient)(k + static_cast<Eigen::Index>(j)) +=
          w * ((A - F * dC[j]) / C + f * (dmu[j] + t(i) * dsigma[j]));
    }
  }
  return ll;
}

namespace {

class NegativeMeanLogLikelihood final : public ceres::FirstOrderFunction {
public:
  NegativeMeanLogLikelihood(const VectorXd& y, const Eigen::MatrixXd& X, bool constant)
      : y_(y), X_(X), constant_(constant) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    VectorXd p = Eigen::Map<const VectorXd>(parameters, NumParameters());
    if (constant_) p.tail(3).setZero();
    VectorXd g;
    const double ll = snp_log_likelihood(y_, X_, p, gradient ? &g : nullptr);
    if (!std::isfinite(ll)) return false;
    const double n = static_cast<double>(y_.size());
    cost[0] = -ll / n;
    if (gradient) {
      if (constant_) g.tail(3).setZero();
      Eigen::Map<VectorXd>(gradient, NumParameters()) = -g / n;
    }
    return true;
  }
  int NumParameters() const override { return static_cast<int>(X_.cols() + 3); }

private:
  const VectorXd& y_;
  const Eigen::MatrixXd& X_;
  bool constant_;
};

}  // namespace

HermiteDensityFit snp_density_fit(const VectorXd& y, const estimation::Design& X_in, const SnpOptions& options) {
  if (options.restarts < 1) throw ConfigError("snp: at least one start is required");
  const estimation::Design X = estimation::independent_design(X_in);
  const Eigen::Index k = X.cols();
  VectorXd base(k + 3);
  if (options.start.size() > 0) {
    if (options.start.size() != k + 3) throw ConfigError("snp: start vector has the wrong length");
    base = options.start;
  } else {
    const auto probit = estimation::probit_fit(y, X);
    base.head(k) = probit.coefficients;
    base.tail(3).setZero();
  }

  struct Attempt {
    VectorXd params;
    double ll = -std::numeric_limits<double>::infinity();
    bool usable = false;
    std::string message;
  };
  std::vector<Attempt> attempts(static_cast<std::size_t>(options.restarts));
  parallel_for(attempts.size(), options.threads, [&](std::size_t r) {
    VectorXd p = base;
    if (r > 0) {
      CounterRng rng(options.seed, make_stream(StreamTag::Restart, r));
      for (Eigen::Index j = 0; j < k; ++j) p(j) += 0.1 * rng.normal() * std::max(0.1, std::abs(p(j)));
      for (Eigen::Index j = k; j < k + 3; ++j) p(j) = options.constant_polynomial ? 0.0 : 0.3 * rng.normal();
    }
    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::BFGS;
    opts.max_num_iterations = options.max_iterations;
    opts.function_tolerance = 1e-12;
    opts.gradient_tolerance = 1e-10;
    opts.parameter_tolerance = 1e-12;
    opts.logging_type = ceres::SILENT;
    ceres::GradientProblemSolver::Summary summary;
    ceres::GradientProblem problem(new NegativeMeanLogLikelihood(y, X.matrix, options.constant_polynomial));
    ceres::Solve(opts, problem, p.data(), &summary);
    if (options.constant_polynomial) p.tail(3).setZero();
    auto& at = attempts[r];
    at.params = p;
    at.usable = summary.termination_type == ceres::CONVERGENCE;
    at.ll = -summary.final_cost * static_cast<double>(y.size());
    at.message = summary.message;
  });

  HermiteDensityFit fit;
  const Attempt* best = nullptr;
  for (const auto& at : attempts) {
    fit.restart_log_likelihoods.push_back(at.ll);
    if (at.usable && std::isfinite(at.ll) && (!best || at.ll > best->ll)) best = &at;
  }
  if (!best) {
    std::string detail;
    for (const auto& at : attempts) detail += fmt::format(" [{}]", at.message);
    throw ConvergenceError(fmt::format("snp density fit: no start converged:{}", detail),
                           fit.restart_log_likelihoods);
  }
  const VectorXd& p = best->params;
  fit.names = X.names;
  fit.index_coefficients = p.head(k);
  fit.density = HermiteDensity({p(k), p(k + 1), p(k + 2)});
  fit.location = fit.density.mean();
  fit.scale = std::sqrt(fit.density.variance());
  fit.log_likelihood = best->ll;
  fit.linear_index = X.matrix * fit.index_coefficients;
  fit.density_values.resize(y.size());
  fit.probability.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = fit.location + fit.scale * fit.linear_index(i);
    fit.density_values(i) = fit.scale * fit.density.pdf(e);
    fit.probability(i) = fit.density.cdf(e);
  }
  fit.integral_check = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double z) { return fit.standardized_pdf(z); }, -12.0, 12.0, 15, 1e-9);
  return fit;
}

}  // namespace audit::snp
