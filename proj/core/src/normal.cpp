#include "audit/normal.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "audit/errors.hpp"

namespace audit {

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2)); }

double log_normal_cdf(double x) noexcept {
  if (x > -5.0) return std::log(normal_cdf(x));
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(inverse_mills(x));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw EstimationError("normal_quantile: probability outside (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double inverse_mills(double x) noexcept {
  if (x > -8.0) return normal_pdf(x) / normal_cdf(x);
  // lambda(-t) = t + 1/(t + 2/(t + 3/(t + ...))), evaluated bottom-up.
  const double t = -x;
  double tail = t;
  for (int k = 80; k >= 1; --k) tail = t + k / tail;
  return tail;
}

double logistic_cdf(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logistic_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw EstimationError("logistic_quantile: probability outside (0, 1)");
  return std::log(p / (1.0 - p));
}

}  // namespace audit
