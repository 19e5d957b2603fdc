#pragma once

namespace audit {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// log Phi(x), accurate in the far left tail.
double log_normal_cdf(double x) noexcept;
/// Inverse of the standard normal CDF; p must lie in (0, 1).
double normal_quantile(double p);

/// Inverse Mills ratio lambda(x) = phi(x) / Phi(x).
///
/// For x <= -8 the ratio is evaluated by the Laplace continued fraction of
/// the Mills ratio instead of dividing two vanishing quantities, so the
/// result stays accurate (and finite) far into the left tail.
double inverse_mills(double x) noexcept;

double logistic_cdf(double x) noexcept;
double logistic_quantile(double p);

}  // namespace audit
