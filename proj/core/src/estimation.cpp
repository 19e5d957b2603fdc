#include "audit/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/normal.hpp"

namespace audit::estimation {

namespace {

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

Index find_name(const std::vector<std::string>& names, std::string_view name) noexcept {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Index>(i);
  return -1;
}

// Sequential rank screen on a Gram matrix.  A column is kept when its squared
// norm after projection on the kept columns is a non-negligible fraction of
// its own squared norm (and of its norm before fixed effects were absorbed).
std::vector<Index> independent_columns(const MatrixXd& gram, const VectorXd& raw_norms, double tol) {
  const Index k = gram.rows();
  std::vector<Index> kept;
  MatrixXd chol = MatrixXd::Zero(k, k);
  for (Index j = 0; j < k; ++j) {
    const double gjj = gram(j, j);
    if (!(gjj > 1e-14 * raw_norms(j)) || gjj <= 0.0) continue;
    const Index m = static_cast<Index>(kept.size());
    VectorXd z(m);
    for (Index a = 0; a < m; ++a) {
      double s = gram(kept[a], j);
      for (Index b = 0; b < a; ++b) s -= chol(a, b) * z(b);
      z(a) = s / chol(a, a);
    }
    const double r = gjj - z.squaredNorm();
    if (r <= tol * gjj) continue;
    for (Index b = 0; b < m; ++b) chol(m, b) = z(b);
    chol(m, m) = std::sqrt(r);
    kept.push_back(j);
  }
  return kept;
}

}  // namespace

Design independent_design(const Design& X, double tolerance, std::vector<std::string>* dropped) {
  const MatrixXd gram = X.matrix.transpose() * X.matrix;
  const auto kept = independent_columns(gram, gram.diagonal(), tolerance);
  if (static_cast<Index>(kept.size()) == X.cols()) return X;
  std::vector<std::string> keep;
  for (Index j = 0, p = 0; j < X.cols(); ++j) {
    if (p < static_cast<Index>(kept.size()) && kept[static_cast<std::size_t>(p)] == j) {
      keep.push_back(X.names[static_cast<std::size_t>(j)]);
      ++p;
    } else if (dropped) {
      dropped->push_back(X.names[static_cast<std::size_t>(j)]);
    }
  }
  return X.select_columns(keep);
}

namespace {

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

void Design::add(std::string name, const VectorXd& column) {
  if (matrix.cols() == 0 && matrix.rows() == 0) matrix.resize(column.size(), 0);
  if (column.size() != matrix.rows())
    throw ConfigError(fmt::format("design column '{}' has {} rows, expected {}", name, column.size(),
                                  matrix.rows()));
  if (contains(name)) throw ConfigError(fmt::format("duplicate design column '{}'", name));
  matrix.conservativeResize(Eigen::NoChange, matrix.cols() + 1);
  matrix.col(matrix.cols() - 1) = column;
  names.push_back(std::move(name));
}

Index Design::index_of(std::string_view name) const noexcept { return find_name(names, name); }

VectorXd Design::column(std::string_view name) const {
  const Index j = index_of(name);
  if (j < 0) throw ConfigError(fmt::format("design has no column '{}'", name));
  return matrix.col(j);
}

Design Design::select_rows(std::span<const Index> rows) const {
  Design out;
  out.names = names;
  out.matrix.resize(static_cast<Index>(rows.size()), matrix.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.matrix.row(static_cast<Index>(i)) = matrix.row(rows[i]);
  return out;
}

Design Design::select_columns(std::span<const std::string> keep) const {
  Design out(rows());
  for (const auto& name : keep) out.add(name, column(name));
  return out;
}

Design Design::without_columns(std::span<const std::string> drop) const {
  Design out(rows());
  for (Index j = 0; j < cols(); ++j)
    if (std::find(drop.begin(), drop.end(), names[j]) == drop.end()) out.add(names[j], matrix.col(j));
  return out;
}

Index FitResult::index_of(std::string_view name) const noexcept { return find_name(names, name); }

double FitResult::coef(std::string_view name) const {
  const Index j = index_of(name);
  if (j < 0) throw EstimationError(fmt::format("coefficient '{}' not estimated", name));
  return coefficients(j);
}

double FitResult::stderr_of(std::string_view name) const {
  const Index j = index_of(name);
  if (j < 0) throw EstimationError(fmt::format("coefficient '{}' not estimated", name));
  return se(j);
}

Index ProbitFit::index_of(std::string_view name) const noexcept { return find_name(names, name); }

double ProbitFit::coef(std::string_view name) const {
  const Index j = index_of(name);
  if (j < 0) throw EstimationError(fmt::format("coefficient '{}' not estimated", name));
  return coefficients(j);
}

std::vector<int> dense_codes(std::span<const int> keys, int* levels) {
  std::map<int, int> code;
  for (int k : keys) code.emplace(k, 0);
  int next = 0;
  for (auto& [key, c] : code) c = next++;
  std::vector<int> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = code[keys[i]];
  if (levels) *levels = next;
  return out;
}

bool absorb_fixed_effects(MatrixXd& data, std::span<const std::vector<int>> keys, double tolerance,
                          int max_iterations) {
  if (keys.empty() || data.size() == 0) return true;
  const Index n = data.rows();
  std::vector<int> levels(keys.size());
  std::vector<VectorXd> counts(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) {
    levels[k] = keys[k].empty() ? 0 : *std::max_element(keys[k].begin(), keys[k].end()) + 1;
    counts[k] = VectorXd::Zero(levels[k]);
    for (Index i = 0; i < n; ++i) counts[k](keys[k][i]) += 1.0;
  }
  for (int it = 0; it < max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t k = 0; k < keys.size(); ++k) {
      MatrixXd sums = MatrixXd::Zero(levels[k], data.cols());
      for (Index i = 0; i < n; ++i) sums.row(keys[k][i]) += data.row(i);
      for (Index g = 0; g < levels[k]; ++g)
        if (counts[k](g) > 0) sums.row(g) /= counts[k](g);
      for (Index i = 0; i < n; ++i) data.row(i) -= sums.row(keys[k][i]);
      change = std::max(change, sums.cwiseAbs().maxCoeff());
    }
    // A single key is removed exactly by one sweep.
    if (keys.size() == 1 || change < tolerance) return true;
  }
  return false;
}

FitResult ols_fe(const VectorXd& y, const Design& X, std::span<const std::vector<int>> fe_keys,
                 std::span<const int> cluster, const OlsOptions& options) {
  const Index n = y.size();
  if (X.rows() != n) throw ConfigError("ols_fe: design and outcome lengths differ");
  if (n == 0) throw DataError("ols_fe: empty sample");
  if (!cluster.empty() && static_cast<Index>(cluster.size()) != n)
    throw ConfigError("ols_fe: cluster key length differs from sample size");

  FitResult fit;
  fit.n_obs = n;
  fit.mean_dependent = y.mean();

  std::vector<std::vector<int>> keys;
  keys.reserve(fe_keys.size());
  Index absorbed = 0;
  for (const auto& key : fe_keys) {
    if (static_cast<Index>(key.size()) != n) throw ConfigError("ols_fe: fixed-effect key length differs");
    int levels = 0;
    keys.push_back(dense_codes(key, &levels));
    absorbed += levels;
  }
  if (!keys.empty()) absorbed -= static_cast<Index>(keys.size()) - 1;
  fit.absorbed_fe_count = absorbed;

  const Index k_all = X.cols();
  MatrixXd data(n, k_all + 1);
  data.col(0) = y;
  if (k_all > 0) data.rightCols(k_all) = X.matrix;
  const VectorXd raw_norms = X.matrix.colwise().squaredNorm().transpose();
  fit.converged = absorb_fixed_effects(data, keys, options.absorb_tolerance, options.absorb_max_iterations);
  if (!fit.converged) fit.warnings.push_back("fixed-effect absorption hit the iteration limit");

  const VectorXd yt = data.col(0);
  const MatrixXd xt_all = data.rightCols(k_all);
  const MatrixXd gram = xt_all.transpose() * xt_all;
  const std::vector<Index> kept = independent_columns(gram, raw_norms, options.collinearity_tolerance);

  std::vector<std::string> dropped;
  for (Index j = 0, p = 0; j < k_all; ++j) {
    if (p < static_cast<Index>(kept.size()) && kept[p] == j) {
      ++p;
      continue;
    }
    dropped.push_back(X.names[j]);
  }
  if (!dropped.empty()) {
    if (options.collinear == CollinearPolicy::Error)
      throw RankDeficiencyError("collinear regressors: " + join(dropped), dropped);
    fit.warnings.push_back("dropped collinear regressors: " + join(dropped));
  }
  fit.dropped = dropped;

  const Index k = static_cast<Index>(kept.size());
  MatrixXd xt(n, k);
  for (Index j = 0; j < k; ++j) {
    xt.col(j) = xt_all.col(kept[j]);
    fit.names.push_back(X.names[kept[j]]);
  }

  fit.df_residual = n - k - absorbed;
  if (fit.df_residual < 0) throw EstimationError("ols_fe: more parameters than observations");

  MatrixXd bread = MatrixXd::Zero(k, k);
  if (k > 0) {
    Eigen::HouseholderQR<MatrixXd> qr(xt);
    fit.coefficients = qr.solve(yt);
    const MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
    bread = rinv * rinv.transpose();
    fit.residuals = yt - xt * fit.coefficients;
  } else {
    fit.coefficients = VectorXd(0);
    fit.residuals = yt;
  }

  const double ssr = fit.residuals.squaredNorm();
  const double tss = (y.array() - fit.mean_dependent).square().sum();
  fit.r_squared = tss > 0 ? std::clamp(1.0 - ssr / tss, 0.0, 1.0) : 0.0;

  CovarianceType type = options.covariance;
  if (!cluster.empty()) type = CovarianceType::Cluster;
  if (fit.df_residual == 0) {
    // Exact fit: coefficients are determined, their variance is not.
    fit.covariance = type;
    fit.vcov = MatrixXd::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
    fit.se = VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
    fit.warnings.push_back("no residual degrees of freedom: covariance undefined");
    return fit;
  }
  if (type == CovarianceType::Cluster && cluster.empty())
    throw ConfigError("ols_fe: clustered covariance requested without a cluster key");
  fit.covariance = type;

  const double nn = static_cast<double>(n);
  if (type == CovarianceType::Classical) {
    fit.vcov = bread * (ssr / static_cast<double>(fit.df_residual));
  } else if (type == CovarianceType::Robust) {
    const MatrixXd scaled = xt.array().colwise() * fit.residuals.array();
    const MatrixXd meat = scaled.transpose() * scaled;
    double factor = options.small_sample_correction ? nn / static_cast<double>(fit.df_residual) : 1.0;
    fit.vcov = bread * meat * bread * factor;
  } else {
    int groups = 0;
    const std::vector<int> codes = dense_codes(cluster, &groups);
    fit.n_clusters = groups;
    if (groups < 2) throw EstimationError("ols_fe: a single cluster leaves the clustered variance undefined");
    MatrixXd scores = MatrixXd::Zero(groups, k);
    for (Index i = 0; i < n; ++i) scores.row(codes[i]) += fit.residuals(i) * xt.row(i);
    const MatrixXd meat = scores.transpose() * scores;
    double factor = 1.0;
    if (options.small_sample_correction) {
      const double g = groups;
      factor = g / (g - 1.0) * (nn - 1.0) / (nn - static_cast<double>(k));
    }
    fit.vcov = bread * meat * bread * factor;
  }
  fit.vcov = symmetrize(fit.vcov);
  fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

double probit_log_likelihood(const VectorXd& y, const MatrixXd& X, const VectorXd& beta) {
  const VectorXd xb = X * beta;
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double q = y(i) > 0.5 ? 1.0 : -1.0;
    ll += log_normal_cdf(q * xb(i));
  }
  return ll;
}

VectorXd probit_score(const VectorXd& y, const MatrixXd& X, const VectorXd& beta) {
  const VectorXd xb = X * beta;
  VectorXd w(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double q = y(i) > 0.5 ? 1.0 : -1.0;
    w(i) = q * inverse_mills(q * xb(i));
  }
  return X.transpose() * w;
}

MatrixXd probit_hessian(const VectorXd& y, const MatrixXd& X, const VectorXd& beta) {
  const VectorXd xb = X * beta;
  VectorXd w(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double q = y(i) > 0.5 ? 1.0 : -1.0;
    const double lam = inverse_mills(q * xb(i));
    w(i) = lam * (lam + q * xb(i));
  }
  return -(X.transpose() * w.asDiagonal() * X);
}

ProbitFit probit_fit(const VectorXd& y, const Design& X_in, const ProbitOptions& options) {
  const Index n = y.size();
  if (X_in.rows() != n) throw ConfigError("probit_fit: design and outcome lengths differ");
  Index ones = 0;
  for (Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw DataError("probit_fit: outcome must be binary");
    ones += y(i) == 1.0;
  }
  if (ones == 0 || ones == n) throw EstimationError("probit_fit: outcome has a single class");

  std::vector<std::string> dropped;
  const Design X = independent_design(X_in, 1e-9, &dropped);
  if (!dropped.empty() && options.collinear == CollinearPolicy::Error)
    throw RankDeficiencyError("probit_fit: collinear regressors: " + join(dropped), dropped);
  const Index k = X.cols();

  // Quasi-complete separation by a binary regressor: one level of the dummy
  // determines the outcome.
  for (Index j = 0; j < k; ++j) {
    const auto col = X.matrix.col(j);
    bool binary = true;
    Index n1 = 0;
    for (Index i = 0; i < n && binary; ++i) {
      binary = col(i) == 0.0 || col(i) == 1.0;
      n1 += col(i) == 1.0;
    }
    if (!binary || n1 == 0 || n1 == n) continue;
    for (double level : {0.0, 1.0}) {
      Index cnt = 0, pos = 0;
      for (Index i = 0; i < n; ++i)
        if (col(i) == level) {
          ++cnt;
          pos += y(i) == 1.0;
        }
      if (cnt > 0 && (pos == 0 || pos == cnt))
        throw SeparationError(fmt::format("probit_fit: '{}' = {} perfectly predicts the outcome", X.names[j],
                                          level));
    }
  }

  VectorXd beta = options.start.size() == k ? options.start : VectorXd::Zero(k);
  double ll = probit_log_likelihood(y, X.matrix, beta);
  std::vector<double> trace{ll};
  ProbitFit fit;
  fit.names = X.names;
  fit.dropped = std::move(dropped);
  bool done = false;
  int it = 0;
  // Largest index contribution a coefficient can make, so the bound is scale free.
  const VectorXd col_scale = X.matrix.cwiseAbs().colwise().maxCoeff().transpose();
  for (; it < options.max_iterations && !done; ++it) {
    const VectorXd g = probit_score(y, X.matrix, beta);
    if (g.cwiseAbs().maxCoeff() < options.score_tolerance) {
      done = true;
      break;
    }
    const MatrixXd info = -probit_hessian(y, X.matrix, beta);
    Eigen::LDLT<MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) throw EstimationError("probit_fit: singular information matrix");
    const VectorXd step = ldlt.solve(g);
    double scale = 1.0;
    VectorXd next = beta + step;
    double ll_next = probit_log_likelihood(y, X.matrix, next);
    for (int h = 0; h < 40 && !(ll_next >= ll - 1e-12 * std::abs(ll)); ++h) {
      scale *= 0.5;
      next = beta + scale * step;
      ll_next = probit_log_likelihood(y, X.matrix, next);
    }
    if ((next.cwiseAbs().array() * col_scale.array()).maxCoeff() > options.separation_bound && ll_next > ll)
      throw SeparationError("probit_fit: diverging coefficient (perfect separation)");
    const double rel = std::abs(ll_next - ll) / std::max(std::abs(ll), 1e-300);
    beta = next;
    ll = ll_next;
    trace.push_back(ll);
    if (rel < options.relative_ll_tolerance) done = true;
  }
  if (!done) {
    const VectorXd g = probit_score(y, X.matrix, beta);
    if (g.cwiseAbs().maxCoeff() < options.score_tolerance) done = true;
  }
  if (!done)
    throw ConvergenceError(fmt::format("probit_fit: no convergence after {} iterations", options.max_iterations),
                           trace);

  fit.coefficients = beta;
  fit.log_likelihood = ll;
  fit.iterations = it;
  fit.converged = true;
  fit.linear_index = X.matrix * beta;
  fit.predicted_probability = fit.linear_index.unaryExpr([](double v) { return normal_cdf(v); });
  fit.score_max_norm = probit_score(y, X.matrix, beta).cwiseAbs().maxCoeff();

  // Complete separation: every observation fitted with certainty.
  if (ll > -1e-6 * static_cast<double>(n))
    throw SeparationError("probit_fit: outcome perfectly classified (complete separation)");

  const MatrixXd info = -probit_hessian(y, X.matrix, beta);
  Eigen::LDLT<MatrixXd> ldlt(info);
  fit.vcov = symmetrize(ldlt.solve(MatrixXd::Identity(k, k)));
  fit.se = fit.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

namespace {

WaldResult wald_core(const VectorXd& coefs, const MatrixXd& vcov, const std::vector<std::string>& names,
                     std::span<const std::string> subset, double df_denominator) {
  if (subset.empty()) throw ConfigError("wald_f_test: empty coefficient subset");
  const Index q = static_cast<Index>(subset.size());
  std::vector<Index> idx;
  for (const auto& s : subset) {
    const Index j = find_name(names, s);
    if (j < 0) throw EstimationError(fmt::format("wald_f_test: coefficient '{}' not estimated", s));
    idx.push_back(j);
  }
  VectorXd b(q);
  MatrixXd v(q, q);
  for (Index a = 0; a < q; ++a) {
    b(a) = coefs(idx[a]);
    for (Index c = 0; c < q; ++c) v(a, c) = vcov(idx[a], idx[c]);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0) || eig.eigenvalues().minCoeff() <= 1e-14 * top)
    throw EstimationError("wald_f_test: singular covariance of the tested coefficients");
  const double w = b.dot(v.ldlt().solve(b));
  WaldResult out;
  out.df_numerator = static_cast<int>(q);
  out.df_denominator = df_denominator;
  out.f_statistic = w / static_cast<double>(q);
  if (std::isinf(df_denominator)) {
    boost::math::chi_squared_distribution<double> chi(static_cast<double>(q));
    out.p_value = boost::math::cdf(boost::math::complement(chi, w));
  } else {
    boost::math::fisher_f_distribution<double> f(static_cast<double>(q), df_denominator);
    out.p_value = boost::math::cdf(boost::math::complement(f, out.f_statistic));
  }
  return out;
}

}  // namespace

WaldResult wald_f_test(const FitResult& fit, std::span<const std::string> subset) {
  const double df2 = fit.covariance == CovarianceType::Cluster ? static_cast<double>(fit.n_clusters - 1)
                                                               : static_cast<double>(fit.df_residual);
  return wald_core(fit.coefficients, fit.vcov, fit.names, subset, df2);
}

WaldResult wald_f_test(const ProbitFit& fit, std::span<const std::string> subset) {
  return wald_core(fit.coefficients, fit.vcov, fit.names, subset, std::numeric_limits<double>::infinity());
}

}  // namespace audit::estimation
