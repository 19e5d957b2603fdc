#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace audit {

/// Base of every error raised by the toolkit.
class AuditError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or model specification (CLI exit status 2).
class ConfigError : public AuditError {
public:
  using AuditError::AuditError;
};

/// Malformed, inconsistent or exhausted input data (CLI exit status 3).
class DataError : public AuditError {
public:
  using AuditError::AuditError;
};

/// A numerical estimator failed (CLI exit status 4).
class EstimationError : public AuditError {
public:
  using AuditError::AuditError;
};

class RankDeficiencyError : public EstimationError {
public:
  RankDeficiencyError(const std::string& what, std::vector<std::string> columns)
      : EstimationError(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

private:
  std::vector<std::string> columns_;
};

class SeparationError : public EstimationError {
public:
  using EstimationError::EstimationError;
};

class ConvergenceError : public EstimationError {
public:
  ConvergenceError(const std::string& what, std::vector<double> trace)
      : EstimationError(what), trace_(std::move(trace)) {}
  /// Objective value per iteration (log-likelihood for ML fits).
  const std::vector<double>& trace() const noexcept { return trace_; }

private:
  std::vector<double> trace_;
};

}  // namespace audit
