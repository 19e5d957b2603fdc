#pragma once

// Shared fixtures for the unit tests.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "audit/ingest.hpp"
#include "audit/rng.hpp"
#include "audit/synthdgp.hpp"

namespace testing {

inline Eigen::VectorXd normals(audit::CounterRng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

inline Eigen::MatrixXd normal_matrix(audit::CounterRng& rng, Eigen::Index n, Eigen::Index k) {
  Eigen::MatrixXd m(n, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = rng.normal();
  return m;
}

inline audit::dgp::DGPSpec small_spec(std::size_t n_cases, std::uint64_t seed) {
  audit::dgp::DGPSpec s;
  s.n_cases = n_cases;
  s.n_judges = 40;
  s.n_courts = 8;
  s.n_years = 5;
  s.seed = seed;
  return s;
}

inline audit::EstimationSample sample_from(const audit::dgp::DGPSpec& spec) {
  const auto data = audit::dgp::generate(spec);
  return audit::ingest::build_sample(data.records).sample;
}

}  // namespace testing
