/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <vector>

#include "esmdaloc/core.hpp"
#include "esmdaloc/ensemble.hpp"

namespace esmdaloc::testing {

inline Matrix random_matrix(Rng & rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  fill_standard_normal(rng, m);
  return m;
}

inline int uniform_int(Rng & rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Brute-force (1/(N-1)) sum_j (a_ij - mean a_i)(b_kj - mean b_k).
inline Matrix loop_cross_cov(const Matrix & a, const Matrix & b) {
  const Eigen::Index n = a.cols();
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double ma = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) ma += a(i, j);
    ma /= static_cast<double>(n);
    for (Eigen::Index k = 0; k < b.rows(); ++k) {
      double mb = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) mb += b(k, j);
      mb /= static_cast<double>(n);
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += (a(i, j) - ma) * (b(k, j) - mb);
      out(i, k) = s / static_cast<double>(n - 1);
    }
  }
  return out;
}

inline ParameterSpace identity_space(Eigen::Index n, double variance = 1.0) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("p" + std::to_string(i));
  return ParameterSpace(names, Vector::Zero(n), variance * Matrix::Identity(n, n));
}

inline ObservationSet simple_obs(const Vector & d, const Vector & var) {
  ObservationSet o;
  o.d_obs = d;
  o.error_variance = var;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    o.kind.push_back("d");
    o.location.push_back(std::nullopt);
    o.time_index.push_back(0);
  }
  return o;
}

}  // namespace esmdaloc::testing
