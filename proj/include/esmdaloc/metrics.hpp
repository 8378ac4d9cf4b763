/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <optional>
#include <vector>

#include "esmdaloc/ensemble.hpp"
#include "esmdaloc/forward.hpp"

namespace esmdaloc {

/// Per-member (1 / 2N_d) sum_i (d_obs,i - d_ik)^2 / sigma_i^2.
Vector objective(const ObservationSet & obs, const DataBatch & predicted);

/// Mean over the selected parameters of posterior / prior variance. An empty
/// mask selects every parameter.
double normalized_variance(const Ensemble & prior, const Ensemble & posterior, const std::vector<bool> & mask = {});

/// (1 / N_m) sum_i |mean posterior_i - mean prior_i|.
double mean_offset(const Ensemble & prior, const Ensemble & posterior);

struct Divergences {
  double bc = 1.0;  ///< Bhattacharyya coefficient
  double js = 0.0;  ///< Jensen-Shannon divergence, bits
};

struct HistogramOptions {
  int bins = 32;
  double smoothing = 1e-9;  ///< added to every bin probability before renormalizing
};

/// Per-parameter histograms on bins shared by both samples over their pooled
/// range, averaged over parameters.
Divergences distribution_divergences(const Ensemble & prior, const Ensemble & posterior,
                                     const HistogramOptions & options = {});
Divergences distribution_divergences(const Matrix & prior, const Matrix & posterior,
                                     const HistogramOptions & options = {});

struct CorrelationError {
  double frobenius_rmse = 0.0;
  double spectral = 0.0;
};

/// Largest singular value by power iteration on D^T D, relative tolerance 1e-8.
double spectral_norm(const Matrix & m);

CorrelationError correlation_error(const Matrix & localized_corr, const Matrix & reference_corr);

struct GoldStandard {
  Matrix correlation;  ///< N_m x N_d
  Matrix cross_cov;
  Vector var_m;
  Vector var_d;
};

/// Samples n_reference prior members, simulates them and returns the
/// parameter-data correlation with the underlying moments.
GoldStandard gold_standard(const ParameterSpace & space, const ForwardModel & model, Eigen::Index n_reference,
                           std::uint64_t seed, std::size_t workers = 1);
Matrix gold_standard_correlation(const ParameterSpace & space, const ForwardModel & model, Eigen::Index n_reference,
                                 std::uint64_t seed, std::size_t workers = 1);

struct MetricsReport {
  double objective_mean = 0.0;
  double objective_std = 0.0;
  double nv_all = 0.0;
  double nv_dummy = 0.0;   ///< NaN without dummy parameters
  double nv_normal = 0.0;  ///< NaN when every parameter is a dummy
  double mean_offset = 0.0;
  double bc = 1.0;
  double js = 0.0;
};

MetricsReport make_report(const ParameterSpace & space, const ObservationSet & obs, const Ensemble & prior,
                          const Ensemble & posterior, const DataBatch & posterior_predicted);

}  // namespace esmdaloc
