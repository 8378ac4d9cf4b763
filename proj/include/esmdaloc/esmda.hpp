/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string>
#include <vector>

#include "esmdaloc/ensemble.hpp"
#include "esmdaloc/forward.hpp"
#include "esmdaloc/localization.hpp"
#include "esmdaloc/surrogate.hpp"

namespace esmdaloc {

struct EsmdaConfig {
  int n_assimilations = 4;
  /// Explicit inflation coefficients; empty selects the constant schedule.
  std::vector<double> inflation;
  /// Drives the prior ensemble and the observation perturbations.
  std::uint64_t seed = 0;
  /// Drives surrogate training and the super-ensemble.
  std::uint64_t localization_seed = 0;
  LocalizationConfig localization;
  Eigen::Index super_ensemble_size = 5000;
  RegressorSpec regressor = RegressorSpec::defaults(RegressorKind::gbdt);
  std::size_t workers = 1;

  /// The inflation coefficients actually used, validated.
  std::vector<double> alphas() const;
  void validate() const;
};

/// Constant schedule alpha_k = n.
std::vector<double> inflation_schedule(int n);

/// Throws unless every alpha > 0 and sum 1/alpha = 1 within 1e-9.
void validate_inflation(const std::vector<double> & alphas);

/// N_d x n matrix whose column j ~ N(0, alpha C_e), drawn from the stream
/// derived from (seed, j).
Matrix perturb_observations(const ObservationSet & obs, double alpha, Eigen::Index n, std::uint64_t seed);

/// K = C_md (C_dd + alpha C_e)^-1 from ensemble estimates. The symmetric
/// matrix is inverted through its eigendecomposition with eigenvalues
/// floored at 1e-10 trace / N_d.
Matrix kalman_gain(const Matrix & params, const Matrix & predicted, const ObservationSet & obs, double alpha);

/// m_j + (R o K)(d_obs + e_j - d_j) for every member, e_j from
/// perturb_observations(obs, alpha, N_e, seed).
Ensemble analysis_update(const Ensemble & ensemble, const DataBatch & predicted, const ObservationSet & obs,
                         double alpha, const LocalizationMatrix & r, std::uint64_t seed);

struct LocalizationResult {
  LocalizationMatrix r;
  std::vector<std::string> warnings;
};

/// Builds R for the configured scheme from member-aligned (params, data)
/// pairs. `ensemble_size` is N_e of the assimilation ensemble. `stage`
/// separates the random streams of refits at different iterations.
LocalizationResult compute_localization(const EsmdaConfig & config, const ParameterSpace & space,
                                        const ObservationSet & obs, const Matrix & params, const Matrix & data,
                                        Eigen::Index ensemble_size, int stage);

struct RunResult {
  std::vector<double> alphas;
  Ensemble prior;
  DataBatch prior_predicted;
  std::vector<Ensemble> posteriors;        ///< one per assimilation
  std::vector<DataBatch> predictions;      ///< re-simulated posteriors
  std::vector<LocalizationMatrix> localizations;  ///< R used at each assimilation
  std::vector<Vector> objectives;          ///< [0] prior, [k] after assimilation k
  std::size_t forward_calls = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> warnings;

  const Ensemble & final_ensemble() const { return posteriors.empty() ? prior : posteriors.back(); }
  const DataBatch & final_predicted() const { return predictions.empty() ? prior_predicted : predictions.back(); }
};

/// Samples the prior with `n_members` members, then runs N_a assimilations.
RunResult run(const EsmdaConfig & config, const ParameterSpace & space, const ForwardModel & model,
              const ObservationSet & obs, Eigen::Index n_members);

/// Same loop starting from a given prior ensemble.
RunResult run_from(const EsmdaConfig & config, const ParameterSpace & space, const ForwardModel & model,
                   const ObservationSet & obs, const Ensemble & prior);

}  // namespace esmdaloc
