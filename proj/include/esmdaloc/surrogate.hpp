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
#include "esmdaloc/tree.hpp"

namespace esmdaloc {

enum class RegressorKind { linear, cart, random_forest, extra_trees, gbdt };

std::string to_string(RegressorKind k);
RegressorKind parse_regressor_kind(const std::string & s);

/// Regressor choice and hyperparameters. `defaults` returns the fixed values
/// used everywhere unless a field is overridden explicitly:
///   cart           depth 8, 5 samples per leaf, all features
///   random_forest  100 trees, unlimited depth, 1 sample per leaf, sqrt(N_m) features, bootstrap
///   extra_trees    as random_forest with random thresholds and no bootstrap
///   gbdt           100 trees, depth 3, learning rate 0.1, 5 samples per leaf, squared error
struct RegressorSpec {
  static constexpr int kSqrtFeatures = -1;

  RegressorKind kind = RegressorKind::gbdt;
  int n_estimators = 100;
  int max_depth = 3;
  int min_samples_leaf = 5;
  double learning_rate = 0.1;
  int max_features = 0;  ///< 0: all, kSqrtFeatures: floor(sqrt(N_m)), else a count
  bool bootstrap = false;
  std::uint64_t seed = 0;

  static RegressorSpec defaults(RegressorKind kind, std::uint64_t seed = 0);
  void validate() const;
};

/// Fitted regressor f: parameter vector (length N_m) -> data vector (length N_d).
class TrainedSurrogate {
 public:
  RegressorKind kind() const { return spec_.kind; }
  const RegressorSpec & spec() const { return spec_; }
  Eigen::Index n_inputs() const { return n_inputs_; }
  Eigen::Index n_outputs() const { return n_outputs_; }
  Eigen::Index n_train() const { return n_train_; }
  const Vector & training_rmse() const { return training_rmse_; }

  /// Linear kind: d = slope * m + intercept, slope is N_d x N_m.
  const Matrix & slope() const { return slope_; }
  const Vector & intercept() const { return intercept_; }
  /// Tree kinds: one ensemble per output coordinate.
  const std::vector<TreeEnsemble> & outputs() const { return outputs_; }

 private:
  friend TrainedSurrogate fit(const Ensemble &, const DataBatch &, const RegressorSpec &, std::size_t);
  friend TrainedSurrogate load_surrogate(const std::string &);

  RegressorSpec spec_;
  Eigen::Index n_inputs_ = 0;
  Eigen::Index n_outputs_ = 0;
  Eigen::Index n_train_ = 0;
  Vector training_rmse_;
  Matrix slope_;
  Vector intercept_;
  std::vector<TreeEnsemble> outputs_;
};

/// Fits on the (parameters, predicted data) pairs of an ensemble. Tree kinds
/// fit one model per output coordinate; randomness of tree t of output k is
/// drawn from (spec.seed, k, t), so the worker count never changes the result.
TrainedSurrogate fit(const Ensemble & params, const DataBatch & data, const RegressorSpec & spec,
                     std::size_t workers = 1);

/// N_d x N predictions for the columns of `params_matrix`.
DataBatch predict(const TrainedSurrogate & model, const Matrix & params_matrix, std::size_t workers = 1);

struct SuperEnsembleStatistics {
  Matrix cross_cov;  ///< N_m x N_d
  Vector var_m;
  Vector var_d;
};

/// Samples n_super members from the prior, predicts their data with the
/// surrogate and returns the cross-covariance and both variance vectors.
SuperEnsembleStatistics super_ensemble_statistics(const TrainedSurrogate & model, const ParameterSpace & space,
                                                  Eigen::Index n_super, std::uint64_t seed,
                                                  std::size_t workers = 1);

Matrix ml_covariance(const TrainedSurrogate & model, const ParameterSpace & space, Eigen::Index n_super,
                     std::uint64_t seed, std::size_t workers = 1);

void save_surrogate(const TrainedSurrogate & model, const std::string & path);
TrainedSurrogate load_surrogate(const std::string & path);

}  // namespace esmdaloc
