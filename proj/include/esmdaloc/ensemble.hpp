/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "esmdaloc/core.hpp"

namespace esmdaloc {

enum class Transform { identity, log };

struct GridCoord {
  int i = 0;
  int j = 0;
  int k = 0;
  bool operator==(const GridCoord &) const = default;
};

double grid_distance(const GridCoord & a, const GridCoord & b);

struct PriorFactor;

/// Parameter names, Gaussian prior and per-parameter metadata. Parameters are
/// stored in assimilation space: log-transformed entries are the logarithm
/// of the physical quantity handed to forward models.
class ParameterSpace {
 public:
  ParameterSpace(std::vector<std::string> names, Vector prior_mean, Matrix prior_cov,
                 std::vector<Transform> transforms = {}, std::vector<bool> dummy_mask = {},
                 std::optional<std::vector<GridCoord>> geometry = std::nullopt);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string> & names() const { return names_; }
  const Vector & prior_mean() const { return prior_mean_; }
  const Matrix & prior_cov() const { return prior_cov_; }
  const std::vector<Transform> & transforms() const { return transforms_; }
  const std::vector<bool> & dummy_mask() const { return dummy_mask_; }
  const std::optional<std::vector<GridCoord>> & geometry() const { return geometry_; }
  Vector prior_std() const;

  /// Maps an assimilation-space vector to the values a forward model consumes.
  Vector to_physical(const Eigen::Ref<const Vector> & m) const;

  /// Symmetric square-root factor L with L L^T = prior_cov (negative
  /// eigenvalues clipped). Computed once on first use and shared by copies.
  const Matrix & sampling_factor() const;

 private:
  std::vector<std::string> names_;
  Vector prior_mean_;
  Matrix prior_cov_;
  std::vector<Transform> transforms_;
  std::vector<bool> dummy_mask_;
  std::optional<std::vector<GridCoord>> geometry_;
  std::shared_ptr<PriorFactor> factor_;
};

/// N_m x N_e parameter realizations, one member per column.
class Ensemble {
 public:
  explicit Ensemble(Matrix matrix, std::vector<std::uint64_t> member_seeds = {});

  const Matrix & matrix() const { return matrix_; }
  Eigen::Index n_params() const { return matrix_.rows(); }
  Eigen::Index n_members() const { return matrix_.cols(); }
  const std::vector<std::uint64_t> & member_seeds() const { return member_seeds_; }

 private:
  Matrix matrix_;
  std::vector<std::uint64_t> member_seeds_;
};

/// N_d x N predicted data, one member per column.
class DataBatch {
 public:
  explicit DataBatch(Matrix matrix);

  const Matrix & matrix() const { return matrix_; }
  Eigen::Index n_data() const { return matrix_.rows(); }
  Eigen::Index n_members() const { return matrix_.cols(); }

 private:
  Matrix matrix_;
};

/// Observed data with a diagonal error covariance.
struct ObservationSet {
  Vector d_obs;
  Vector error_variance;
  std::vector<std::string> kind;
  std::vector<std::optional<GridCoord>> location;
  std::vector<int> time_index;

  std::size_t size() const { return static_cast<std::size_t>(d_obs.size()); }
  /// Throws InvalidArgument unless lengths agree and every variance is > 0.
  void validate() const;
};

// -----------------------------------------------------------------------------

/// Draws n members from N(prior_mean, prior_cov). Member j uses the stream
/// derived from (seed, j).
Ensemble sample_prior(const ParameterSpace & space, Eigen::Index n, std::uint64_t seed);

/// Same draw as sample_prior without the ensemble-size precondition (n >= 1).
Ensemble sample_gaussian_members(const ParameterSpace & space, Eigen::Index n, std::uint64_t seed);

/// Unbiased cross-covariance (1/(N-1)) (A - mean A)(B - mean B)^T between
/// two member-aligned matrices.
Matrix estimate_cross_cov(const Matrix & a, const Matrix & b);
Matrix estimate_cross_cov(const Ensemble & params, const DataBatch & data);

/// Unbiased auto-covariance, exactly symmetric.
Matrix estimate_auto_cov(const Matrix & batch);
Matrix estimate_auto_cov(const Ensemble & batch);
Matrix estimate_auto_cov(const DataBatch & batch);

/// Per-row unbiased variances.
Vector estimate_variances(const Matrix & batch);

/// rho_ik = c_ik / sqrt(v_i v_k), clamped to [-1, 1]; 0 where v_i v_k = 0.
Matrix correlation_from_cov(const Matrix & cross, const Vector & var_rows, const Vector & var_cols);

}  // namespace esmdaloc
