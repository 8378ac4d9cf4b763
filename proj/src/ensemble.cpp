/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/ensemble.hpp"

#include <cmath>
#include <mutex>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace esmdaloc {

double grid_distance(const GridCoord & a, const GridCoord & b) {
  const double di = a.i - b.i;
  const double dj = a.j - b.j;
  const double dk = a.k - b.k;
  return std::sqrt(di * di + dj * dj + dk * dk);
}

// -----------------------------------------------------------------------------

struct PriorFactor {
  std::once_flag once;
  Matrix factor;
  std::string error;
};

ParameterSpace::ParameterSpace(std::vector<std::string> names, Vector prior_mean, Matrix prior_cov,
                               std::vector<Transform> transforms, std::vector<bool> dummy_mask,
                               std::optional<std::vector<GridCoord>> geometry)
  : names_(std::move(names)),
    prior_mean_(std::move(prior_mean)),
    prior_cov_(std::move(prior_cov)),
    transforms_(std::move(transforms)),
    dummy_mask_(std::move(dummy_mask)),
    geometry_(std::move(geometry)),
    factor_(std::make_shared<PriorFactor>()) {
  const auto n = names_.size();
  require(n > 0, "ParameterSpace: at least one parameter required");
  require(static_cast<std::size_t>(prior_mean_.size()) == n, "ParameterSpace: prior_mean length differs from names");
  require(static_cast<std::size_t>(prior_cov_.rows()) == n && static_cast<std::size_t>(prior_cov_.cols()) == n,
          "ParameterSpace: prior_cov must be N_m x N_m");
  require(prior_mean_.allFinite() && prior_cov_.allFinite(), "ParameterSpace: non-finite prior");
  const double asym = (prior_cov_ - prior_cov_.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-12 * std::max(1.0, prior_cov_.cwiseAbs().maxCoeff()),
          "ParameterSpace: prior_cov is not symmetric");
  require((prior_cov_.diagonal().array() >= 0.0).all(), "ParameterSpace: negative prior variance");
  if (transforms_.empty()) transforms_.assign(n, Transform::identity);
  if (dummy_mask_.empty()) dummy_mask_.assign(n, false);
  require(transforms_.size() == n, "ParameterSpace: transform list length differs from names");
  require(dummy_mask_.size() == n, "ParameterSpace: dummy_mask length differs from names");
  if (geometry_) require(geometry_->size() == n, "ParameterSpace: geometry needs one coordinate per parameter");
}

Vector ParameterSpace::prior_std() const { return prior_cov_.diagonal().cwiseSqrt(); }

Vector ParameterSpace::to_physical(const Eigen::Ref<const Vector> & m) const {
  require(static_cast<std::size_t>(m.size()) == size(), "to_physical: length mismatch");
  Vector out = m;
  for (std::size_t i = 0; i < size(); ++i)
    if (transforms_[i] == Transform::log) out[i] = std::exp(m[i]);
  return out;
}

const Matrix & ParameterSpace::sampling_factor() const {
  std::call_once(factor_->once, [this]() {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(prior_cov_);
    if (eig.info() != Eigen::Success) {
      factor_->error = "prior covariance eigendecomposition failed";
      return;
    }
    const Vector & lambda = eig.eigenvalues();
    const double top = std::max(0.0, lambda.maxCoeff());
    if (lambda.minCoeff() < -1e-8 * top) {
      std::ostringstream os;
      os << "prior covariance is not positive semidefinite (min eigenvalue " << lambda.minCoeff()
         << ", max " << top << ")";
      factor_->error = os.str();
      return;
    }
    factor_->factor = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  });
  if (!factor_->error.empty()) throw InvalidArgument("sample_prior: " + factor_->error);
  return factor_->factor;
}

// -----------------------------------------------------------------------------

Ensemble::Ensemble(Matrix matrix, std::vector<std::uint64_t> member_seeds)
  : matrix_(std::move(matrix)), member_seeds_(std::move(member_seeds)) {
  require(matrix_.cols() >= 1, "Ensemble: at least one member required");
  require(matrix_.allFinite(), "Ensemble: non-finite entries");
  if (member_seeds_.empty()) {
    member_seeds_.resize(static_cast<std::size_t>(matrix_.cols()));
    for (std::size_t j = 0; j < member_seeds_.size(); ++j) member_seeds_[j] = j;
  }
  require(member_seeds_.size() == static_cast<std::size_t>(matrix_.cols()),
          "Ensemble: one seed per member required");
}

DataBatch::DataBatch(Matrix matrix) : matrix_(std::move(matrix)) {
  require(matrix_.allFinite(), "DataBatch: non-finite entries");
}

void ObservationSet::validate() const {
  const auto n = size();
  require(static_cast<std::size_t>(error_variance.size()) == n, "ObservationSet: error_variance length mismatch");
  require(kind.empty() || kind.size() == n, "ObservationSet: kind length mismatch");
  require(location.empty() || location.size() == n, "ObservationSet: location length mismatch");
  require(time_index.empty() || time_index.size() == n, "ObservationSet: time_index length mismatch");
  require(d_obs.allFinite(), "ObservationSet: non-finite observation");
  require((error_variance.array() > 0.0).all(), "ObservationSet: error variances must be strictly positive");
}

// -----------------------------------------------------------------------------

Ensemble sample_prior(const ParameterSpace & space, Eigen::Index n, std::uint64_t seed) {
  require(n >= 2, "sample_prior: n must be at least 2");
  return sample_gaussian_members(space, n, seed);
}

Ensemble sample_gaussian_members(const ParameterSpace & space, Eigen::Index n, std::uint64_t seed) {
  require(n >= 1, "sample_gaussian_members: n must be at least 1");
  const Matrix & factor = space.sampling_factor();
  const Eigen::Index nm = static_cast<Eigen::Index>(space.size());
  Matrix out(nm, n);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n));
  Vector z(nm);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::uint64_t member_seed = derive_seed(seed, static_cast<std::uint64_t>(j));
    Rng rng(member_seed);
    fill_standard_normal(rng, z);
    out.col(j) = space.prior_mean() + factor * z;
    seeds[static_cast<std::size_t>(j)] = member_seed;
  }
  return Ensemble(std::move(out), std::move(seeds));
}

Matrix estimate_cross_cov(const Matrix & a, const Matrix & b) {
  require(a.cols() == b.cols(), "estimate_cross_cov: member counts differ");
  require(a.cols() >= 2, "estimate_cross_cov: at least two members required");
  const Matrix ac = a.colwise() - a.rowwise().mean();
  const Matrix bc = b.colwise() - b.rowwise().mean();
  return (ac * bc.transpose()) / static_cast<double>(a.cols() - 1);
}

Matrix estimate_cross_cov(const Ensemble & params, const DataBatch & data) {
  return estimate_cross_cov(params.matrix(), data.matrix());
}

Matrix estimate_auto_cov(const Matrix & batch) {
  require(batch.cols() >= 2, "estimate_auto_cov: at least two members required");
  const Matrix c = batch.colwise() - batch.rowwise().mean();
  Matrix cov = (c * c.transpose()) / static_cast<double>(batch.cols() - 1);
  return 0.5 * (cov + cov.transpose());
}

Matrix estimate_auto_cov(const Ensemble & batch) { return estimate_auto_cov(batch.matrix()); }
Matrix estimate_auto_cov(const DataBatch & batch) { return estimate_auto_cov(batch.matrix()); }

Vector estimate_variances(const Matrix & batch) {
  require(batch.cols() >= 2, "estimate_variances: at least two members required");
  const Matrix c = batch.colwise() - batch.rowwise().mean();
  return c.rowwise().squaredNorm() / static_cast<double>(batch.cols() - 1);
}

Matrix correlation_from_cov(const Matrix & cross, const Vector & var_rows, const Vector & var_cols) {
  require(cross.rows() == var_rows.size() && cross.cols() == var_cols.size(),
          "correlation_from_cov: shape mismatch");
  require((var_rows.array() >= 0.0).all() && (var_cols.array() >= 0.0).all(),
          "correlation_from_cov: negative variance");
  Matrix rho(cross.rows(), cross.cols());
  for (Eigen::Index k = 0; k < cross.cols(); ++k) {
    for (Eigen::Index i = 0; i < cross.rows(); ++i) {
      const double scale = var_rows[i] * var_cols[k];
      rho(i, k) = scale > 0.0 ? std::clamp(cross(i, k) / std::sqrt(scale), -1.0, 1.0) : 0.0;
    }
  }
  return rho;
}

}  // namespace esmdaloc
