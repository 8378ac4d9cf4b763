/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/localization.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace esmdaloc {

LocalizationMatrix::LocalizationMatrix(Matrix matrix) : matrix_(std::move(matrix)) {
  require(matrix_.allFinite(), "LocalizationMatrix: non-finite entries");
  require(matrix_.size() == 0 || (matrix_.minCoeff() >= 0.0 && matrix_.maxCoeff() <= 1.0),
          "LocalizationMatrix: entries must lie in [0, 1]");
}

LocalizationMatrix LocalizationMatrix::ones(Eigen::Index rows, Eigen::Index cols) {
  return LocalizationMatrix(Matrix::Ones(rows, cols));
}

// -----------------------------------------------------------------------------

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::none: return "none";
    case Scheme::distance: return "distance";
    case Scheme::po: return "po";
    case Scheme::cb_hard: return "cb_hard";
    case Scheme::cb_soft: return "cb_soft";
    case Scheme::cm: return "cm";
    case Scheme::ml: return "ml";
    case Scheme::combined_ml_cm: return "combined_ml_cm";
  }
  return "?";
}

std::string to_string(Schedule s) {
  switch (s) {
    case Schedule::prior: return "prior";
    case Schedule::all: return "all";
    case Schedule::each: return "each";
  }
  return "?";
}

std::string to_string(Taper t) {
  switch (t) {
    case Taper::po: return "po";
    case Taper::cb_hard: return "cb_hard";
    case Taper::cb_soft: return "cb_soft";
  }
  return "?";
}

Scheme parse_scheme(const std::string & s) {
  for (Scheme v : {Scheme::none, Scheme::distance, Scheme::po, Scheme::cb_hard, Scheme::cb_soft, Scheme::cm,
                   Scheme::ml, Scheme::combined_ml_cm})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown localization scheme '" + s + "'");
}

Schedule parse_schedule(const std::string & s) {
  for (Schedule v : {Schedule::prior, Schedule::all, Schedule::each})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown localization schedule '" + s + "'");
}

Taper parse_taper(const std::string & s) {
  for (Taper v : {Taper::po, Taper::cb_hard, Taper::cb_soft})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown taper '" + s + "'");
}

void LocalizationConfig::validate() const {
  require(std::isfinite(eta) && eta >= 0.0, "localization: eta must be >= 0");
  if (scheme == Scheme::distance)
    require(correlation_length > 0.0, "localization: correlation_length must be > 0 for the distance scheme");
  const bool cb = scheme == Scheme::cb_hard || scheme == Scheme::cb_soft ||
                  ((scheme == Scheme::cm || scheme == Scheme::ml || scheme == Scheme::combined_ml_cm) &&
                   taper != Taper::po);
  if (cb) require(eta < 1.0, "localization: correlation-based tapers need eta < 1");
  // The known prior auto-covariance only describes the prior ensemble.
  if (scheme == Scheme::cm || scheme == Scheme::combined_ml_cm)
    require(schedule == Schedule::prior, "localization: the cm correction is only defined for the prior schedule");
}

// -----------------------------------------------------------------------------

double gaspari_cohn(double z) {
  require(z >= 0.0, "gaspari_cohn: negative argument");
  if (z >= 2.0) return 0.0;
  if (z <= 1.0) {
    const double z2 = z * z;
    const double z3 = z2 * z;
    return std::clamp(-0.25 * z3 * z2 + 0.5 * z2 * z2 + 0.625 * z3 - (5.0 / 3.0) * z2 + 1.0, 0.0, 1.0);
  }
  // z^5/12 - z^4/2 + 5z^3/8 + 5z^2/3 - 5z + 4 - 2/(3z), factored so the value
  // stays strictly positive up to the support edge.
  const double u = 2.0 - z;
  const double u2 = u * u;
  return std::clamp(u2 * u2 * (2.0 * z * z + 4.0 * z - 1.0) / (24.0 * z), 0.0, 1.0);
}

LocalizationMatrix po_localization(const Matrix & cross_cov, const Vector & var_m, const Vector & var_d,
                                   Eigen::Index ensemble_size, double eta) {
  require(ensemble_size >= 2, "po_localization: ensemble_size must be at least 2");
  require(cross_cov.rows() == var_m.size() && cross_cov.cols() == var_d.size(), "po_localization: shape mismatch");
  require((var_m.array() >= 0.0).all() && (var_d.array() >= 0.0).all(), "po_localization: negative variance");
  require(eta >= 0.0, "po_localization: eta must be >= 0");
  const double ne = static_cast<double>(ensemble_size);
  Matrix r(cross_cov.rows(), cross_cov.cols());
  for (Eigen::Index k = 0; k < cross_cov.cols(); ++k) {
    for (Eigen::Index i = 0; i < cross_cov.rows(); ++i) {
      const double c = cross_cov(i, k);
      const double c2 = c * c;
      const double vv = var_m[i] * var_d[k];
      const double denom = c2 + (c2 + vv) / ne;
      double value = denom > 0.0 ? c2 / denom : 0.0;
      if (std::abs(c) < eta * std::sqrt(vv)) value = 0.0;
      r(i, k) = std::clamp(value, 0.0, 1.0);
    }
  }
  return LocalizationMatrix(std::move(r));
}

LocalizationMatrix cb_localization(const Matrix & correlations, double eta, CbMode mode) {
  require(eta >= 0.0 && eta < 1.0, "cb_localization: eta must lie in [0, 1)");
  require(correlations.size() == 0 ||
              (correlations.minCoeff() >= -1.0 - 1e-12 && correlations.maxCoeff() <= 1.0 + 1e-12),
          "cb_localization: correlations must lie in [-1, 1]");
  Matrix r(correlations.rows(), correlations.cols());
  for (Eigen::Index k = 0; k < correlations.cols(); ++k) {
    for (Eigen::Index i = 0; i < correlations.rows(); ++i) {
      const double a = std::min(1.0, std::abs(correlations(i, k)));
      if (mode == CbMode::hard) {
        r(i, k) = a > eta ? 1.0 : 0.0;
      } else {
        r(i, k) = a > eta ? gaspari_cohn(2.0 * (1.0 - a) / (1.0 - eta)) : 0.0;
      }
    }
  }
  return LocalizationMatrix(std::move(r));
}

LocalizationMatrix distance_localization(const ParameterSpace & space, const ObservationSet & obs,
                                         double correlation_length) {
  require(correlation_length > 0.0, "distance_localization: correlation_length must be > 0");
  require(space.geometry().has_value(), "distance_localization: parameter space has no geometry");
  require(!obs.location.empty(), "distance_localization: observations carry no locations");
  require(obs.location.size() == obs.size(), "distance_localization: location length mismatch");
  const auto & cells = *space.geometry();
  Matrix r(static_cast<Eigen::Index>(space.size()), static_cast<Eigen::Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const auto & loc = obs.location[k];
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const auto col = static_cast<Eigen::Index>(k);
      r(row, col) = loc ? gaspari_cohn(grid_distance(cells[i], *loc) / correlation_length) : 1.0;
    }
  }
  return LocalizationMatrix(std::move(r));
}

CmCorrection cm_correct_covariance(const Matrix & true_cmm, const Matrix & est_cmm, const Matrix & est_cmd) {
  const Eigen::Index nm = true_cmm.rows();
  require(true_cmm.cols() == nm && est_cmm.rows() == nm && est_cmm.cols() == nm,
          "cm_correct_covariance: auto-covariances must be N_m x N_m");
  require(est_cmd.rows() == nm, "cm_correct_covariance: cross-covariance must have N_m rows");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (est_cmm + est_cmm.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("cm_correct_covariance: eigendecomposition failed");
  const Vector & lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("cm_correct_covariance: estimated auto-covariance is zero");
  const double floor = 1e-8 * top;
  CmCorrection out;
  Vector inv(nm);
  for (Eigen::Index i = 0; i < nm; ++i) {
    if (lambda[i] < floor) ++out.floored_eigenvalues;
    inv[i] = 1.0 / std::max(lambda[i], floor);
  }
  const Matrix & v = eig.eigenvectors();
  const Matrix solved = v * (inv.asDiagonal() * (v.transpose() * est_cmd));
  out.covariance = true_cmm * solved;
  if (out.floored_eigenvalues > 0) {
    std::ostringstream os;
    os << "estimated parameter auto-covariance is singular or ill-conditioned; " << out.floored_eigenvalues
       << " of " << nm << " eigenvalues raised to the floor";
    out.warning = os.str();
  }
  return out;
}

Matrix apply_localization(const LocalizationMatrix & r, const Matrix & gain) {
  require(r.rows() == gain.rows() && r.cols() == gain.cols(), "apply_localization: shape mismatch");
  return r.matrix().cwiseProduct(gain);
}

LocalizationMatrix combine_localizations(const LocalizationMatrix & a, const LocalizationMatrix & b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "combine_localizations: shape mismatch");
  return LocalizationMatrix(a.matrix().cwiseProduct(b.matrix()));
}

LocalizationMatrix taper_from_covariance(Taper taper, const Matrix & cross_cov, const Vector & var_m,
                                         const Vector & var_d, Eigen::Index ensemble_size, double eta) {
  switch (taper) {
    case Taper::po: return po_localization(cross_cov, var_m, var_d, ensemble_size, eta);
    case Taper::cb_hard: return cb_localization(correlation_from_cov(cross_cov, var_m, var_d), eta, CbMode::hard);
    case Taper::cb_soft: return cb_localization(correlation_from_cov(cross_cov, var_m, var_d), eta, CbMode::soft);
  }
  throw InvalidArgument("taper_from_covariance: unknown taper");
}

}  // namespace esmdaloc
