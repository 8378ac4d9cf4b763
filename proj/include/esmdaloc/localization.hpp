/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <optional>
#include <string>

#include "esmdaloc/ensemble.hpp"

namespace esmdaloc {

/// N_m x N_d taper with every entry in [0, 1].
class LocalizationMatrix {
 public:
  explicit LocalizationMatrix(Matrix matrix);
  static LocalizationMatrix ones(Eigen::Index rows, Eigen::Index cols);

  const Matrix & matrix() const { return matrix_; }
  Eigen::Index rows() const { return matrix_.rows(); }
  Eigen::Index cols() const { return matrix_.cols(); }

 private:
  Matrix matrix_;
};

enum class Scheme { none, distance, po, cb_hard, cb_soft, cm, ml, combined_ml_cm };
enum class Schedule { prior, all, each };
/// Taper formula fed by the corrected covariances of the cm / ml schemes.
enum class Taper { po, cb_hard, cb_soft };
enum class CbMode { hard, soft };

std::string to_string(Scheme s);
std::string to_string(Schedule s);
std::string to_string(Taper t);
Scheme parse_scheme(const std::string & s);
Schedule parse_schedule(const std::string & s);
Taper parse_taper(const std::string & s);

struct LocalizationConfig {
  Scheme scheme = Scheme::none;
  double eta = 1e-3;
  double correlation_length = 10.0;
  Schedule schedule = Schedule::prior;
  Taper taper = Taper::po;

  /// Throws InvalidArgument on an inconsistent combination.
  void validate() const;
};

// -----------------------------------------------------------------------------

/// Compactly supported fifth-order Gaspari-Cohn function of z = distance /
/// half-support; 1 at z = 0 and 0 for z >= 2.
double gaspari_cohn(double z);

/// Pseudo-optimal taper r = c^2 / (c^2 + (c^2 + v_i v_k) / N_e), zeroed where
/// |c| < eta sqrt(v_i v_k). `ensemble_size` is the assimilation ensemble
/// size even when the covariances come from a larger ensemble.
LocalizationMatrix po_localization(const Matrix & cross_cov, const Vector & var_m, const Vector & var_d,
                                   Eigen::Index ensemble_size, double eta);

/// Correlation-based taper. Hard: indicator |rho| > eta. Soft:
/// GC(2 (1 - |rho|) / (1 - eta)), which is 1 at |rho| = 1 and 0 for |rho| <= eta.
LocalizationMatrix cb_localization(const Matrix & correlations, double eta, CbMode mode);

/// r_ik = GC(dist(param_i, obs_k) / correlation_length); data without a
/// location get r = 1.
LocalizationMatrix distance_localization(const ParameterSpace & space, const ObservationSet & obs,
                                         double correlation_length);

struct CmCorrection {
  Matrix covariance;
  /// Number of eigenvalues of the estimated auto-covariance raised to the floor.
  Eigen::Index floored_eigenvalues = 0;
  std::optional<std::string> warning;
};

/// C_mm (C~_mm)^-1 C~_md, with the inverse applied through an eigenvalue
/// floor of 1e-8 times the largest eigenvalue of C~_mm.
CmCorrection cm_correct_covariance(const Matrix & true_cmm, const Matrix & est_cmm, const Matrix & est_cmd);

Matrix apply_localization(const LocalizationMatrix & r, const Matrix & gain);

LocalizationMatrix combine_localizations(const LocalizationMatrix & a, const LocalizationMatrix & b);

/// Dispatches a covariance-based taper: po uses (cross, variances, N_e, eta);
/// cb_* first forms correlations from the same inputs.
LocalizationMatrix taper_from_covariance(Taper taper, const Matrix & cross_cov, const Vector & var_m,
                                         const Vector & var_d, Eigen::Index ensemble_size, double eta);

}  // namespace esmdaloc
