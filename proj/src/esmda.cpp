/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/esmda.hpp"

#include <chrono>
#include <cmath>
#include <optional>

#include <Eigen/Eigenvalues>

#include "esmdaloc/metrics.hpp"

namespace esmdaloc {

namespace {
// Stream tags keep the derived seeds of different purposes apart.
constexpr std::uint64_t kPerturbTag = 0x70657274ULL;
constexpr std::uint64_t kSurrogateTag = 0x73757272ULL;
constexpr std::uint64_t kSuperTag = 0x73757065ULL;
}  // namespace

std::vector<double> inflation_schedule(int n) {
  require(n >= 1, "inflation_schedule: at least one assimilation required");
  return std::vector<double>(static_cast<std::size_t>(n), static_cast<double>(n));
}

void validate_inflation(const std::vector<double> & alphas) {
  require(!alphas.empty(), "inflation: at least one coefficient required");
  double sum = 0.0;
  for (double a : alphas) {
    require(std::isfinite(a) && a > 0.0, "inflation: coefficients must be positive and finite");
    sum += 1.0 / a;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "inflation: reciprocals must sum to 1");
}

std::vector<double> EsmdaConfig::alphas() const {
  if (inflation.empty()) return inflation_schedule(n_assimilations);
  require(static_cast<int>(inflation.size()) == n_assimilations,
          "esmda: inflation sequence length must equal n_assimilations");
  validate_inflation(inflation);
  return inflation;
}

void EsmdaConfig::validate() const {
  require(n_assimilations >= 1, "esmda: n_assimilations must be at least 1");
  (void)alphas();
  localization.validate();
  const Scheme s = localization.scheme;
  if (s == Scheme::ml || s == Scheme::combined_ml_cm) {
    require(super_ensemble_size >= 2, "esmda: super-ensemble size must be at least 2");
    regressor.validate();
  }
}

Matrix perturb_observations(const ObservationSet & obs, double alpha, Eigen::Index n, std::uint64_t seed) {
  require(alpha > 0.0, "perturb_observations: alpha must be positive");
  require(n >= 1, "perturb_observations: n must be positive");
  require((obs.error_variance.array() >= 0.0).all(), "perturb_observations: negative error variance");
  const Vector sd = (alpha * obs.error_variance).cwiseSqrt();
  Matrix e(static_cast<Eigen::Index>(obs.size()), n);
  Vector z(e.rows());
  for (Eigen::Index j = 0; j < n; ++j) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(j));
    fill_standard_normal(rng, z);
    e.col(j) = sd.cwiseProduct(z);
  }
  return e;
}

Matrix kalman_gain(const Matrix & params, const Matrix & predicted, const ObservationSet & obs, double alpha) {
  require(alpha > 0.0, "kalman_gain: alpha must be positive");
  require(params.cols() == predicted.cols(), "kalman_gain: member counts differ");
  require(predicted.rows() == static_cast<Eigen::Index>(obs.size()), "kalman_gain: data dimension mismatch");
  const Matrix cmd = estimate_cross_cov(params, predicted);
  Matrix s = estimate_auto_cov(predicted);
  s.diagonal() += alpha * obs.error_variance;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success) throw NumericalError("kalman_gain: eigendecomposition failed");
  const double floor = 1e-10 * s.trace() / static_cast<double>(s.rows());
  const Vector inv = eig.eigenvalues().cwiseMax(floor).cwiseInverse();
  const Matrix & v = eig.eigenvectors();
  return ((cmd * v) * inv.asDiagonal()) * v.transpose();
}

Ensemble analysis_update(const Ensemble & ensemble, const DataBatch & predicted, const ObservationSet & obs,
                         double alpha, const LocalizationMatrix & r, std::uint64_t seed) {
  obs.validate();
  const Eigen::Index ne = ensemble.n_members();
  require(predicted.n_members() == ne, "analysis_update: member counts differ");
  require(predicted.n_data() == static_cast<Eigen::Index>(obs.size()), "analysis_update: data dimension mismatch");
  require(r.rows() == ensemble.n_params() && r.cols() == predicted.n_data(),
          "analysis_update: localization must be N_m x N_d");
  const Matrix e = perturb_observations(obs, alpha, ne, seed);
  Matrix innovation = (e.colwise() + obs.d_obs) - predicted.matrix();
  for (Eigen::Index j = 0; j < ne; ++j)
    if (!innovation.col(j).allFinite())
      throw NumericalError("analysis_update: non-finite innovation for member " + std::to_string(j));
  const Matrix gain = apply_localization(r, kalman_gain(ensemble.matrix(), predicted.matrix(), obs, alpha));
  Matrix updated = ensemble.matrix() + gain * innovation;
  return Ensemble(std::move(updated), ensemble.member_seeds());
}

LocalizationResult compute_localization(const EsmdaConfig & config, const ParameterSpace & space,
                                        const ObservationSet & obs, const Matrix & params, const Matrix & data,
                                        Eigen::Index ensemble_size, int stage) {
  const auto & loc = config.localization;
  const Eigen::Index nm = params.rows();
  const Eigen::Index nd = data.rows();
  const double eta = loc.eta;
  const auto stage_u = static_cast<std::uint64_t>(stage);
  std::vector<std::string> warnings;

  auto ml_taper = [&]() {
    RegressorSpec spec = config.regressor;
    spec.seed = derive_seed(config.localization_seed, kSurrogateTag, stage_u);
    const TrainedSurrogate model = fit(Ensemble(params), DataBatch(data), spec, config.workers);
    const SuperEnsembleStatistics st =
        super_ensemble_statistics(model, space, config.super_ensemble_size,
                                  derive_seed(config.localization_seed, kSuperTag, stage_u), config.workers);
    return taper_from_covariance(loc.taper, st.cross_cov, st.var_m, st.var_d, ensemble_size, eta);
  };
  auto cm_taper = [&]() {
    const CmCorrection corr =
        cm_correct_covariance(space.prior_cov(), estimate_auto_cov(params), estimate_cross_cov(params, data));
    if (corr.warning) warnings.push_back(*corr.warning);
    return taper_from_covariance(loc.taper, corr.covariance, space.prior_cov().diagonal(), estimate_variances(data),
                                 ensemble_size, eta);
  };

  switch (loc.scheme) {
    case Scheme::none:
      return {LocalizationMatrix::ones(nm, nd), warnings};
    case Scheme::distance:
      return {distance_localization(space, obs, loc.correlation_length), warnings};
    case Scheme::po:
      return {po_localization(estimate_cross_cov(params, data), estimate_variances(params), estimate_variances(data),
                              ensemble_size, eta),
              warnings};
    case Scheme::cb_hard:
    case Scheme::cb_soft: {
      const Matrix rho =
          correlation_from_cov(estimate_cross_cov(params, data), estimate_variances(params), estimate_variances(data));
      return {cb_localization(rho, eta, loc.scheme == Scheme::cb_hard ? CbMode::hard : CbMode::soft), warnings};
    }
    case Scheme::cm: {
      LocalizationMatrix r = cm_taper();
      return {std::move(r), warnings};
    }
    case Scheme::ml:
      return {ml_taper(), warnings};
    case Scheme::combined_ml_cm: {
      const LocalizationMatrix a = ml_taper();
      const LocalizationMatrix b = cm_taper();
      return {combine_localizations(a, b), warnings};
    }
  }
  throw InvalidArgument("compute_localization: unknown scheme");
}

RunResult run(const EsmdaConfig & config, const ParameterSpace & space, const ForwardModel & model,
              const ObservationSet & obs, Eigen::Index n_members) {
  return run_from(config, space, model, obs, sample_prior(space, n_members, config.seed));
}

RunResult run_from(const EsmdaConfig & config, const ParameterSpace & space, const ForwardModel & model,
                   const ObservationSet & obs, const Ensemble & prior) {
  config.validate();
  obs.validate();
  require(space.size() == model.n_params(), "esmda: parameter space does not match the model");
  require(obs.size() == model.n_data(), "esmda: observations do not match the model");
  require(prior.n_params() == static_cast<Eigen::Index>(space.size()), "esmda: prior does not match the space");
  const Eigen::Index ne = prior.n_members();
  require(ne >= 2, "esmda: at least two members required");
  const auto t0 = std::chrono::steady_clock::now();

  const std::vector<double> alphas = config.alphas();
  DataBatch d0 = simulate_ensemble(model, space, prior.matrix(), config.workers);
  RunResult res{alphas, prior, d0, {}, {}, {}, {}, 0, 0.0, {}};
  res.forward_calls = static_cast<std::size_t>(ne);
  res.objectives.push_back(objective(obs, res.prior_predicted));
  // Reserved up front: `current` points into these vectors.
  res.posteriors.reserve(alphas.size());
  res.predictions.reserve(alphas.size());

  const Schedule schedule = config.localization.schedule;
  Matrix acc_m = prior.matrix();
  Matrix acc_d = d0.matrix();
  std::optional<LocalizationMatrix> fixed;
  const Ensemble * current = &res.prior;
  const DataBatch * current_d = &res.prior_predicted;

  for (int k = 0; k < static_cast<int>(alphas.size()); ++k) {
    try {
      const bool refit = schedule != Schedule::prior && config.localization.scheme != Scheme::none &&
                         config.localization.scheme != Scheme::distance;
      if (!fixed || refit) {
        const Matrix & pm = schedule == Schedule::each ? current->matrix() : acc_m;
        const Matrix & pd = schedule == Schedule::each ? current_d->matrix() : acc_d;
        LocalizationResult lr = compute_localization(config, space, obs, pm, pd, ne, k);
        for (auto & w : lr.warnings) res.warnings.push_back("iteration " + std::to_string(k) + ": " + w);
        fixed = std::move(lr.r);
      }
      LocalizationMatrix r = *fixed;
      Ensemble next = analysis_update(*current, *current_d, obs, alphas[static_cast<std::size_t>(k)], r,
                                      derive_seed(config.seed, kPerturbTag, static_cast<std::uint64_t>(k)));
      DataBatch dn = simulate_ensemble(model, space, next.matrix(), config.workers);
      res.forward_calls += static_cast<std::size_t>(ne);
      res.objectives.push_back(objective(obs, dn));
      res.localizations.push_back(std::move(r));
      res.posteriors.push_back(std::move(next));
      res.predictions.push_back(std::move(dn));
      current = &res.posteriors.back();
      current_d = &res.predictions.back();
      if (schedule == Schedule::all) {
        Matrix m2(acc_m.rows(), acc_m.cols() + ne);
        m2 << acc_m, current->matrix();
        Matrix d2(acc_d.rows(), acc_d.cols() + ne);
        d2 << acc_d, current_d->matrix();
        acc_m = std::move(m2);
        acc_d = std::move(d2);
      }
    } catch (const InvalidArgument & e) {
      throw InvalidArgument("assimilation " + std::to_string(k + 1) + ": " + e.what());
    } catch (const std::exception & e) {
      throw NumericalError("assimilation " + std::to_string(k + 1) + ": " + e.what());
    }
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace esmdaloc
