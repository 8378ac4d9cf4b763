/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/metrics.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace esmdaloc {

Vector objective(const ObservationSet & obs, const DataBatch & predicted) {
  require(predicted.n_data() == static_cast<Eigen::Index>(obs.size()), "objective: data dimension mismatch");
  require(static_cast<std::size_t>(obs.error_variance.size()) == obs.size(), "objective: error variance length mismatch");
  require((obs.error_variance.array() > 0.0).all(), "objective: error variances must be strictly positive");
  const Matrix r = predicted.matrix().colwise() - obs.d_obs;
  const Vector w = obs.error_variance.cwiseInverse();
  return (w.asDiagonal() * r.cwiseAbs2()).colwise().sum().transpose() / (2.0 * static_cast<double>(obs.size()));
}

double normalized_variance(const Ensemble & prior, const Ensemble & posterior, const std::vector<bool> & mask) {
  require(prior.n_params() == posterior.n_params(), "normalized_variance: parameter counts differ");
  require(mask.empty() || mask.size() == static_cast<std::size_t>(prior.n_params()),
          "normalized_variance: mask length mismatch");
  const Vector vp = estimate_variances(prior.matrix());
  const Vector vq = estimate_variances(posterior.matrix());
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < vp.size(); ++i) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(i)]) continue;
    require(vp[i] > 0.0, "normalized_variance: zero prior variance for parameter " + std::to_string(i));
    sum += vq[i] / vp[i];
    ++count;
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

double mean_offset(const Ensemble & prior, const Ensemble & posterior) {
  require(prior.n_params() == posterior.n_params(), "mean_offset: parameter counts differ");
  return (posterior.matrix().rowwise().mean() - prior.matrix().rowwise().mean()).cwiseAbs().mean();
}

Divergences distribution_divergences(const Matrix & prior, const Matrix & posterior, const HistogramOptions & options) {
  require(prior.rows() == posterior.rows(), "distribution_divergences: parameter counts differ");
  require(prior.cols() >= 2 && posterior.cols() >= 2, "distribution_divergences: at least two members required");
  require(options.bins >= 1, "distribution_divergences: bins must be positive");
  require(options.smoothing >= 0.0, "distribution_divergences: smoothing must be non-negative");
  const int nb = options.bins;
  std::vector<double> p(static_cast<std::size_t>(nb));
  std::vector<double> q(static_cast<std::size_t>(nb));
  auto fill = [nb](std::vector<double> & h, const auto & row, double lo, double width, double eps) {
    std::fill(h.begin(), h.end(), 0.0);
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      int b = width > 0.0 ? static_cast<int>((row[j] - lo) / width) : 0;
      b = std::clamp(b, 0, nb - 1);
      h[static_cast<std::size_t>(b)] += 1.0;
    }
    double total = 0.0;
    for (double & v : h) {
      v = v / static_cast<double>(row.size()) + eps;
      total += v;
    }
    for (double & v : h) v /= total;
  };
  Divergences out{0.0, 0.0};
  for (Eigen::Index i = 0; i < prior.rows(); ++i) {
    const double lo = std::min(prior.row(i).minCoeff(), posterior.row(i).minCoeff());
    const double hi = std::max(prior.row(i).maxCoeff(), posterior.row(i).maxCoeff());
    const double width = (hi - lo) / nb;
    fill(p, prior.row(i), lo, width, options.smoothing);
    fill(q, posterior.row(i), lo, width, options.smoothing);
    double bc = 0.0;
    double js = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) {
      bc += std::sqrt(p[b] * q[b]);
      const double mid = 0.5 * (p[b] + q[b]);
      if (p[b] > 0.0) js += 0.5 * p[b] * std::log2(p[b] / mid);
      if (q[b] > 0.0) js += 0.5 * q[b] * std::log2(q[b] / mid);
    }
    out.bc += std::min(bc, 1.0);
    out.js += std::max(js, 0.0);
  }
  out.bc /= static_cast<double>(prior.rows());
  out.js /= static_cast<double>(prior.rows());
  return out;
}

Divergences distribution_divergences(const Ensemble & prior, const Ensemble & posterior,
                                     const HistogramOptions & options) {
  return distribution_divergences(prior.matrix(), posterior.matrix(), options);
}

double spectral_norm(const Matrix & m) {
  if (m.size() == 0) return 0.0;
  // Iterate on the smaller Gram matrix.
  const Matrix g = m.rows() < m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  if (g.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Vector v(g.rows());
  Rng rng(0x5eed);
  fill_standard_normal(rng, v);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Vector w = g * v;
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    // A 1e-12 step on the squared value keeps the norm well inside 1e-8.
    if (it > 0 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) return std::sqrt(std::max(next, 0.0));
    lambda = next;
  }
  // Near-degenerate top singular values converge slowly; settle with a direct SVD.
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

CorrelationError correlation_error(const Matrix & localized_corr, const Matrix & reference_corr) {
  require(localized_corr.rows() == reference_corr.rows() && localized_corr.cols() == reference_corr.cols(),
          "correlation_error: shape mismatch");
  const Matrix delta = localized_corr - reference_corr;
  const double n = static_cast<double>(delta.size());
  return {n > 0 ? delta.norm() / std::sqrt(n) : 0.0, spectral_norm(delta)};
}

GoldStandard gold_standard(const ParameterSpace & space, const ForwardModel & model, Eigen::Index n_reference,
                           std::uint64_t seed, std::size_t workers) {
  const Ensemble ens = sample_prior(space, n_reference, seed);
  const DataBatch data = simulate_ensemble(model, space, ens.matrix(), workers);
  GoldStandard g;
  g.cross_cov = estimate_cross_cov(ens, data);
  g.var_m = estimate_variances(ens.matrix());
  g.var_d = estimate_variances(data.matrix());
  g.correlation = correlation_from_cov(g.cross_cov, g.var_m, g.var_d);
  return g;
}

Matrix gold_standard_correlation(const ParameterSpace & space, const ForwardModel & model, Eigen::Index n_reference,
                                 std::uint64_t seed, std::size_t workers) {
  return gold_standard(space, model, n_reference, seed, workers).correlation;
}

MetricsReport make_report(const ParameterSpace & space, const ObservationSet & obs, const Ensemble & prior,
                          const Ensemble & posterior, const DataBatch & posterior_predicted) {
  MetricsReport rep;
  const Vector obj = objective(obs, posterior_predicted);
  rep.objective_mean = obj.mean();
  rep.objective_std =
      obj.size() > 1 ? std::sqrt((obj.array() - rep.objective_mean).square().sum() / (obj.size() - 1.0)) : 0.0;
  const auto & dummy = space.dummy_mask();
  std::vector<bool> normal(dummy.size());
  for (std::size_t i = 0; i < dummy.size(); ++i) normal[i] = !dummy[i];
  rep.nv_all = normalized_variance(prior, posterior);
  rep.nv_dummy = normalized_variance(prior, posterior, dummy);
  rep.nv_normal = normalized_variance(prior, posterior, normal);
  rep.mean_offset = mean_offset(prior, posterior);
  const Divergences div = distribution_divergences(prior, posterior);
  rep.bc = div.bc;
  rep.js = div.js;
  return rep;
}

}  // namespace esmdaloc
