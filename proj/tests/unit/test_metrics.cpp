/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "doctest.h"
#include "helpers.hpp"
#include "linear_model.hpp"

#include "esmdaloc/metrics.hpp"

using namespace esmdaloc;
using namespace esmdaloc::testing;

namespace {

double loop_variance(const Matrix & m, Eigen::Index i) {
  double mean = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) mean += m(i, j);
  mean /= static_cast<double>(m.cols());
  double s = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += (m(i, j) - mean) * (m(i, j) - mean);
  return s / static_cast<double>(m.cols() - 1);
}

double loop_mean(const Matrix & m, Eigen::Index i) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(i, j);
  return s / static_cast<double>(m.cols());
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("objective examples") {
  ObservationSet obs = simple_obs(Vector::Constant(1, 3.0), Vector::Ones(1));
  CHECK(objective(obs, DataBatch(Matrix::Constant(1, 2, 3.0))).isZero(0.0));
  CHECK(objective(obs, DataBatch(Matrix::Constant(1, 1, 2.0)))[0] == doctest::Approx(0.5));
  obs.error_variance[0] = 4.0;
  CHECK(objective(obs, DataBatch(Matrix::Constant(1, 1, 1.0)))[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(objective(obs, DataBatch(Matrix::Zero(2, 2))), InvalidArgument);
}

TEST_CASE("objective matches a loop oracle and is scale invariant") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const int nd = uniform_int(rng, 1, 8), n = uniform_int(rng, 1, 6);
    const Matrix d = random_matrix(rng, nd, n);
    const Vector var = (random_matrix(rng, nd, 1).col(0).array().abs() + 0.1).matrix();
    const ObservationSet obs = simple_obs(random_matrix(rng, nd, 1).col(0), var);
    const Vector got = objective(obs, DataBatch(d));
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < nd; ++k) s += (obs.d_obs[k] - d(k, j)) * (obs.d_obs[k] - d(k, j)) / var[k];
      CHECK(std::abs(got[j] - s / (2.0 * nd)) < 1e-10);
    }
    const double scale = 3.7;
    const ObservationSet scaled = simple_obs(scale * obs.d_obs, scale * scale * var);
    CHECK((objective(scaled, DataBatch(scale * d)) - got).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("normalized variance examples") {
  Rng rng(2);
  const Ensemble prior(random_matrix(rng, 3, 20));
  CHECK(normalized_variance(prior, prior) == doctest::Approx(1.0));
  CHECK(normalized_variance(prior, Ensemble(Matrix::Zero(3, 20))) == 0.0);
  const Matrix centered = prior.matrix().colwise() - prior.matrix().rowwise().mean();
  CHECK(normalized_variance(prior, Ensemble(centered / std::sqrt(2.0))) == doctest::Approx(0.5));
  CHECK(std::isnan(normalized_variance(prior, prior, {false, false, false})));
  Matrix flat = prior.matrix();
  flat.row(1).setConstant(1.0);
  CHECK_THROWS_AS(normalized_variance(Ensemble(flat), prior), InvalidArgument);
  CHECK_NOTHROW(normalized_variance(Ensemble(flat), prior, {true, false, true}));
}

TEST_CASE("normalized variance and mean offset match loop oracles") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const int nm = uniform_int(rng, 1, 8), n = uniform_int(rng, 2, 10);
    const Matrix a = random_matrix(rng, nm, n), b = random_matrix(rng, nm, n + 3);
    std::vector<bool> mask(static_cast<std::size_t>(nm));
    int count = 0;
    for (auto && v : mask) {
      v = uniform_int(rng, 0, 1) == 1;
      count += v;
    }
    double s = 0.0, off = 0.0;
    for (int i = 0; i < nm; ++i) {
      if (mask[static_cast<std::size_t>(i)]) s += loop_variance(b, i) / loop_variance(a, i);
      off += std::abs(loop_mean(b, i) - loop_mean(a, i));
    }
    const double nv = normalized_variance(Ensemble(a), Ensemble(b), mask);
    if (count == 0) {
      CHECK(std::isnan(nv));
    } else {
      CHECK(std::abs(nv - s / count) < 1e-10);
    }
    CHECK(std::abs(mean_offset(Ensemble(a), Ensemble(b)) - off / nm) < 1e-10);
  }
}

TEST_CASE("mean offset examples") {
  Rng rng(4);
  const Matrix a = random_matrix(rng, 2, 10);
  CHECK(mean_offset(Ensemble(a), Ensemble(a)) == 0.0);
  Matrix b = a;
  b.row(0).array() += 1.0;
  b.row(1).array() -= 3.0;
  CHECK(mean_offset(Ensemble(a), Ensemble(b)) == doctest::Approx(2.0));
  Matrix rev = b.rowwise().reverse();
  CHECK(mean_offset(Ensemble(a), Ensemble(rev)) == doctest::Approx(2.0));
}

TEST_CASE("divergence extremes") {
  Rng rng(5);
  const Matrix a = random_matrix(rng, 3, 50);
  const Divergences same = distribution_divergences(a, a);
  CHECK(same.bc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.js == doctest::Approx(0.0).epsilon(1e-12));
  Matrix lo = Matrix::Zero(1, 10), hi = Matrix::Zero(1, 10);
  for (int j = 0; j < 10; ++j) {
    lo(0, j) = j * 0.01;
    hi(0, j) = 5.0 + j * 0.01;
  }
  HistogramOptions raw;
  raw.smoothing = 0.0;
  const Divergences disjoint = distribution_divergences(lo, hi, raw);
  CHECK(disjoint.bc == doctest::Approx(0.0));
  CHECK(disjoint.js == doctest::Approx(1.0));
}

TEST_CASE("divergences are symmetric and bounded") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const Matrix a = random_matrix(rng, 2, 30);
    const Matrix b = (random_matrix(rng, 2, 40).array() * 1.5 + 0.3).matrix();
    const Divergences ab = distribution_divergences(a, b), ba = distribution_divergences(b, a);
    CHECK(ab.bc == doctest::Approx(ba.bc).epsilon(1e-12));
    CHECK(ab.js == doctest::Approx(ba.js).epsilon(1e-12));
    CHECK(ab.bc >= 0.0);
    CHECK(ab.bc <= 1.0 + 1e-12);
    CHECK(ab.js >= 0.0);
    CHECK(ab.js <= 1.0 + 1e-12);
  }
}

TEST_CASE("gaussian bhattacharyya coefficient") {
  const ParameterSpace space = identity_space(1);
  const Matrix a = sample_prior(space, 200000, 1).matrix();
  const Matrix b = (sample_prior(space, 200000, 2).matrix().array() + 1.0).matrix();
  CHECK(std::abs(distribution_divergences(a, b).bc - std::exp(-1.0 / 8.0)) < 0.03);
}

TEST_CASE("correlation error examples") {
  Matrix d(2, 2);
  d << 3, 4, 0, 0;
  const CorrelationError e = correlation_error(d, Matrix::Zero(2, 2));
  CHECK(e.frobenius_rmse == doctest::Approx(2.5));
  CHECK(e.spectral == doctest::Approx(5.0).epsilon(1e-10));
  const CorrelationError z = correlation_error(d, d);
  CHECK(z.frobenius_rmse == 0.0);
  CHECK(z.spectral == 0.0);
  CHECK_THROWS_AS(correlation_error(d, Matrix::Zero(3, 2)), InvalidArgument);
}

TEST_CASE("correlation error matches oracles on random matrices") {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const int r = uniform_int(rng, 1, 9), c = uniform_int(rng, 1, 9);
    const Matrix a = random_matrix(rng, r, c), b = random_matrix(rng, r, c);
    double s = 0.0;
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) s += (a(i, k) - b(i, k)) * (a(i, k) - b(i, k));
    const CorrelationError e = correlation_error(a, b);
    CHECK(std::abs(e.frobenius_rmse - std::sqrt(s / (r * c))) < 1e-10);
    const double sv = Eigen::JacobiSVD<Matrix>(a - b).singularValues()(0);
    CHECK(std::abs(e.spectral - sv) < 1e-8 * std::max(1.0, sv));
    CHECK(e.spectral <= std::sqrt(s) + 1e-10);
  }
}

TEST_CASE("gold standard of a linear model approaches the analytic correlation") {
  Rng rng(8);
  const Matrix g = random_matrix(rng, 3, 4);
  const LinearModel model(g);
  const ParameterSpace space = identity_space(4);
  const Matrix rho = gold_standard_correlation(space, model, 50000, 9);
  // corr(m_i, d_k) = G_ki / ||G_k||.
  Matrix exact(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) exact(i, k) = g(k, i) / g.row(k).norm();
  CHECK((rho - exact).cwiseAbs().maxCoeff() < 0.02);
  CHECK(gold_standard_correlation(space, model, 500, 9) == gold_standard_correlation(space, model, 500, 9, 3));
}

TEST_CASE("dummy correlations shrink with the reference size") {
  Rng rng(9);
  Matrix g = random_matrix(rng, 3, 4);
  g.col(3).setZero();
  const LinearModel model(g);
  const ParameterSpace space = identity_space(4);
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    small += gold_standard_correlation(space, model, 200, s).row(3).cwiseAbs().maxCoeff();
    large += gold_standard_correlation(space, model, 20000, s).row(3).cwiseAbs().maxCoeff();
  }
  CHECK(large < small);
}

TEST_CASE("report fields") {
  Rng rng(10);
  const ParameterSpace space({"a", "b"}, Vector::Zero(2), Matrix::Identity(2, 2), {}, {false, true});
  const Ensemble prior(random_matrix(rng, 2, 30));
  Matrix post = prior.matrix();
  post.row(0) *= 0.5;
  const ObservationSet obs = simple_obs(Vector::Zero(1), Vector::Ones(1));
  const DataBatch pred(Matrix::Ones(1, 30));
  const MetricsReport r = make_report(space, obs, prior, Ensemble(post), pred);
  CHECK(r.objective_mean == doctest::Approx(0.5));
  CHECK(r.objective_std == 0.0);
  CHECK(r.nv_dummy == doctest::Approx(1.0));
  CHECK(r.nv_normal == doctest::Approx(0.25));
  CHECK(r.nv_all == doctest::Approx(0.625));
}

}
