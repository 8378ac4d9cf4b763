/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"

#include "esmdaloc/surrogate.hpp"

using namespace esmdaloc;
using namespace esmdaloc::testing;

namespace {

const RegressorKind kAllKinds[] = {RegressorKind::linear, RegressorKind::cart, RegressorKind::random_forest,
                                   RegressorKind::extra_trees, RegressorKind::gbdt};

RegressorSpec small_spec(RegressorKind kind, std::uint64_t seed = 3) {
  RegressorSpec s = RegressorSpec::defaults(kind, seed);
  if (kind == RegressorKind::random_forest || kind == RegressorKind::extra_trees || kind == RegressorKind::gbdt)
    s.n_estimators = 20;
  return s;
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("declared defaults") {
  const auto cart = RegressorSpec::defaults(RegressorKind::cart);
  CHECK(cart.max_depth == 8);
  CHECK(cart.min_samples_leaf == 5);
  const auto rf = RegressorSpec::defaults(RegressorKind::random_forest);
  CHECK(rf.n_estimators == 100);
  CHECK(rf.max_features == RegressorSpec::kSqrtFeatures);
  CHECK(rf.bootstrap);
  const auto et = RegressorSpec::defaults(RegressorKind::extra_trees);
  CHECK(et.n_estimators == 100);
  CHECK(!et.bootstrap);
  const auto gb = RegressorSpec::defaults(RegressorKind::gbdt);
  CHECK(gb.n_estimators == 100);
  CHECK(gb.max_depth == 3);
  CHECK(gb.learning_rate == 0.1);
  for (auto k : kAllKinds) CHECK(parse_regressor_kind(to_string(k)) == k);
}

TEST_CASE("linear fit recovers an exact affine map") {
  Matrix m(1, 10), d(1, 10);
  for (int j = 0; j < 10; ++j) {
    m(0, j) = 0.3 * j - 1.0;
    d(0, j) = 2.0 * m(0, j) + 1.0;
  }
  const auto model = fit(Ensemble(m), DataBatch(d), RegressorSpec::defaults(RegressorKind::linear));
  CHECK(model.training_rmse()[0] < 1e-10);
  CHECK(model.slope()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(model.intercept()[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(predict(model, Matrix::Constant(1, 1, 3.0)).matrix()(0, 0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(predict(model, Matrix(1, 0)).matrix().cols() == 0);
}

TEST_CASE("rank-deficient linear fit returns the minimum-norm solution") {
  Rng rng(1);
  Matrix m(2, 8);
  m.row(0) = random_matrix(rng, 1, 8);
  m.row(1) = m.row(0);
  const Matrix d = 4.0 * m.row(0);
  const auto model = fit(Ensemble(m), DataBatch(d), RegressorSpec::defaults(RegressorKind::linear));
  CHECK(model.slope()(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(model.slope()(0, 1) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("constant targets are predicted by every kind") {
  Rng rng(2);
  const Matrix m = random_matrix(rng, 3, 30);
  const Matrix d = Matrix::Constant(2, 30, 4.25);
  const Matrix probe = random_matrix(rng, 3, 7);
  for (auto k : kAllKinds) {
    const auto model = fit(Ensemble(m), DataBatch(d), small_spec(k));
    CHECK((predict(model, probe).matrix().array() - 4.25).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("constant inputs make tree kinds predict the output mean") {
  Rng rng(2);
  const Matrix m = Matrix::Constant(3, 20, 1.0);
  const Matrix d = random_matrix(rng, 1, 20);
  const double mean = d.mean();
  for (auto k : {RegressorKind::cart, RegressorKind::extra_trees, RegressorKind::gbdt}) {
    const auto model = fit(Ensemble(m), DataBatch(d), small_spec(k));
    CHECK(predict(model, random_matrix(rng, 3, 4)).matrix().isApproxToConstant(mean, 1e-12));
  }
}

TEST_CASE("fits are deterministic and independent of the worker count") {
  Rng rng(3);
  const Matrix m = random_matrix(rng, 6, 40);
  const Matrix d = random_matrix(rng, 4, 40);
  const Matrix probe = random_matrix(rng, 6, 15);
  for (auto k : kAllKinds) {
    const auto a = fit(Ensemble(m), DataBatch(d), small_spec(k, 9), 1);
    const auto b = fit(Ensemble(m), DataBatch(d), small_spec(k, 9), 3);
    CHECK(predict(a, probe).matrix() == predict(b, probe, 2).matrix());
  }
}

TEST_CASE("a fully grown tree interpolates its training points") {
  Rng rng(4);
  const Matrix m = random_matrix(rng, 3, 25);
  const Matrix d = random_matrix(rng, 2, 25);
  RegressorSpec s = RegressorSpec::defaults(RegressorKind::cart);
  s.max_depth = -1;
  s.min_samples_leaf = 1;
  const auto model = fit(Ensemble(m), DataBatch(d), s);
  CHECK((predict(model, m).matrix() - d).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(model.training_rmse().maxCoeff() < 1e-12);
}

TEST_CASE("forest prediction is the mean of its trees") {
  Rng rng(5);
  const Matrix m = random_matrix(rng, 5, 30);
  const Matrix d = random_matrix(rng, 1, 30);
  const auto model = fit(Ensemble(m), DataBatch(d), small_spec(RegressorKind::random_forest));
  const Matrix probe = random_matrix(rng, 5, 10);
  const Matrix pred = predict(model, probe).matrix();
  const auto & ens = model.outputs().front();
  for (Eigen::Index j = 0; j < probe.cols(); ++j) {
    double sum = 0.0;
    for (const auto & t : ens.trees) sum += t.predict(probe.col(j).data());
    CHECK(pred(0, j) == doctest::Approx(sum / static_cast<double>(ens.trees.size())).epsilon(1e-14));
  }
}

TEST_CASE("single-tree boosting with unit learning rate equals cart") {
  Rng rng(6);
  const Matrix m = random_matrix(rng, 4, 50);
  const Matrix d = random_matrix(rng, 2, 50);
  RegressorSpec gb = RegressorSpec::defaults(RegressorKind::gbdt);
  gb.n_estimators = 1;
  gb.learning_rate = 1.0;
  RegressorSpec cart = RegressorSpec::defaults(RegressorKind::cart);
  cart.max_depth = gb.max_depth;
  cart.min_samples_leaf = gb.min_samples_leaf;
  const Matrix probe = random_matrix(rng, 4, 20);
  const Matrix a = predict(fit(Ensemble(m), DataBatch(d), gb), probe).matrix();
  const Matrix b = predict(fit(Ensemble(m), DataBatch(d), cart), probe).matrix();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trees never split on coordinates the data ignore") {
  Rng rng(7);
  const Matrix m = random_matrix(rng, 6, 80);
  Matrix d(1, 80);
  // Piecewise constant in the first two inputs, so exact splits on them leave pure leaves.
  for (int j = 0; j < 80; ++j) d(0, j) = 2.0 * (m(0, j) > 0.0) + (m(1, j) > 0.5);
  for (auto k : {RegressorKind::cart, RegressorKind::gbdt}) {
    const auto model = fit(Ensemble(m), DataBatch(d), small_spec(k));
    for (const auto & t : model.outputs().front().trees)
      for (int f : t.split_features()) CHECK(f < 2);
  }
}

TEST_CASE("linear predictions respond to a coordinate through its coefficient") {
  Rng rng(8);
  const Matrix m = random_matrix(rng, 3, 40);
  const Matrix d = random_matrix(rng, 2, 40);
  const auto model = fit(Ensemble(m), DataBatch(d), RegressorSpec::defaults(RegressorKind::linear));
  Matrix probe = random_matrix(rng, 3, 5);
  Matrix shifted = probe;
  shifted.row(2).array() += 1.5;
  const Matrix diff = predict(model, shifted).matrix() - predict(model, probe).matrix();
  for (Eigen::Index j = 0; j < 5; ++j) CHECK((diff.col(j) - 1.5 * model.slope().col(2)).norm() < 1e-12);
}

TEST_CASE("super-ensemble covariance of a linear surrogate") {
  Rng rng(9);
  const ParameterSpace space = identity_space(3);
  const Matrix m = random_matrix(rng, 3, 30);
  const Matrix d = random_matrix(rng, 2, 30);
  const auto model = fit(Ensemble(m), DataBatch(d), RegressorSpec::defaults(RegressorKind::linear));
  const Matrix expected = model.slope().transpose();  // C_mm beta^T with C_mm = I
  const Matrix got = ml_covariance(model, space, 200000, 12);
  CHECK((got - expected).norm() / expected.norm() < 0.02);
  // Exact factorization through the super-ensemble auto-covariance.
  const Matrix ms = sample_prior(space, 5000, 33).matrix();
  const Matrix css = estimate_auto_cov(ms);
  const Matrix cxx = estimate_auto_cov(m), cxy = estimate_cross_cov(m, d);
  const Matrix factored = css * cxx.ldlt().solve(cxy);
  CHECK((ml_covariance(model, space, 5000, 33) - factored).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("constant surrogate gives zero covariance") {
  Rng rng(10);
  const auto model = fit(Ensemble(random_matrix(rng, 3, 10)), DataBatch(Matrix::Constant(2, 10, 1.0)),
                         small_spec(RegressorKind::gbdt));
  CHECK(ml_covariance(model, identity_space(3), 500, 1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("surrogates round-trip through the binary format") {
  Rng rng(11);
  const Matrix m = random_matrix(rng, 4, 30);
  const Matrix d = random_matrix(rng, 3, 30);
  const Matrix probe = random_matrix(rng, 4, 9);
  const auto dir = std::filesystem::temp_directory_path() / "esmdaloc_surrogate_test";
  std::filesystem::create_directories(dir);
  for (auto k : kAllKinds) {
    const auto model = fit(Ensemble(m), DataBatch(d), small_spec(k));
    const std::string path = (dir / (to_string(k) + ".bin")).string();
    save_surrogate(model, path);
    const auto back = load_surrogate(path);
    CHECK(back.kind() == k);
    CHECK(predict(back, probe).matrix() == predict(model, probe).matrix());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("dimension mismatches are rejected") {
  Rng rng(12);
  const auto model = fit(Ensemble(random_matrix(rng, 3, 10)), DataBatch(random_matrix(rng, 2, 10)),
                         RegressorSpec::defaults(RegressorKind::linear));
  CHECK_THROWS_AS(predict(model, Matrix::Zero(4, 2)), InvalidArgument);
  CHECK_THROWS_AS(fit(Ensemble(random_matrix(rng, 3, 10)), DataBatch(random_matrix(rng, 2, 9)),
                      RegressorSpec::defaults(RegressorKind::linear)),
                  InvalidArgument);
}

}
