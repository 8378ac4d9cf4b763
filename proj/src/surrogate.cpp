/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/surrogate.hpp"

#include <cmath>

#include <Eigen/QR>

#include "binary_io.hpp"

namespace esmdaloc {

std::string to_string(RegressorKind k) {
  switch (k) {
    case RegressorKind::linear: return "linear";
    case RegressorKind::cart: return "cart";
    case RegressorKind::random_forest: return "random_forest";
    case RegressorKind::extra_trees: return "extra_trees";
    case RegressorKind::gbdt: return "gbdt";
  }
  return "?";
}

RegressorKind parse_regressor_kind(const std::string & s) {
  for (auto k : {RegressorKind::linear, RegressorKind::cart, RegressorKind::random_forest,
                 RegressorKind::extra_trees, RegressorKind::gbdt})
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown regressor kind '" + s + "'");
}

RegressorSpec RegressorSpec::defaults(RegressorKind kind, std::uint64_t seed) {
  RegressorSpec s;
  s.kind = kind;
  s.seed = seed;
  switch (kind) {
    case RegressorKind::linear:
      s.n_estimators = 0;
      s.max_depth = 0;
      s.min_samples_leaf = 0;
      s.learning_rate = 0.0;
      break;
    case RegressorKind::cart:
      s.n_estimators = 1;
      s.max_depth = 8;
      s.min_samples_leaf = 5;
      s.learning_rate = 1.0;
      break;
    case RegressorKind::random_forest:
    case RegressorKind::extra_trees:
      s.n_estimators = 100;
      s.max_depth = -1;
      s.min_samples_leaf = 1;
      s.learning_rate = 1.0;
      s.max_features = kSqrtFeatures;
      s.bootstrap = kind == RegressorKind::random_forest;
      break;
    case RegressorKind::gbdt:
      s.n_estimators = 100;
      s.max_depth = 3;
      s.min_samples_leaf = 5;
      s.learning_rate = 0.1;
      break;
  }
  return s;
}

void RegressorSpec::validate() const {
  if (kind == RegressorKind::linear) return;
  require(n_estimators >= 1, "regressor: n_estimators must be >= 1");
  require(min_samples_leaf >= 1, "regressor: min_samples_leaf must be >= 1");
  require(max_depth != 0, "regressor: max_depth must be positive or negative (unlimited)");
  require(max_features >= kSqrtFeatures, "regressor: invalid max_features");
  if (kind == RegressorKind::gbdt) require(learning_rate > 0.0, "regressor: learning_rate must be > 0");
}

namespace {

int resolved_features(const RegressorSpec & spec, Eigen::Index n_inputs) {
  if (spec.max_features == RegressorSpec::kSqrtFeatures)
    return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_inputs)))));
  return spec.max_features;
}

TreeEnsemble fit_output(const FeatureTable & x, const std::vector<double> & y, const RegressorSpec & spec,
                        std::uint64_t output) {
  const auto n = x.n_samples();
  TreeParams tp;
  tp.max_depth = spec.max_depth;
  tp.min_samples_leaf = spec.min_samples_leaf;
  tp.max_features = resolved_features(spec, x.n_features());
  tp.random_thresholds = spec.kind == RegressorKind::extra_trees;

  TreeEnsemble out;
  const std::vector<double> unit(static_cast<std::size_t>(n), 1.0);
  switch (spec.kind) {
    case RegressorKind::cart: {
      Rng rng(derive_seed(spec.seed, output, 0));
      out.trees.push_back(grow_tree(x, y, unit, tp, rng));
      break;
    }
    case RegressorKind::random_forest:
    case RegressorKind::extra_trees: {
      out.average = true;
      out.trees.reserve(static_cast<std::size_t>(spec.n_estimators));
      std::vector<double> w(static_cast<std::size_t>(n));
      for (int t = 0; t < spec.n_estimators; ++t) {
        Rng rng(derive_seed(spec.seed, output, static_cast<std::uint64_t>(t)));
        if (spec.bootstrap) {
          std::fill(w.begin(), w.end(), 0.0);
          std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
          for (Eigen::Index s = 0; s < n; ++s) w[pick(rng)] += 1.0;
        } else {
          std::fill(w.begin(), w.end(), 1.0);
        }
        out.trees.push_back(grow_tree(x, y, w, tp, rng));
      }
      break;
    }
    case RegressorKind::gbdt: {
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= static_cast<double>(n);
      out.base = mean;
      std::vector<double> current(static_cast<std::size_t>(n), mean);
      std::vector<double> residual(static_cast<std::size_t>(n));
      out.trees.reserve(static_cast<std::size_t>(spec.n_estimators));
      for (int t = 0; t < spec.n_estimators; ++t) {
        for (Eigen::Index s = 0; s < n; ++s) residual[s] = y[s] - current[s];
        Rng rng(derive_seed(spec.seed, output, static_cast<std::uint64_t>(t)));
        RegressionTree tree = grow_tree(x, residual, unit, tp, rng);
        for (auto & v : tree.value) v *= spec.learning_rate;
        for (Eigen::Index s = 0; s < n; ++s) current[s] += tree.predict(x.sample(s));
        out.trees.push_back(std::move(tree));
      }
      break;
    }
    case RegressorKind::linear:
      break;
  }
  return out;
}

}  // namespace

TrainedSurrogate fit(const Ensemble & params, const DataBatch & data, const RegressorSpec & spec,
                     std::size_t workers) {
  spec.validate();
  const Matrix & m = params.matrix();
  const Matrix & d = data.matrix();
  require(m.cols() == d.cols(), "fit: parameter and data member counts differ");
  require(m.cols() >= 2, "fit: at least two training members required");

  TrainedSurrogate model;
  model.spec_ = spec;
  model.n_inputs_ = m.rows();
  model.n_outputs_ = d.rows();
  model.n_train_ = m.cols();

  if (spec.kind == RegressorKind::linear) {
    // Least squares with intercept, solved on centered data; the complete
    // orthogonal decomposition yields the minimum-norm slope when the
    // design is rank deficient.
    const Vector m_mean = m.rowwise().mean();
    const Vector d_mean = d.rowwise().mean();
    const Matrix xc = (m.colwise() - m_mean).transpose();
    const Matrix yc = (d.colwise() - d_mean).transpose();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xc);
    const Matrix beta = cod.solve(yc);  // N_m x N_d
    model.slope_ = beta.transpose();
    model.intercept_ = d_mean - model.slope_ * m_mean;
  } else {
    const FeatureTable table(m);
    model.outputs_.resize(static_cast<std::size_t>(d.rows()));
    parallel_for(static_cast<std::size_t>(d.rows()), workers, [&](std::size_t k) {
      const auto row = static_cast<Eigen::Index>(k);
      std::vector<double> y(static_cast<std::size_t>(d.cols()));
      for (Eigen::Index s = 0; s < d.cols(); ++s) y[s] = d(row, s);
      model.outputs_[k] = fit_output(table, y, spec, k);
    });
  }

  const Matrix residual = predict(model, m, workers).matrix() - d;
  model.training_rmse_ = (residual.rowwise().squaredNorm() / static_cast<double>(m.cols())).cwiseSqrt();
  return model;
}

DataBatch predict(const TrainedSurrogate & model, const Matrix & params_matrix, std::size_t workers) {
  require(params_matrix.rows() == model.n_inputs(), "predict: parameter count differs from the training data");
  const Eigen::Index n = params_matrix.cols();
  if (model.kind() == RegressorKind::linear) {
    Matrix out = model.slope() * params_matrix;
    out.colwise() += model.intercept();
    return DataBatch(std::move(out));
  }
  Matrix out(model.n_outputs(), n);
  parallel_for(static_cast<std::size_t>(model.n_outputs()), workers, [&](std::size_t k) {
    const auto & ens = model.outputs()[k];
    for (Eigen::Index j = 0; j < n; ++j)
      out(static_cast<Eigen::Index>(k), j) = ens.predict(params_matrix.col(j).data());
  });
  return DataBatch(std::move(out));
}

SuperEnsembleStatistics super_ensemble_statistics(const TrainedSurrogate & model, const ParameterSpace & space,
                                                  Eigen::Index n_super, std::uint64_t seed, std::size_t workers) {
  require(n_super >= 2, "ml_covariance: super-ensemble size must be at least 2");
  require(static_cast<Eigen::Index>(space.size()) == model.n_inputs(),
          "ml_covariance: parameter space does not match the surrogate");
  const Ensemble ms = sample_prior(space, n_super, seed);
  const DataBatch ds = predict(model, ms.matrix(), workers);
  return {estimate_cross_cov(ms, ds), estimate_variances(ms.matrix()), estimate_variances(ds.matrix())};
}

Matrix ml_covariance(const TrainedSurrogate & model, const ParameterSpace & space, Eigen::Index n_super,
                     std::uint64_t seed, std::size_t workers) {
  return super_ensemble_statistics(model, space, n_super, seed, workers).cross_cov;
}

// -----------------------------------------------------------------------------
// Binary layout (little-endian):
//   char[8] "ESMDASUR", u32 version, u32 kind,
//   i32 n_estimators, i32 max_depth, i32 min_samples_leaf, i32 max_features,
//   f64 learning_rate, u8 bootstrap, u64 seed,
//   i64 n_inputs, i64 n_outputs, i64 n_train, f64[n_outputs] training_rmse,
//   linear: f64[n_outputs] intercept, f64[n_outputs * n_inputs] slope (column-major)
//   trees:  per output { f64 base, u8 average, u64 n_trees,
//             per tree { u64 nodes, i32[] feature, f64[] threshold, i32[] left, i32[] right, f64[] value } }

namespace {
constexpr char kSurrogateMagic[8] = {'E', 'S', 'M', 'D', 'A', 'S', 'U', 'R'};
constexpr std::uint32_t kSurrogateVersion = 1;
}  // namespace

void save_surrogate(const TrainedSurrogate & model, const std::string & path) {
  detail::BinaryWriter w(path);
  const auto & s = model.spec();
  w.bytes(kSurrogateMagic, sizeof(kSurrogateMagic));
  w.pod(kSurrogateVersion);
  w.pod(static_cast<std::uint32_t>(s.kind));
  w.pod(static_cast<std::int32_t>(s.n_estimators));
  w.pod(static_cast<std::int32_t>(s.max_depth));
  w.pod(static_cast<std::int32_t>(s.min_samples_leaf));
  w.pod(static_cast<std::int32_t>(s.max_features));
  w.pod(s.learning_rate);
  w.pod(static_cast<std::uint8_t>(s.bootstrap));
  w.pod(s.seed);
  w.pod(static_cast<std::int64_t>(model.n_inputs()));
  w.pod(static_cast<std::int64_t>(model.n_outputs()));
  w.pod(static_cast<std::int64_t>(model.n_train()));
  w.array(model.training_rmse().data(), static_cast<std::size_t>(model.n_outputs()));
  if (model.kind() == RegressorKind::linear) {
    w.array(model.intercept().data(), static_cast<std::size_t>(model.intercept().size()));
    w.array(model.slope().data(), static_cast<std::size_t>(model.slope().size()));
  } else {
    for (const auto & ens : model.outputs()) {
      w.pod(ens.base);
      w.pod(static_cast<std::uint8_t>(ens.average));
      w.pod(static_cast<std::uint64_t>(ens.trees.size()));
      for (const auto & t : ens.trees) {
        w.pod(static_cast<std::uint64_t>(t.n_nodes()));
        w.array(t.feature.data(), t.n_nodes());
        w.array(t.threshold.data(), t.n_nodes());
        w.array(t.left.data(), t.n_nodes());
        w.array(t.right.data(), t.n_nodes());
        w.array(t.value.data(), t.n_nodes());
      }
    }
  }
  w.finish();
}

TrainedSurrogate load_surrogate(const std::string & path) {
  detail::BinaryReader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kSurrogateMagic, sizeof(magic)) != 0)
    throw std::runtime_error("'" + path + "' is not a surrogate file");
  if (r.pod<std::uint32_t>() != kSurrogateVersion) throw std::runtime_error("unsupported surrogate file version");
  TrainedSurrogate model;
  auto & s = model.spec_;
  const auto kind = r.pod<std::uint32_t>();
  if (kind > static_cast<std::uint32_t>(RegressorKind::gbdt)) throw std::runtime_error("corrupt surrogate kind");
  s.kind = static_cast<RegressorKind>(kind);
  s.n_estimators = r.pod<std::int32_t>();
  s.max_depth = r.pod<std::int32_t>();
  s.min_samples_leaf = r.pod<std::int32_t>();
  s.max_features = r.pod<std::int32_t>();
  s.learning_rate = r.pod<double>();
  s.bootstrap = r.pod<std::uint8_t>() != 0;
  s.seed = r.pod<std::uint64_t>();
  model.n_inputs_ = r.pod<std::int64_t>();
  model.n_outputs_ = r.pod<std::int64_t>();
  model.n_train_ = r.pod<std::int64_t>();
  if (model.n_inputs_ < 0 || model.n_outputs_ < 0 || model.n_train_ < 0)
    throw std::runtime_error("corrupt surrogate dimensions");
  model.training_rmse_.resize(model.n_outputs_);
  r.array(model.training_rmse_.data(), static_cast<std::size_t>(model.n_outputs_));
  if (s.kind == RegressorKind::linear) {
    model.intercept_.resize(model.n_outputs_);
    model.slope_.resize(model.n_outputs_, model.n_inputs_);
    r.array(model.intercept_.data(), static_cast<std::size_t>(model.intercept_.size()));
    r.array(model.slope_.data(), static_cast<std::size_t>(model.slope_.size()));
  } else {
    model.outputs_.resize(static_cast<std::size_t>(model.n_outputs_));
    for (auto & ens : model.outputs_) {
      ens.base = r.pod<double>();
      ens.average = r.pod<std::uint8_t>() != 0;
      const auto n_trees = r.pod<std::uint64_t>();
      ens.trees.resize(static_cast<std::size_t>(n_trees));
      for (auto & t : ens.trees) {
        const auto nodes = static_cast<std::size_t>(r.pod<std::uint64_t>());
        t.feature.resize(nodes);
        t.threshold.resize(nodes);
        t.left.resize(nodes);
        t.right.resize(nodes);
        t.value.resize(nodes);
        r.array(t.feature.data(), nodes);
        r.array(t.threshold.data(), nodes);
        r.array(t.left.data(), nodes);
        r.array(t.right.data(), nodes);
        r.array(t.value.data(), nodes);
        for (std::size_t i = 0; i < nodes; ++i) {
          const bool leaf = t.feature[i] < 0;
          const bool bad_feature = !leaf && t.feature[i] >= model.n_inputs_;
          const bool bad_child = !leaf && (t.left[i] <= static_cast<std::int32_t>(i) ||
                                           t.right[i] <= static_cast<std::int32_t>(i) ||
                                           static_cast<std::size_t>(t.left[i]) >= nodes ||
                                           static_cast<std::size_t>(t.right[i]) >= nodes);
          if (bad_feature || bad_child) throw std::runtime_error("corrupt tree structure in '" + path + "'");
        }
        if (nodes == 0) throw std::runtime_error("corrupt tree structure in '" + path + "'");
      }
    }
  }
  return model;
}

}  // namespace esmdaloc
