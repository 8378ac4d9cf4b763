/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <vector>

#include "esmdaloc/core.hpp"

namespace esmdaloc {

/// Binary regression tree in flattened form. Leaves have feature == -1;
/// a sample goes left when x[feature] <= threshold.
struct RegressionTree {
  std::vector<std::int32_t> feature;
  std::vector<double> threshold;
  std::vector<std::int32_t> left;
  std::vector<std::int32_t> right;
  std::vector<double> value;

  std::size_t n_nodes() const { return feature.size(); }
  double predict(const double * x) const {
    std::int32_t node = 0;
    while (feature[node] >= 0) node = x[feature[node]] <= threshold[node] ? left[node] : right[node];
    return value[node];
  }
  /// Sorted distinct features used by internal nodes.
  std::vector<int> split_features() const;
};

/// Sum (or average) of trees plus a constant offset.
struct TreeEnsemble {
  double base = 0.0;
  bool average = false;
  std::vector<RegressionTree> trees;

  double predict(const double * x) const {
    double acc = 0.0;
    for (const auto & t : trees) acc += t.predict(x);
    if (average && !trees.empty()) acc /= static_cast<double>(trees.size());
    return base + acc;
  }
};

/// Training inputs in both layouts plus per-feature sample orderings, shared
/// by every tree and output fitted on the same parameter matrix.
class FeatureTable {
 public:
  /// `params` is N_features x N_samples, one sample per column.
  explicit FeatureTable(const Matrix & params);

  Eigen::Index n_features() const { return n_features_; }
  Eigen::Index n_samples() const { return n_samples_; }
  double at(Eigen::Index feature, Eigen::Index sample) const { return by_feature_[feature * n_samples_ + sample]; }
  const double * sample(Eigen::Index s) const { return samples_.col(s).data(); }
  const std::vector<std::int32_t> & order(Eigen::Index feature) const { return order_[feature]; }

 private:
  Eigen::Index n_features_;
  Eigen::Index n_samples_;
  Matrix samples_;
  std::vector<double> by_feature_;
  std::vector<std::vector<std::int32_t>> order_;
};

struct TreeParams {
  int max_depth = 8;            // < 0: unlimited
  int min_samples_leaf = 1;
  int max_features = 0;         // <= 0 or >= N_features: all features at every node
  bool random_thresholds = false;
};

/// Grows one squared-error regression tree. `weights` are per-sample
/// multiplicities (0 excludes a sample); `rng` draws feature subsets and
/// random thresholds and is untouched otherwise.
RegressionTree grow_tree(const FeatureTable & x, const std::vector<double> & targets,
                         const std::vector<double> & weights, const TreeParams & params, Rng & rng);

}  // namespace esmdaloc
