/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/tree.hpp"

#include <limits>
#include <numeric>
#include <set>

namespace esmdaloc {

std::vector<int> RegressionTree::split_features() const {
  std::set<int> used;
  for (auto f : feature)
    if (f >= 0) used.insert(f);
  return {used.begin(), used.end()};
}

FeatureTable::FeatureTable(const Matrix & params)
  : n_features_(params.rows()), n_samples_(params.cols()), samples_(params) {
  require(params.allFinite(), "FeatureTable: non-finite inputs");
  by_feature_.resize(static_cast<std::size_t>(n_features_ * n_samples_));
  order_.resize(static_cast<std::size_t>(n_features_));
  for (Eigen::Index f = 0; f < n_features_; ++f) {
    for (Eigen::Index s = 0; s < n_samples_; ++s) by_feature_[f * n_samples_ + s] = params(f, s);
    auto & ord = order_[f];
    ord.resize(static_cast<std::size_t>(n_samples_));
    std::iota(ord.begin(), ord.end(), 0);
    const double * col = &by_feature_[f * n_samples_];
    std::stable_sort(ord.begin(), ord.end(), [col](std::int32_t a, std::int32_t b) { return col[a] < col[b]; });
  }
}

namespace {

struct NodeStats {
  double w = 0.0;
  double wy = 0.0;
  double wyy = 0.0;
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  int depth = 0;

  void add(double weight, double y) {
    w += weight;
    wy += weight * y;
    wyy += weight * y * y;
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  double sse() const { return w > 0.0 ? wyy - wy * wy / w : 0.0; }
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double split_gain(double lw, double lwy, double w, double wy) {
  const double rw = w - lw;
  const double rwy = wy - lwy;
  return lwy * lwy / lw + rwy * rwy / rw - wy * wy / w;
}

}  // namespace

RegressionTree grow_tree(const FeatureTable & x, const std::vector<double> & targets,
                         const std::vector<double> & weights, const TreeParams & params, Rng & rng) {
  const Eigen::Index n = x.n_samples();
  const Eigen::Index nf = x.n_features();
  require(static_cast<Eigen::Index>(targets.size()) == n && static_cast<Eigen::Index>(weights.size()) == n,
          "grow_tree: targets and weights must have one entry per sample");
  const double min_leaf = std::max(1, params.min_samples_leaf);
  const int n_candidates = (params.max_features <= 0 || params.max_features >= nf) ? static_cast<int>(nf)
                                                                                   : params.max_features;

  // Work on centered targets so split gains do not suffer from cancellation.
  double total_w = 0.0;
  double total_wy = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    total_w += weights[s];
    total_wy += weights[s] * targets[s];
  }
  require(total_w > 0.0, "grow_tree: no sample has positive weight");
  const double offset = total_wy / total_w;
  std::vector<double> y(static_cast<std::size_t>(n));
  for (Eigen::Index s = 0; s < n; ++s) y[s] = targets[s] - offset;

  RegressionTree tree;
  std::vector<NodeStats> stats(1);
  std::vector<std::int32_t> node_of(static_cast<std::size_t>(n), -1);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (weights[s] > 0.0) {
      node_of[s] = 0;
      stats[0].add(weights[s], y[s]);
    }
  }
  auto push_node = [&tree](double value) {
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.value.push_back(value);
  };
  push_node(offset + stats[0].wy / stats[0].w);

  std::vector<std::int32_t> frontier{0};
  std::vector<std::int32_t> slot_of;
  while (!frontier.empty()) {
    // Nodes at this level that may still be split, numbered by slot.
    slot_of.assign(tree.n_nodes(), -1);
    std::vector<std::int32_t> slots;
    for (auto node : frontier) {
      const auto & st = stats[node];
      const bool depth_ok = params.max_depth < 0 || st.depth < params.max_depth;
      if (depth_ok && st.w >= 2.0 * min_leaf && st.ymax > st.ymin) {
        slot_of[node] = static_cast<std::int32_t>(slots.size());
        slots.push_back(node);
      }
    }
    if (slots.empty()) break;
    const std::size_t ns = slots.size();

    std::vector<char> candidate(ns * nf, 0);
    if (n_candidates == nf) {
      std::fill(candidate.begin(), candidate.end(), 1);
    } else {
      std::vector<int> pool(static_cast<std::size_t>(nf));
      for (std::size_t sl = 0; sl < ns; ++sl) {
        std::iota(pool.begin(), pool.end(), 0);
        for (int c = 0; c < n_candidates; ++c) {
          std::uniform_int_distribution<int> pick(c, static_cast<int>(nf) - 1);
          std::swap(pool[c], pool[pick(rng)]);
          candidate[sl * nf + pool[c]] = 1;
        }
      }
    }

    std::vector<Split> best(ns);
    if (!params.random_thresholds) {
      std::vector<double> lw(ns), lwy(ns), last(ns);
      std::vector<char> seen(ns);
      for (Eigen::Index f = 0; f < nf; ++f) {
        std::fill(lw.begin(), lw.end(), 0.0);
        std::fill(lwy.begin(), lwy.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (auto s : x.order(f)) {
          const auto node = node_of[s];
          if (node < 0) continue;
          const auto sl = slot_of[node];
          if (sl < 0 || !candidate[sl * nf + f]) continue;
          const double v = x.at(f, s);
          if (seen[sl] && v > last[sl]) {
            const auto & st = stats[slots[sl]];
            if (lw[sl] >= min_leaf && st.w - lw[sl] >= min_leaf) {
              const double gain = split_gain(lw[sl], lwy[sl], st.w, st.wy);
              if (gain > best[sl].gain) {
                double thr = 0.5 * (last[sl] + v);
                if (!(thr < v)) thr = last[sl];
                best[sl] = {gain, static_cast<int>(f), thr};
              }
            }
          }
          lw[sl] += weights[s];
          lwy[sl] += weights[s] * y[s];
          last[sl] = v;
          seen[sl] = 1;
        }
      }
    } else {
      const double inf = std::numeric_limits<double>::infinity();
      std::vector<double> lo(ns * nf, inf), hi(ns * nf, -inf);
      for (Eigen::Index s = 0; s < n; ++s) {
        const auto node = node_of[s];
        if (node < 0 || slot_of[node] < 0) continue;
        const std::size_t base = static_cast<std::size_t>(slot_of[node]) * nf;
        for (Eigen::Index f = 0; f < nf; ++f) {
          if (!candidate[base + f]) continue;
          const double v = x.at(f, s);
          lo[base + f] = std::min(lo[base + f], v);
          hi[base + f] = std::max(hi[base + f], v);
        }
      }
      std::vector<double> thr(ns * nf, 0.0);
      for (std::size_t i = 0; i < ns * nf; ++i) {
        if (!candidate[i]) continue;
        if (!(hi[i] > lo[i])) {
          candidate[i] = 0;
          continue;
        }
        std::uniform_real_distribution<double> u(lo[i], hi[i]);
        thr[i] = u(rng);
        if (!(thr[i] < hi[i])) thr[i] = lo[i];
      }
      std::vector<double> lw(ns * nf, 0.0), lwy(ns * nf, 0.0);
      for (Eigen::Index s = 0; s < n; ++s) {
        const auto node = node_of[s];
        if (node < 0 || slot_of[node] < 0) continue;
        const std::size_t base = static_cast<std::size_t>(slot_of[node]) * nf;
        for (Eigen::Index f = 0; f < nf; ++f) {
          if (candidate[base + f] && x.at(f, s) <= thr[base + f]) {
            lw[base + f] += weights[s];
            lwy[base + f] += weights[s] * y[s];
          }
        }
      }
      for (std::size_t sl = 0; sl < ns; ++sl) {
        const auto & st = stats[slots[sl]];
        for (Eigen::Index f = 0; f < nf; ++f) {
          const std::size_t i = sl * nf + f;
          if (!candidate[i] || lw[i] < min_leaf || st.w - lw[i] < min_leaf) continue;
          const double gain = split_gain(lw[i], lwy[i], st.w, st.wy);
          if (gain > best[sl].gain) best[sl] = {gain, static_cast<int>(f), thr[i]};
        }
      }
    }

    // Materialize children for splits that reduce the node SSE meaningfully.
    std::vector<std::int32_t> next;
    std::vector<std::int32_t> left_of(tree.n_nodes(), -1);
    for (std::size_t sl = 0; sl < ns; ++sl) {
      const auto node = slots[sl];
      const auto & b = best[sl];
      if (b.feature < 0 || !(b.gain > 1e-12 * stats[node].sse())) continue;
      const auto l = static_cast<std::int32_t>(tree.n_nodes());
      push_node(0.0);
      push_node(0.0);
      tree.feature[node] = b.feature;
      tree.threshold[node] = b.threshold;
      tree.left[node] = l;
      tree.right[node] = l + 1;
      left_of[node] = l;
      next.push_back(l);
      next.push_back(l + 1);
    }
    stats.resize(tree.n_nodes());
    for (std::size_t sl = 0; sl < ns; ++sl) {
      const auto node = slots[sl];
      if (left_of[node] >= 0) {
        stats[left_of[node]].depth = stats[node].depth + 1;
        stats[left_of[node] + 1].depth = stats[node].depth + 1;
      }
    }
    for (Eigen::Index s = 0; s < n; ++s) {
      const auto node = node_of[s];
      if (node < 0) continue;
      if (static_cast<std::size_t>(node) >= left_of.size() || left_of[node] < 0) {
        node_of[s] = -1;
        continue;
      }
      const auto child = x.at(tree.feature[node], s) <= tree.threshold[node] ? left_of[node] : left_of[node] + 1;
      node_of[s] = child;
      stats[child].add(weights[s], y[s]);
    }
    for (auto c : next) tree.value[c] = offset + (stats[c].w > 0.0 ? stats[c].wy / stats[c].w : 0.0);
    frontier = std::move(next);
  }
  return tree;
}

}  // namespace esmdaloc
