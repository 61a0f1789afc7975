// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcpred/common.hpp"

namespace lcpred {

struct ForestParams {
  int trees = 100;
  double feature_ratio = 0.33;
  bool bootstrap = true;
  int min_leaf = 1;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::VectorXd& z) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
      const TreeNode& n = nodes[at];
      at = z[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[at].value;
  }
};

struct RandomForestModel {
  std::vector<RegressionTree> trees;

  double predict(const Eigen::VectorXd& z) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.predict(z);
    return sum / static_cast<double>(trees.size());
  }
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = kNegInf;
};

// Variance-reduction split search over one feature. Maximizing
// sumL^2/nL + sumR^2/nR is equivalent to minimizing the children's SSE.
inline void scan_feature(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         std::span<const int> idx, int feature, int min_leaf,
                         std::vector<std::pair<double, double>>& scratch, SplitChoice& best) {
  scratch.clear();
  for (int i : idx) scratch.emplace_back(x(i, feature), y[i]);
  std::sort(scratch.begin(), scratch.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double total = 0.0;
  for (const auto& p : scratch) total += p.second;
  const int n = static_cast<int>(scratch.size());
  double left = 0.0;
  for (int k = 1; k < n; ++k) {
    left += scratch[k - 1].second;
    if (k < min_leaf || n - k < min_leaf) continue;
    if (!(scratch[k - 1].first < scratch[k].first)) continue;
    const double right = total - left;
    const double score = left * left / k + right * right / (n - k);
    if (score > best.score) {
      double mid = 0.5 * (scratch[k - 1].first + scratch[k].first);
      if (!(mid < scratch[k].first)) mid = scratch[k - 1].first;
      best = {feature, mid, score};
    }
  }
}

inline RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                std::vector<int> rows, const ForestParams& p,
                                std::mt19937_64& rng) {
  RegressionTree tree;
  const int d = static_cast<int>(x.cols());
  const int per_split =
      std::clamp(static_cast<int>(std::lround(p.feature_ratio * d)), 1, std::max(d, 1));
  std::vector<int> features(static_cast<std::size_t>(d));
  std::vector<std::pair<double, double>> scratch;

  struct Pending {
    int node;
    int begin;
    int end;
  };
  tree.nodes.emplace_back();
  std::vector<Pending> stack{{0, 0, static_cast<int>(rows.size())}};
  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    std::span<int> idx(rows.data() + job.begin, static_cast<std::size_t>(job.end - job.begin));

    double sum = 0.0;
    for (int i : idx) sum += y[i];
    const double mean = sum / static_cast<double>(idx.size());
    tree.nodes[job.node].value = mean;
    bool constant = true;
    for (int i : idx) constant = constant && y[i] == y[idx[0]];
    if (constant || static_cast<int>(idx.size()) < 2 * p.min_leaf || d == 0) continue;

    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);
    SplitChoice best;
    for (int f = 0; f < d; ++f) {
      // Past the sampled subset, keep looking only while nothing valid exists.
      if (f >= per_split && best.feature >= 0) break;
      scan_feature(x, y, idx, features[static_cast<std::size_t>(f)], p.min_leaf, scratch, best);
    }
    if (best.feature < 0) continue;

    auto mid = std::stable_partition(idx.begin(), idx.end(), [&](int i) {
      return x(i, best.feature) <= best.threshold;
    });
    const int split = job.begin + static_cast<int>(mid - idx.begin());
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[job.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, split, job.end});
    stack.push_back({left, job.begin, split});
  }
  return tree;
}

}  // namespace detail

/// Bootstrap-aggregated regression trees. Deterministic given `seed`: each
/// tree draws from its own derived stream.
inline RandomForestModel fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           const ForestParams& p, std::uint64_t seed) {
  if (p.trees < 1) throw PreconditionError("random forest needs at least one tree");
  if (!(p.feature_ratio > 0.0 && p.feature_ratio <= 1.0))
    throw PreconditionError("feature_ratio must lie in (0, 1]");
  if (x.rows() == 0 || x.rows() != y.size()) throw PreconditionError("random forest: bad training shape");
  if (!x.allFinite() || !y.allFinite()) throw FitError("random forest received non-finite inputs");

  const int n = static_cast<int>(x.rows());
  RandomForestModel model;
  model.trees.reserve(static_cast<std::size_t>(p.trees));
  for (int t = 0; t < p.trees; ++t) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (p.bootstrap) {
      std::uniform_int_distribution<int> pick(0, n - 1);
      for (int& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees.push_back(detail::grow_tree(x, y, std::move(rows), p, rng));
  }
  return model;
}

}  // namespace lcpred
