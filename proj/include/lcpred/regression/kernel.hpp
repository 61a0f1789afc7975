// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "lcpred/common.hpp"

namespace lcpred {

enum class KernelType { linear, rbf };

struct Kernel {
  KernelType type = KernelType::rbf;
  double gamma = 1.0;  // rbf only

  static Kernel linear() { return {KernelType::linear, 0.0}; }
  static Kernel rbf(double gamma) { return {KernelType::rbf, gamma}; }

  template <class A, class B>
  double operator()(const A& a, const B& b) const {
    if (type == KernelType::linear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
  }

  bool operator==(const Kernel&) const = default;
};

inline std::string to_string(KernelType t) { return t == KernelType::linear ? "linear" : "rbf"; }

inline KernelType parse_kernel_type(const std::string& s) {
  if (s == "linear") return KernelType::linear;
  if (s == "rbf") return KernelType::rbf;
  throw ValidationError("unknown kernel '" + s + "'");
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`.
/// Computed directly (not via the norm expansion) so the result is never
/// negative.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return d;
}

/// Kernel matrix from precomputed inner products or squared distances.
inline Eigen::MatrixXd kernel_from_cache(const Kernel& k, const Eigen::MatrixXd& inner,
                                         const Eigen::MatrixXd& sqdist) {
  if (k.type == KernelType::linear) return inner;
  return (-k.gamma * sqdist.array()).exp().matrix();
}

inline Eigen::MatrixXd gram(const Kernel& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (k.type == KernelType::linear) return a * b.transpose();
  return (-k.gamma * squared_distances(a, b).array()).exp().matrix();
}

}  // namespace lcpred
