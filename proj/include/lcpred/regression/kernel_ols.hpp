// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "lcpred/common.hpp"
#include "lcpred/regression/kernel.hpp"

namespace lcpred {

inline constexpr double kDefaultOlsRidge = 1e-8;

/// Kernel least squares: f(x) = offset + sum_i w_i k(x_i, x), with the target
/// mean as offset and w = (K + ridge I)^-1 (y - offset).
struct KernelOlsModel {
  Kernel kernel;
  Eigen::MatrixXd points;
  Eigen::VectorXd weights;
  double offset = 0.0;

  double predict(const Eigen::VectorXd& z) const {
    double f = offset;
    if (kernel.type == KernelType::linear) {
      for (Eigen::Index i = 0; i < points.rows(); ++i) f += weights[i] * points.row(i).dot(z);
    } else {
      for (Eigen::Index i = 0; i < points.rows(); ++i)
        f += weights[i] * std::exp(-kernel.gamma * (points.row(i).transpose() - z).squaredNorm());
    }
    return f;
  }
};

inline KernelOlsModel fit_kernel_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const Kernel& kernel, double ridge = kDefaultOlsRidge) {
  if (x.rows() == 0 || x.rows() != y.size()) throw PreconditionError("kernel OLS: bad training shape");
  if (!(ridge > 0.0)) throw PreconditionError("kernel OLS: ridge must be positive");
  if (!x.allFinite() || !y.allFinite()) throw FitError("kernel OLS received non-finite inputs");

  KernelOlsModel m;
  m.kernel = kernel;
  m.points = x;
  m.offset = y.mean();
  Eigen::MatrixXd a = gram(kernel, x, x);
  a.diagonal().array() += ridge;
  const Eigen::VectorXd centered = y.array() - m.offset;

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) {
    m.weights = llt.solve(centered);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw FitError("kernel OLS: system is singular");
    m.weights = ldlt.solve(centered);
  }
  if (!m.weights.allFinite()) throw FitError("kernel OLS: system is singular beyond ridge rescue");
  return m;
}

}  // namespace lcpred
