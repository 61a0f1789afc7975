// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "lcpred/common.hpp"

namespace lcpred {

/// Per-column z-score transform (population standard deviation).
/// Zero-variance columns keep stddev 1 so they pass through centered.
struct Scaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  Eigen::Index dims() const { return mean.size(); }

  Eigen::VectorXd transform(std::span<const double> row) const {
    if (static_cast<Eigen::Index>(row.size()) != dims()) {
      throw PreconditionError("scaler expects " + std::to_string(dims()) + " features, got " +
                              std::to_string(row.size()));
    }
    Eigen::VectorXd z(dims());
    for (Eigen::Index j = 0; j < dims(); ++j) z[j] = (row[static_cast<std::size_t>(j)] - mean[j]) / stddev[j];
    return z;
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != dims()) throw PreconditionError("scaler column count mismatch");
    Eigen::MatrixXd z(rows.rows(), rows.cols());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      for (Eigen::Index j = 0; j < dims(); ++j) z(i, j) = (rows(i, j) - mean[j]) / stddev[j];
    return z;
  }
};

inline Scaler fit_scaler(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw PreconditionError("cannot fit a scaler on zero rows");
  const double n = static_cast<double>(rows.rows());
  Scaler s;
  s.mean = rows.colwise().sum().transpose() / n;
  s.stddev.resize(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      const double d = rows(i, j) - s.mean[j];
      ss += d * d;
    }
    const double sd = std::sqrt(ss / n);
    s.stddev[j] = (sd > 0.0 && std::isfinite(sd)) ? sd : 1.0;
  }
  return s;
}

}  // namespace lcpred
