// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcpred/common.hpp"
#include "lcpred/regression/kernel.hpp"

namespace lcpred {

/// Solution of the nu-SVR dual
///
///   min  1/2 (a - a*)' K (a - a*) - y' (a - a*)
///   s.t. sum(a) = sum(a*) = C nu l / 2,   0 <= a_i, a*_i <= C
///
/// The decision function is f(x) = sum_i coef_i k(x_i, x) + bias with
/// coef = a - a*.
struct NuSvrDual {
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_star;
  Eigen::VectorXd coef;
  double bias = 0.0;
  double epsilon = 0.0;  // tube half-width implied by the solution
  double kkt_violation = 0.0;
  long iterations = 0;
};

struct NuSvrSolverOptions {
  double tolerance = 1e-3;
  long max_updates = 0;  // 0 selects 10 * l^2
};

/// SMO over the 2l stacked variables (a, a*). Each step moves a pair drawn
/// from the same half, which keeps both equality constraints satisfied. The
/// first index is the maximal KKT violator; the partner maximizes the
/// second-order decrease of the objective.
inline NuSvrDual solve_nu_svr_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C,
                                   double nu, NuSvrSolverOptions opts = {}) {
  const Eigen::Index l = y.size();
  if (l == 0) throw PreconditionError("nu-SVR needs at least one training row");
  if (K.rows() != l || K.cols() != l) throw PreconditionError("kernel matrix shape mismatch");
  if (!(C > 0.0) || !std::isfinite(C)) throw PreconditionError("nu-SVR requires C > 0");
  if (!(nu > 0.0 && nu <= 1.0)) throw PreconditionError("nu-SVR requires 0 < nu <= 1");
  if (!K.allFinite() || !y.allFinite()) throw FitError("nu-SVR received non-finite inputs");

  constexpr double kTau = 1e-12;
  const Eigen::Index m = 2 * l;
  std::vector<double> beta(static_cast<std::size_t>(m));
  std::vector<double> grad(static_cast<std::size_t>(m));
  std::vector<int> sign(static_cast<std::size_t>(m));

  double budget = C * nu * static_cast<double>(l) / 2.0;
  for (Eigen::Index i = 0; i < l; ++i) {
    const double a = std::min(budget, C);
    beta[i] = beta[i + l] = a;
    budget -= a;
    sign[i] = 1;
    sign[i + l] = -1;
    // a == a* initially, so K(a - a*) = 0 and the gradient is the linear term.
    grad[i] = -y[i];
    grad[i + l] = y[i];
  }

  auto at_upper = [&](Eigen::Index t) { return beta[t] >= C; };
  auto at_lower = [&](Eigen::Index t) { return beta[t] <= 0.0; };
  auto kern = [&](Eigen::Index s, Eigen::Index t) { return K(s % l, t % l); };

  const long cap = opts.max_updates > 0 ? opts.max_updates : 10L * l * l;
  NuSvrDual out;
  double violation = 0.0;
  long iter = 0;
  for (;; ++iter) {
    // Working-set selection, separately for each half.
    double gmax_p = kNegInf, gmax_p2 = kNegInf, gmax_n = kNegInf, gmax_n2 = kNegInf;
    Eigen::Index ip = -1, in = -1;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (sign[t] > 0) {
        if (!at_upper(t) && -grad[t] >= gmax_p) { gmax_p = -grad[t]; ip = t; }
      } else {
        if (!at_lower(t) && grad[t] >= gmax_n) { gmax_n = grad[t]; in = t; }
      }
    }
    Eigen::Index jbest = -1;
    double best_gain = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < m; ++t) {
      if (sign[t] > 0) {
        if (at_lower(t)) continue;
        gmax_p2 = std::max(gmax_p2, grad[t]);
        const double diff = gmax_p + grad[t];
        if (ip >= 0 && diff > 0.0) {
          double quad = kern(ip, ip) + kern(t, t) - 2.0 * kern(ip, t);
          if (quad <= 0.0) quad = kTau;
          const double gain = -(diff * diff) / quad;
          if (gain <= best_gain) { best_gain = gain; jbest = t; }
        }
      } else {
        if (at_upper(t)) continue;
        gmax_n2 = std::max(gmax_n2, -grad[t]);
        const double diff = gmax_n - grad[t];
        if (in >= 0 && diff > 0.0) {
          double quad = kern(in, in) + kern(t, t) - 2.0 * kern(in, t);
          if (quad <= 0.0) quad = kTau;
          const double gain = -(diff * diff) / quad;
          if (gain <= best_gain) { best_gain = gain; jbest = t; }
        }
      }
    }
    violation = std::max({0.0, gmax_p + gmax_p2, gmax_n + gmax_n2});
    if (!std::isfinite(violation)) violation = 0.0;  // a half with no movable variable
    if (violation < opts.tolerance || jbest < 0) break;
    if (iter >= cap) {
      throw SolverLimitError("nu-SVR solver exceeded " + std::to_string(cap) +
                                 " updates (KKT residual " + std::to_string(violation) + ")",
                             violation);
    }

    const Eigen::Index i = sign[jbest] > 0 ? ip : in;
    const Eigen::Index j = jbest;
    const double old_i = beta[i];
    double quad = kern(i, i) + kern(j, j) - 2.0 * kern(i, j);
    if (quad <= 0.0) quad = kTau;
    const double delta = (grad[i] - grad[j]) / quad;
    const double sum = beta[i] + beta[j];
    beta[i] -= delta;
    beta[j] += delta;
    if (sum > C) {
      if (beta[i] > C) { beta[i] = C; beta[j] = sum - C; }
    } else {
      if (beta[j] < 0.0) { beta[j] = 0.0; beta[i] = sum; }
    }
    if (sum > C) {
      if (beta[j] > C) { beta[j] = C; beta[i] = sum - C; }
    } else {
      if (beta[i] < 0.0) { beta[i] = 0.0; beta[j] = sum; }
    }

    // beta[j] moved by exactly -(beta[i] - old_i); both share a sign.
    const double step = (beta[i] - old_i) * sign[i];
    const Eigen::Index ci = i % l, cj = j % l;
    for (Eigen::Index k = 0; k < l; ++k) {
      const double g = step * (K(k, ci) - K(k, cj));
      grad[k] += g;
      grad[k + l] -= g;
    }
  }

  // Offset from the free variables of each half, or the middle of the
  // feasible interval when a half has none.
  double r[2];
  for (int half = 0; half < 2; ++half) {
    double ub = std::numeric_limits<double>::infinity(), lb = kNegInf, sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = half * l; t < (half + 1) * l; ++t) {
      if (at_upper(t)) lb = std::max(lb, grad[t]);
      else if (at_lower(t)) ub = std::min(ub, grad[t]);
      else { ++n_free; sum_free += grad[t]; }
    }
    r[half] = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  }

  out.alpha.resize(l);
  out.alpha_star.resize(l);
  for (Eigen::Index i = 0; i < l; ++i) {
    out.alpha[i] = beta[i];
    out.alpha_star[i] = beta[i + l];
  }
  out.coef = out.alpha - out.alpha_star;
  out.bias = -(r[0] - r[1]) / 2.0;
  out.epsilon = -(r[0] + r[1]) / 2.0;
  out.kkt_violation = violation;
  out.iterations = iter;
  if (!std::isfinite(out.bias)) out.bias = 0.0;
  return out;
}

/// Fitted nu-SVR decision function over standardized inputs.
struct NuSvrModel {
  Kernel kernel;
  Eigen::MatrixXd support;  // rows with nonzero coefficient (rbf only)
  Eigen::VectorXd coef;
  Eigen::VectorXd weights;  // primal weights (linear only)
  double bias = 0.0;

  double predict(const Eigen::VectorXd& z) const {
    if (kernel.type == KernelType::linear) return weights.dot(z) + bias;
    double f = bias;
    for (Eigen::Index i = 0; i < support.rows(); ++i)
      f += coef[i] * std::exp(-kernel.gamma * (support.row(i).transpose() - z).squaredNorm());
    return f;
  }
};

/// Builds the compact model from a dual solution over training rows `x`.
inline NuSvrModel make_nu_svr_model(const Eigen::MatrixXd& x, const NuSvrDual& dual,
                                    const Kernel& kernel) {
  NuSvrModel m;
  m.kernel = kernel;
  m.bias = dual.bias;
  if (kernel.type == KernelType::linear) {
    m.weights = x.transpose() * dual.coef;
    return m;
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < dual.coef.size(); ++i)
    if (dual.coef[i] != 0.0) keep.push_back(i);
  m.support.resize(static_cast<Eigen::Index>(keep.size()), x.cols());
  m.coef.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    m.support.row(static_cast<Eigen::Index>(k)) = x.row(keep[k]);
    m.coef[static_cast<Eigen::Index>(k)] = dual.coef[keep[k]];
  }
  return m;
}

/// Fits nu-SVR on already standardized rows.
inline NuSvrModel fit_nu_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double C,
                             double nu, const Kernel& kernel, NuSvrSolverOptions opts = {}) {
  if (x.rows() != y.size()) throw PreconditionError("row/target count mismatch");
  if (!x.allFinite() || !y.allFinite()) throw FitError("nu-SVR received non-finite inputs");
  if (kernel.type == KernelType::rbf && !(kernel.gamma > 0.0))
    throw PreconditionError("rbf kernel requires gamma > 0");
  const NuSvrDual dual = solve_nu_svr_dual(gram(kernel, x, x), y, C, nu, opts);
  return make_nu_svr_model(x, dual, kernel);
}

}  // namespace lcpred
