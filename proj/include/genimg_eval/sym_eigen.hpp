/*
 * Copyright 2026 The genimg-eval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dense symmetric eigendecomposition: Householder reduction to tridiagonal
// form followed by the implicit QL algorithm with Wilkinson-type shifts
// (the EISPACK tred2/tql2 pair). Only the lower triangle of the input is
// read.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "genimg_eval/error.hpp"

namespace genimg_eval {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // column j pairs with values[j]; empty if not requested
};

struct EigenOptions {
  bool compute_vectors = true;
  int max_iterations_per_value = 60;
};

namespace detail {

// Reduces symmetric `a` to tridiagonal T = Q^T A Q. On return diag holds
// T's diagonal and sub[i] = T(i, i-1) for i >= 1 (sub[0] = 0). If `q` is
// non-null it receives Q.
inline void tridiagonalize(Eigen::MatrixXd a, Eigen::VectorXd& diag, Eigen::VectorXd& sub,
                           Eigen::MatrixXd* q) {
  const Eigen::Index n = a.rows();
  diag.resize(n);
  sub = Eigen::VectorXd::Zero(n);
  a.triangularView<Eigen::StrictlyUpper>() = a.transpose().eval();

  std::vector<Eigen::VectorXd> reflectors;
  std::vector<double> betas;
  if (q != nullptr) {
    reflectors.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(n - 2, 0)));
    betas.reserve(reflectors.capacity());
  }

  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index m = n - k - 1;
    Eigen::VectorXd v = a.col(k).tail(m);
    const double tail_norm = v.tail(m - 1).norm();
    double beta = 0.0;
    if (tail_norm != 0.0) {
      const double alpha = v(0) >= 0.0 ? -v.norm() : v.norm();
      v(0) -= alpha;
      beta = 2.0 / v.squaredNorm();
      auto block = a.bottomRightCorner(m, m);
      Eigen::VectorXd p = beta * (block * v);
      p -= (0.5 * beta * p.dot(v)) * v;
      block.noalias() -= v * p.transpose();
      block.noalias() -= p * v.transpose();
      a(k + 1, k) = alpha;
      a(k, k + 1) = alpha;
      a.col(k).tail(m - 1).setZero();
      a.row(k).tail(m - 1).setZero();
    }
    if (q != nullptr) {
      reflectors.push_back(std::move(v));
      betas.push_back(beta);
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    diag(i) = a(i, i);
    if (i > 0) sub(i) = a(i, i - 1);
  }

  if (q != nullptr) {
    q->setIdentity(n, n);
    for (Eigen::Index k = static_cast<Eigen::Index>(reflectors.size()) - 1; k >= 0; --k) {
      const double beta = betas[static_cast<std::size_t>(k)];
      if (beta == 0.0) continue;
      const Eigen::VectorXd& v = reflectors[static_cast<std::size_t>(k)];
      const Eigen::Index m = n - k - 1;
      auto block = q->bottomRightCorner(m, m);
      Eigen::RowVectorXd w = beta * (v.transpose() * block);
      block.noalias() -= v * w;
    }
  }
}

// Implicit QL on a symmetric tridiagonal matrix. Rotations are accumulated
// into `vectors` when non-null.
inline void tridiagonal_ql(Eigen::VectorXd& d, Eigen::VectorXd& e, Eigen::MatrixXd* vectors,
                           int max_iterations_per_value) {
  const Eigen::Index n = d.size();
  if (n == 0) return;
  for (Eigen::Index i = 1; i < n; ++i) e(i - 1) = e(i);
  e(n - 1) = 0.0;

  double shift_total = 0.0;
  double tst1 = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (Eigen::Index l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d(l)) + std::abs(e(l)));
    Eigen::Index m = l;
    while (m < n) {
      if (std::abs(e(m)) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_iterations_per_value) {
          throw ConvergenceError("symmetric eigensolve did not converge (eigenvalue " +
                               std::to_string(l) + ")");
        }
        double g = d(l);
        double p = (d(l + 1) - g) / (2.0 * e(l));
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d(l) = e(l) / (p + r);
        d(l + 1) = e(l) * (p + r);
        const double dl1 = d(l + 1);
        double h = g - d(l);
        for (Eigen::Index i = l + 2; i < n; ++i) d(i) -= h;
        shift_total += h;

        p = d(m);
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e(l + 1);
        double s = 0.0, s2 = 0.0;
        for (Eigen::Index i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e(i);
          h = c * p;
          r = std::hypot(p, e(i));
          e(i + 1) = s * r;
          s = e(i) / r;
          c = p / r;
          p = c * d(i) - s * g;
          d(i + 1) = h + s * (c * g + s * d(i));
          if (vectors != nullptr) {
            auto ci = vectors->col(i);
            auto cj = vectors->col(i + 1);
            for (Eigen::Index k = 0; k < n; ++k) {
              const double t = cj(k);
              cj(k) = s * ci(k) + c * t;
              ci(k) = c * ci(k) - s * t;
            }
          }
        }
        p = -s * s2 * c3 * el1 * e(l) / dl1;
        e(l) = s * p;
        d(l) = c * p;
      } while (std::abs(e(l)) > eps * tst1);
    }
    d(l) += shift_total;
    e(l) = 0.0;
  }
}

}  // namespace detail

// Eigendecomposition of a symmetric matrix. Throws ConvergenceError if the
// QL iteration hits its cap and NumericalError on non-finite input.
inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& a, const EigenOptions& options = {}) {
  if (a.rows() != a.cols()) throw ValidationError("symmetric_eigen: matrix is not square");
  if (!a.allFinite()) throw NumericalError("symmetric_eigen: matrix has non-finite entries");

  Eigen::VectorXd d, e;
  Eigen::MatrixXd q;
  detail::tridiagonalize(a, d, e, options.compute_vectors ? &q : nullptr);
  detail::tridiagonal_ql(d, e, options.compute_vectors ? &q : nullptr,
                         options.max_iterations_per_value);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return d(x) < d(y); });

  SymmetricEigen out;
  out.values.resize(d.size());
  if (options.compute_vectors) out.vectors.resize(q.rows(), q.cols());
  for (Eigen::Index j = 0; j < d.size(); ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.values(j) = d(src);
    if (options.compute_vectors) out.vectors.col(j) = q.col(src);
  }
  return out;
}

}  // namespace genimg_eval
