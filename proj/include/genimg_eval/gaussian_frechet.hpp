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

// Gaussian fits of embedding sets and the Frechet distance between them:
//
//   d^2 = |mu1 - mu2|^2 + tr(S1) + tr(S2) - 2 tr((S1 S2)^{1/2})
//
// The trace of the matrix square root is evaluated through the congruence
// L^{1/2} Q^T S2 Q L^{1/2} with S1 = Q L Q^T, which shares its eigenvalues
// with S1 S2 but is symmetric, so only symmetric eigensolves are needed.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "genimg_eval/embedding_store.hpp"
#include "genimg_eval/error.hpp"
#include "genimg_eval/metric_table.hpp"
#include "genimg_eval/parallel.hpp"
#include "genimg_eval/sym_eigen.hpp"

namespace genimg_eval {

struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // exactly symmetric
  Eigen::Index n = 0;

  Eigen::Index dims() const { return mean.size(); }
};

struct FrechetDiagnostics {
  double min_eigenvalue = 0.0;  // smallest covariance eigenvalue seen, before clamping
  bool regularization_applied = false;
  bool rank_deficient = false;  // some input had n <= d
};

struct FrechetResult {
  double value = 0.0;
  std::string reference_id;
  std::string candidate_id;
  std::string extractor;
  FrechetDiagnostics diagnostics;
};

struct RelativeFrechetResult {
  double value = 0.0;
  FrechetResult numerator;
  FrechetResult denominator;
  std::uint64_t split_seed = 0;
};

inline constexpr double kNegativeEigenRelTol = 1e-10;
inline constexpr double kDistanceClampTol = 1e-8;
inline constexpr double kRegularizationScale = 1e-6;
inline constexpr double kDegenerateDenominator = 1e-12;

// Column means and unbiased (n-1) covariance, symmetrized.
inline GaussianSummary fit_gaussian(const EmbeddingSet& set) {
  const auto& x = set.data();
  if (x.rows() < 2) throw ValidationError("fit_gaussian needs at least 2 rows, got " + std::to_string(x.rows()));
  GaussianSummary g;
  g.n = x.rows();
  g.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  Eigen::MatrixXd c = (centered.transpose() * centered) / static_cast<double>(g.n - 1);
  g.cov = 0.5 * (c + c.transpose());
  return g;
}

struct SqrtmTrace {
  double trace = 0.0;
  double min_eigenvalue = 0.0;
};

namespace detail {

inline void check_psd(const Eigen::VectorXd& values, const Eigen::MatrixXd& cov, const char* which) {
  const double threshold = kNegativeEigenRelTol * cov.norm();
  if (values.size() > 0 && values.minCoeff() < -threshold) {
    throw NumericalError(std::string("covariance ") + which + " has eigenvalue " + std::to_string(values.minCoeff()) +
                         " below -" + std::to_string(threshold) + "; the input is not a valid covariance");
  }
}

// Default eigen routine; a different callable can be substituted in tests.
struct DefaultEigenSolver {
  SymmetricEigen operator()(const Eigen::MatrixXd& a, bool vectors) const {
    EigenOptions opt;
    opt.compute_vectors = vectors;
    return symmetric_eigen(a, opt);
  }
};

}  // namespace detail

// tr((a b)^{1/2}) for symmetric PSD a, b, using `solve(matrix, want_vectors)`.
template <typename Solver>
SqrtmTrace sqrtm_trace_with(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Solver&& solve) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw ValidationError("sqrtm_trace: matrices must be square and of equal size");
  }
  if (a.rows() == 0) return {};

  const SymmetricEigen ea = solve(a, true);
  detail::check_psd(ea.values, a, "1");
  const SymmetricEigen eb = solve(b, false);
  detail::check_psd(eb.values, b, "2");

  Eigen::MatrixXd half = ea.vectors;
  for (Eigen::Index j = 0; j < half.cols(); ++j) half.col(j) *= std::sqrt(std::max(ea.values(j), 0.0));
  Eigen::MatrixXd s = half.transpose() * b * half;
  s = (0.5 * (s + s.transpose())).eval();
  const SymmetricEigen es = solve(s, false);

  SqrtmTrace out;
  out.min_eigenvalue = std::min(ea.values.minCoeff(), eb.values.minCoeff());
  for (Eigen::Index i = 0; i < es.values.size(); ++i) out.trace += std::sqrt(std::max(es.values(i), 0.0));
  return out;
}

// tr((a b)^{1/2}) = sum of square roots of the eigenvalues of a b.
inline double sqrtm_trace(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return sqrtm_trace_with(a, b, detail::DefaultEigenSolver{}).trace;
}

template <typename Solver>
FrechetResult frechet_distance_with(const GaussianSummary& g1, const GaussianSummary& g2, Solver&& solve) {
  if (g1.dims() != g2.dims()) {
    throw ValidationError("frechet_distance: dimension mismatch (" + std::to_string(g1.dims()) + " vs " +
                          std::to_string(g2.dims()) + ")");
  }
  FrechetResult r;
  r.diagnostics.rank_deficient = g1.n <= g1.dims() || g2.n <= g2.dims();
  if (g1.mean == g2.mean && g1.cov == g2.cov) {
    r.diagnostics.min_eigenvalue = g1.dims() > 0 ? solve(g1.cov, false).values.minCoeff() : 0.0;
    return r;
  }

  double tr1 = g1.cov.trace();
  double tr2 = g2.cov.trace();
  SqrtmTrace st;
  try {
    st = sqrtm_trace_with(g1.cov, g2.cov, solve);
  } catch (const ConvergenceError&) {
    const Eigen::Index d = g1.dims();
    const double eps = kRegularizationScale * (tr1 + tr2) / static_cast<double>(2 * d);
    const Eigen::MatrixXd shift = eps * Eigen::MatrixXd::Identity(d, d);
    try {
      st = sqrtm_trace_with(g1.cov + shift, g2.cov + shift, solve);
    } catch (const ConvergenceError& e) {
      throw NumericalError(std::string("Frechet distance failed after regularization: ") + e.what());
    }
    r.diagnostics.regularization_applied = true;
    tr1 += static_cast<double>(d) * eps;
    tr2 += static_cast<double>(d) * eps;
  }
  r.diagnostics.min_eigenvalue = st.min_eigenvalue;

  double value = (g1.mean - g2.mean).squaredNorm() + tr1 + tr2 - 2.0 * st.trace;
  if (std::abs(value) <= kDistanceClampTol) {
    value = 0.0;
  } else if (value < 0.0) {
    // Cancellation error grows with the trace; beyond that it is a failure.
    if (value < -kDistanceClampTol * std::max(1.0, tr1 + tr2)) {
      throw NumericalError("Frechet distance evaluated to " + std::to_string(value));
    }
    value = 0.0;
  }
  r.value = value;
  return r;
}

inline FrechetResult frechet_distance(const GaussianSummary& g1, const GaussianSummary& g2) {
  return frechet_distance_with(g1, g2, detail::DefaultEigenSolver{});
}

inline std::string set_id(const EmbeddingSet& s) {
  const auto& m = s.metadata();
  if (m.dataset.empty() && m.model_tag.empty()) return "";
  return m.dataset + "/" + m.model_tag;
}

// Frechet distance normalized by the distance between two seeded halves of
// the real set.
inline RelativeFrechetResult relative_fd(const EmbeddingSet& real, const EmbeddingSet& gen, std::uint64_t seed) {
  if (real.rows() < 4) throw ValidationError("relative_fd needs at least 4 real rows");
  if (real.dims() != gen.dims()) {
    throw ValidationError("relative_fd: dimension mismatch (" + std::to_string(real.dims()) + " vs " +
                          std::to_string(gen.dims()) + ")");
  }
  RelativeFrechetResult r;
  r.split_seed = seed;
  r.numerator = frechet_distance(fit_gaussian(real), fit_gaussian(gen));
  r.numerator.reference_id = set_id(real);
  r.numerator.candidate_id = set_id(gen);
  r.numerator.extractor = real.metadata().extractor;

  const auto [h1, h2] = split_real(real, seed);
  r.denominator = frechet_distance(fit_gaussian(h1), fit_gaussian(h2));
  r.denominator.reference_id = set_id(real) + "#half1";
  r.denominator.candidate_id = set_id(real) + "#half2";
  r.denominator.extractor = real.metadata().extractor;
  if (r.denominator.value <= kDegenerateDenominator) {
    throw NumericalError("relative_fd: real-split distance " + std::to_string(r.denominator.value) +
                         " is degenerate (real set has no spread)");
  }
  r.value = r.numerator.value / r.denominator.value;
  return r;
}

// One (dataset, extractor, generative model) cell of a batch run.
struct BatchCell {
  std::string dataset;
  std::string extractor;
  std::string model_tag;
  FrechetResult fd;
  std::optional<RelativeFrechetResult> rfd;

  double value() const { return rfd ? rfd->value : fd.value; }
};

inline std::string metric_id(bool relative, const std::string& extractor) {
  return (relative ? "rfd:" : "fd:") + extractor;
}

// Computes every (dataset, extractor, model) cell of a manifest against the
// group's "real" entry. Output is sorted by (dataset, extractor, model_tag).
inline std::vector<BatchCell> batch_fd_cells(const EmbeddingManifest& manifest, bool relative, std::uint64_t seed,
                                             unsigned threads = 0) {
  using GroupKey = std::pair<std::string, std::string>;  // (dataset, extractor)
  std::map<GroupKey, std::optional<std::size_t>> real_of;
  std::map<GroupKey, Eigen::Index> dim_of;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const GroupKey key{e.dataset, e.extractor};
    auto [it, inserted] = dim_of.emplace(key, e.d);
    if (!inserted && it->second != e.d) {
      throw ValidationError("manifest entries[" + std::to_string(i) + "]: dimension " + std::to_string(e.d) +
                            " differs from " + std::to_string(it->second) + " in group (" + e.dataset + ", " +
                            e.extractor + ")");
    }
    auto& slot = real_of[key];
    if (e.model_tag == "real") slot = i;
  }
  for (const auto& [key, real] : real_of) {
    if (!real) throw ValidationError("manifest group (" + key.first + ", " + key.second + ") has no \"real\" entry");
  }

  const unsigned workers = resolve_threads(threads);
  std::vector<GaussianSummary> fits(manifest.entries.size());
  std::vector<std::string> ids(manifest.entries.size());
  std::vector<std::optional<FrechetResult>> denom_slot(manifest.entries.size());
  parallel_for(manifest.entries.size(), workers, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const EmbeddingSet set = load_entry(manifest, e);
    fits[i] = fit_gaussian(set);
    ids[i] = set_id(set);
    if (relative && e.model_tag == "real") {
      if (set.rows() < 4) throw ValidationError(manifest.resolve(e) + ": relative FD needs at least 4 real rows");
      const auto [h1, h2] = split_real(set, seed);
      FrechetResult d = frechet_distance(fit_gaussian(h1), fit_gaussian(h2));
      d.reference_id = ids[i] + "#half1";
      d.candidate_id = ids[i] + "#half2";
      d.extractor = e.extractor;
      if (d.value <= kDegenerateDenominator) {
        throw NumericalError("real set " + manifest.resolve(e) + " has a degenerate split distance " +
                             std::to_string(d.value));
      }
      denom_slot[i] = std::move(d);
    }
  });

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    if (manifest.entries[i].model_tag != "real") order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = manifest.entries[a];
    const auto& y = manifest.entries[b];
    return std::tie(x.dataset, x.extractor, x.model_tag) < std::tie(y.dataset, y.extractor, y.model_tag);
  });

  std::vector<BatchCell> cells(order.size());
  parallel_for(order.size(), workers, [&](std::size_t k) {
    const std::size_t gi = order[k];
    const auto& e = manifest.entries[gi];
    const std::size_t ri = *real_of.at({e.dataset, e.extractor});
    BatchCell c{e.dataset, e.extractor, e.model_tag, frechet_distance(fits[ri], fits[gi]), std::nullopt};
    c.fd.reference_id = ids[ri];
    c.fd.candidate_id = ids[gi];
    c.fd.extractor = e.extractor;
    if (relative) {
      RelativeFrechetResult r;
      r.numerator = c.fd;
      r.denominator = *denom_slot[ri];
      r.split_seed = seed;
      r.value = r.numerator.value / r.denominator.value;
      c.rfd = std::move(r);
    }
    cells[k] = std::move(c);
  });
  return cells;
}

inline MetricTable to_metric_table(const std::vector<BatchCell>& cells, bool relative) {
  MetricTable t;
  for (const auto& c : cells) {
    const std::string m = metric_id(relative, c.extractor);
    t.directions[m] = Direction::kLowerBetter;
    t.set(c.dataset, c.model_tag, m, c.value());
  }
  return t;
}

inline MetricTable batch_fd(const EmbeddingManifest& manifest, bool relative, std::uint64_t seed,
                            unsigned threads = 0) {
  return to_metric_table(batch_fd_cells(manifest, relative, seed, threads), relative);
}

}  // namespace genimg_eval
