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

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genimg_eval/error.hpp"
#include "genimg_eval/special_functions.hpp"

namespace genimg_eval {

enum class Alternative { kTwoSided, kGreater, kLess };
enum class TTestVariant { kPooled, kWelch };

inline std::string to_string(Alternative a) {
  switch (a) {
    case Alternative::kGreater: return "greater";
    case Alternative::kLess: return "less";
    default: return "two-sided";
  }
}

inline Alternative parse_alternative(const std::string& s) {
  if (s == "two-sided") return Alternative::kTwoSided;
  if (s == "greater") return Alternative::kGreater;
  if (s == "less") return Alternative::kLess;
  throw ValidationError("unknown alternative '" + s + "' (expected two-sided, greater or less)");
}

inline Alternative mirror(Alternative a) {
  if (a == Alternative::kGreater) return Alternative::kLess;
  if (a == Alternative::kLess) return Alternative::kGreater;
  return a;
}

inline std::string to_string(TTestVariant v) { return v == TTestVariant::kPooled ? "pooled" : "welch"; }

inline TTestVariant parse_variant(const std::string& s) {
  if (s == "pooled") return TTestVariant::kPooled;
  if (s == "welch") return TTestVariant::kWelch;
  throw ValidationError("unknown t-test variant '" + s + "' (expected pooled or welch)");
}

struct TestResult {
  std::string method;
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> df;
  Alternative alternative = Alternative::kTwoSided;
  double alpha = 0.05;
  bool reject = false;      // p_value < alpha
  bool degenerate = false;  // zero-variance input; p fixed by convention

  bool operator==(const TestResult&) const = default;
};

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  double alpha = 0.05;
  bool reject = false;

  bool operator==(const CorrelationResult&) const = default;
};

inline void to_json(nlohmann::json& j, const TestResult& t) {
  j = nlohmann::json{{"method", t.method},
                     {"statistic", std::isfinite(t.statistic) ? nlohmann::json(t.statistic)
                                                              : nlohmann::json(t.statistic > 0 ? "inf" : "-inf")},
                     {"p_value", t.p_value},
                     {"df", t.df ? nlohmann::json(*t.df) : nlohmann::json(nullptr)},
                     {"alternative", to_string(t.alternative)},
                     {"alpha", t.alpha},
                     {"reject", t.reject},
                     {"degenerate", t.degenerate}};
}

inline void from_json(const nlohmann::json& j, TestResult& t) {
  t.method = j.at("method").get<std::string>();
  const auto& s = j.at("statistic");
  if (s.is_string()) {
    t.statistic = s.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                : -std::numeric_limits<double>::infinity();
  } else {
    t.statistic = s.get<double>();
  }
  t.p_value = j.at("p_value").get<double>();
  t.df = j.at("df").is_null() ? std::nullopt : std::optional<double>(j.at("df").get<double>());
  t.alternative = parse_alternative(j.at("alternative").get<std::string>());
  t.alpha = j.at("alpha").get<double>();
  t.reject = j.at("reject").get<bool>();
  t.degenerate = j.at("degenerate").get<bool>();
}

inline void to_json(nlohmann::json& j, const CorrelationResult& c) {
  j = nlohmann::json{{"r", c.r}, {"p_value", c.p_value}, {"n", c.n}, {"alpha", c.alpha}, {"reject", c.reject}};
}

inline void from_json(const nlohmann::json& j, CorrelationResult& c) {
  c.r = j.at("r").get<double>();
  c.p_value = j.at("p_value").get<double>();
  c.n = j.at("n").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.reject = j.at("reject").get<bool>();
}

namespace detail {

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Unbiased sample variance (two-pass).
inline double variance(std::span<const double> x, double m) {
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double t_p_value(double t, double df, Alternative alt) {
  switch (alt) {
    case Alternative::kGreater: return special::student_t_sf(t, df);
    case Alternative::kLess: return special::student_t_cdf(t, df);
    default: return special::student_t_two_sided(t, df);
  }
}

// p-value when the standard error is zero: `effect` is the mean difference.
inline double degenerate_p(double effect, Alternative alt) {
  if (effect == 0.0) return alt == Alternative::kTwoSided ? 1.0 : 0.5;
  switch (alt) {
    case Alternative::kGreater: return effect > 0 ? 0.0 : 1.0;
    case Alternative::kLess: return effect < 0 ? 0.0 : 1.0;
    default: return 0.0;
  }
}

inline TestResult finish(TestResult r) {
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  r.reject = r.p_value < r.alpha;
  return r;
}

}  // namespace detail

inline TestResult paired_t_test(std::span<const double> x, std::span<const double> y,
                                Alternative alternative = Alternative::kTwoSided, double alpha = 0.05) {
  if (x.size() != y.size()) {
    throw ValidationError("paired_t_test: length mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw ValidationError("paired_t_test needs at least 2 pairs");
  std::vector<double> diff(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  const double n = static_cast<double>(diff.size());
  const double m = detail::mean(diff);
  const double sd = std::sqrt(detail::variance(diff, m));

  TestResult r;
  r.method = "paired-t";
  r.alternative = alternative;
  r.alpha = alpha;
  r.df = n - 1.0;
  if (sd == 0.0) {
    r.degenerate = true;
    r.statistic = m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
    r.p_value = detail::degenerate_p(m, alternative);
    return detail::finish(r);
  }
  r.statistic = m / (sd / std::sqrt(n));
  r.p_value = detail::t_p_value(r.statistic, *r.df, alternative);
  return detail::finish(r);
}

inline TestResult two_sample_t_test(std::span<const double> a, std::span<const double> b,
                                    Alternative alternative = Alternative::kTwoSided, double alpha = 0.05,
                                    TTestVariant variant = TTestVariant::kPooled) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("two_sample_t_test needs at least 2 values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = detail::mean(a);
  const double mb = detail::mean(b);
  const double va = detail::variance(a, ma);
  const double vb = detail::variance(b, mb);

  TestResult r;
  r.method = variant == TTestVariant::kPooled ? "two-sample-t-pooled" : "two-sample-t-welch";
  r.alternative = alternative;
  r.alpha = alpha;
  double se = 0.0;
  if (variant == TTestVariant::kPooled) {
    const double df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    r.df = df;
  } else {
    const double qa = va / na;
    const double qb = vb / nb;
    se = std::sqrt(qa + qb);
    if (se > 0.0) r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  }
  const double effect = ma - mb;
  if (se == 0.0) {
    r.degenerate = true;
    r.statistic = effect == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), effect);
    r.p_value = detail::degenerate_p(effect, alternative);
    return detail::finish(r);
  }
  r.statistic = effect / se;
  r.p_value = detail::t_p_value(r.statistic, *r.df, alternative);
  return detail::finish(r);
}

namespace detail {

// Largest |i*n - j*m| over the merged ECDF steps of a and b, i.e. the KS
// statistic scaled by m*n. Ties are processed as a block per distinct value.
inline long long ks_scaled_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto m = static_cast<long long>(a.size());
  const auto n = static_cast<long long>(b.size());
  std::size_t i = 0, j = 0;
  long long best = 0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      v = a[i];
    } else {
      v = b[j];
    }
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    best = std::max(best, std::llabs(static_cast<long long>(i) * n - static_cast<long long>(j) * m));
  }
  return best;
}

}  // namespace detail

// Two-sample Kolmogorov-Smirnov test. p from the limiting distribution with
// the small-sample correction lambda = (sqrt(me) + 0.12 + 0.11/sqrt(me)) D,
// me = m n / (m + n).
inline TestResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample needs non-empty samples");
  const double m = static_cast<double>(a.size());
  const double n = static_cast<double>(b.size());
  const long long scaled = detail::ks_scaled_statistic({a.begin(), a.end()}, {b.begin(), b.end()});
  TestResult r;
  r.method = "ks-asymptotic";
  r.alpha = alpha;
  r.statistic = static_cast<double>(scaled) / (m * n);
  const double me = m * n / (m + n);
  const double root = std::sqrt(me);
  r.p_value = special::kolmogorov_q((root + 0.12 + 0.11 / root) * r.statistic);
  return detail::finish(r);
}

inline constexpr std::size_t kKsExactMaxProduct = 400;

// Exact null distribution of D by lattice-path counting. Assumes no ties
// (continuous data); limited to |a| |b| <= 400.
inline TestResult ks_two_sample_exact(std::span<const double> a, std::span<const double> b, double alpha = 0.05) {
  if (a.empty() || b.empty()) throw ValidationError("ks_two_sample_exact needs non-empty samples");
  if (a.size() * b.size() > kKsExactMaxProduct) {
    throw ValidationError("ks_two_sample_exact is limited to |a|*|b| <= " + std::to_string(kKsExactMaxProduct));
  }
  const auto m = static_cast<long long>(a.size());
  const auto n = static_cast<long long>(b.size());
  const long long scaled = detail::ks_scaled_statistic({a.begin(), a.end()}, {b.begin(), b.end()});

  TestResult r;
  r.method = "ks-exact";
  r.alpha = alpha;
  r.statistic = static_cast<double>(scaled) / static_cast<double>(m * n);
  if (scaled == 0) {
    r.p_value = 1.0;
    return detail::finish(r);
  }
  // paths[j] = number of monotone paths to (i, j) that stay strictly inside
  // |i n - j m| < scaled; p = 1 - inside / C(m + n, m).
  std::vector<double> paths(static_cast<std::size_t>(n + 1), 0.0);
  auto inside = [&](long long i, long long j) { return std::llabs(i * n - j * m) < scaled; };
  double total = 1.0;  // C(m + n, m), built incrementally
  for (long long k = 1; k <= m; ++k) total = total * static_cast<double>(n + k) / static_cast<double>(k);
  for (long long i = 0; i <= m; ++i) {
    for (long long j = 0; j <= n; ++j) {
      auto& cell = paths[static_cast<std::size_t>(j)];
      if (i == 0 && j == 0) {
        cell = 1.0;
      } else {
        const double from_left = j > 0 ? paths[static_cast<std::size_t>(j - 1)] : 0.0;
        const double from_above = i > 0 ? cell : 0.0;
        cell = from_left + from_above;
      }
      if (!inside(i, j)) cell = 0.0;
    }
  }
  r.p_value = 1.0 - paths[static_cast<std::size_t>(n)] / total;
  return detail::finish(r);
}

inline CorrelationResult pearson(std::span<const double> x, std::span<const double> y, double alpha = 0.05) {
  if (x.size() != y.size()) {
    throw ValidationError("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  }
  if (x.size() < 3) throw ValidationError("pearson needs at least 3 pairs");
  const double mx = detail::mean(x);
  const double my = detail::mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: correlation undefined for a constant vector");

  CorrelationResult c;
  c.n = x.size();
  c.alpha = alpha;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (1.0 - std::abs(c.r) < 1e-14) c.r = std::copysign(1.0, c.r);  // exact affine relation up to roundoff
  if (std::abs(c.r) == 1.0) {
    c.p_value = 0.0;
  } else {
    const double df = static_cast<double>(c.n) - 2.0;
    const double t = c.r * std::sqrt(df) / std::sqrt((1.0 - c.r) * (1.0 + c.r));
    c.p_value = std::clamp(special::student_t_two_sided(t, df), 0.0, 1.0);
  }
  c.reject = c.p_value < alpha;
  return c;
}

}  // namespace genimg_eval
