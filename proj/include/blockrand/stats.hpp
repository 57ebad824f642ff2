#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace blockrand {

namespace detail {

// Regularized lower incomplete gamma P(a, x), series expansion.
// Converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x), Lentz continued fraction.
// Converges quickly for x > a + 1.
inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

}  // namespace detail

/// CDF of the chi-square distribution with df degrees of freedom.
inline double chi_square_cdf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_cdf: df must be >= 1");
  return detail::gamma_p(0.5 * df, 0.5 * x);
}

/// Quantile (inverse CDF) by bisection; |cdf(result) - p| < 1e-12.
inline double chi_square_quantile(double p, int df) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("chi_square_quantile: p must be in (0,1)");
  }
  double lo = 0.0;
  double hi = df + 10.0;
  while (chi_square_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi_square_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

/// Pearson chi-square statistic of observed counts against equal expected
/// counts. total draws = sum(observed).
inline double chi_square_uniform_statistic(std::span<const long long> observed) {
  long long total = 0;
  for (long long v : observed) total += v;
  const double expected = static_cast<double>(total) / static_cast<double>(observed.size());
  double stat = 0.0;
  for (long long v : observed) {
    const double d = static_cast<double>(v) - expected;
    stat += d * d / expected;
  }
  return stat;
}

/// Pairwise (tree) summation: deterministic result independent of any
/// parallel aggregation schedule, with O(log n) rounding depth.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 32) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

}  // namespace blockrand
