#pragma once

#include <span>
#include <string>
#include <vector>

#include "blockrand/design.hpp"
#include "blockrand/errors.hpp"
#include "blockrand/estimators.hpp"
#include "blockrand/fields.hpp"
#include "blockrand/outcomes.hpp"

namespace blockrand {

namespace detail {

// Potential outcomes of one treatment arm over a stratum.
template <Field F>
std::vector<F> arm_values(const PotentialOutcomeTable<F>& table, const StratumView& stratum,
                          int s) {
  std::vector<F> values;
  values.reserve(stratum.size());
  const int last = stratum.first_unit() + stratum.size();
  for (int u = stratum.first_unit(); u < last; ++u) values.push_back(table.value(u, s));
  return values;
}

template <Field F>
F sum_of(std::span<const F> values) {
  F sum(0);
  for (const F& v : values) sum = sum + v;
  return sum;
}

// sum_{i != j} y_i y_j over ordered distinct pairs = (sum y)^2 - sum y^2.
template <Field F>
F pair_sum(std::span<const F> values) {
  F sum(0), sum_sq(0);
  for (const F& v : values) {
    sum = sum + v;
    sum_sq = sum_sq + v * v;
  }
  return sum * sum - sum_sq;
}

// sum_{i != j} y_is y_jt = (sum y_s)(sum y_t) - sum_i y_is y_it. Unlike the
// observed version, the diagonal does not vanish for potential outcomes.
template <Field F>
F cross_pair_sum(std::span<const F> ys, std::span<const F> yt) {
  F sum_s(0), sum_t(0), diag(0);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    sum_s = sum_s + ys[i];
    sum_t = sum_t + yt[i];
    diag = diag + ys[i] * yt[i];
  }
  return sum_s * sum_t - diag;
}

// Population variance (1/m convention) of one arm.
template <Field F>
F pop_variance(std::span<const F> values) {
  const int m = static_cast<int>(values.size());
  F sum(0), sum_sq(0);
  for (const F& v : values) {
    sum = sum + v;
    sum_sq = sum_sq + v * v;
  }
  const F mean = sum / F(m);
  return sum_sq / F(m) - mean * mean;
}

template <Field F>
F pop_covariance(std::span<const F> ys, std::span<const F> yt) {
  const int m = static_cast<int>(ys.size());
  F sum_s(0), sum_t(0), prod(0);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    sum_s = sum_s + ys[i];
    sum_t = sum_t + yt[i];
    prod = prod + ys[i] * yt[i];
  }
  return prod / F(m) - (sum_s / F(m)) * (sum_t / F(m));
}

}  // namespace detail

/// Var(mu_hat_{s,samp}) under balanced complete randomization of n units.
template <Field F>
F var_mu_samp(const F& sigma2, int n, int r) {
  if (r < 2 || n < r) throw DesignError("var_mu_samp: need n >= r >= 2");
  const int z = n % r;
  const F coeff =
      fr<F>(r - 1, n - 1) + F(r) * F(z) * F(r - z) / (F(n - 1) * F(n - z) * F(n + r - z));
  return coeff * sigma2;
}

/// cov(mu_hat_{s,samp}, mu_hat_{t,samp}) = -gamma_st / (n - 1).
template <Field F>
F cov_mu_samp(const F& gamma, int n) {
  if (n < 2) throw DesignError("cov_mu_samp: need n >= 2");
  return -gamma / F(n - 1);
}

/// Var(mu_hat_{s,HT}) from the arm's potential outcomes over the stratum.
template <Field F>
F var_mu_ht(std::span<const F> ys, int r) {
  const int m = static_cast<int>(ys.size());
  if (r < 2 || m < r) throw DesignError("var_mu_ht: need stratum size >= r >= 2");
  const int z = m % r;
  return fr<F>(r - 1, m - 1) * detail::pop_variance(ys) +
         F(z) * F(r - z) / (F(m) * F(m) * F(m) * F(m - 1)) * detail::pair_sum(ys);
}

/// cov(mu_hat_{s,HT}, mu_hat_{t,HT}) from both arms' potential outcomes.
template <Field F>
F cov_mu_ht(std::span<const F> ys, std::span<const F> yt, int r) {
  const int m = static_cast<int>(ys.size());
  if (ys.size() != yt.size()) throw ShapeError("cov_mu_ht: arm lengths differ");
  if (r < 2 || m < r) throw DesignError("cov_mu_ht: need stratum size >= r >= 2");
  const int z = m % r;
  return -detail::pop_covariance(ys, yt) / F(m - 1) -
         F(z) * F(r - z) / (F(r - 1) * F(m) * F(m) * F(m) * F(m - 1)) *
             detail::cross_pair_sum(ys, yt);
}

/// Var(delta_hat_{st,diff}) under balanced block randomization.
template <Field F>
F var_sate_diff(const PotentialOutcomeTable<F>& table, const BlockDesign& design, int s, int t) {
  check_conforms(table, design);
  if (s == t) throw DesignError("var_sate_diff: s and t must differ");
  const int n = design.total_units();
  const int r = design.num_treatments();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const StratumView stratum = StratumView::block(design, c);
    const std::vector<F> ys = detail::arm_values(table, stratum, s);
    const std::vector<F> yt = detail::arm_values(table, stratum, t);
    const F sig = detail::pop_variance<F>(ys) + detail::pop_variance<F>(yt);
    const F gam = detail::pop_covariance<F>(ys, yt);
    const int nc = design.block_size(c);
    const int zc = design.block_remainder(c);
    F term = fr<F>(r - 1, nc - 1) * sig + F(2) * gam / F(nc - 1);
    term = term +
           F(r) * F(zc) * F(r - zc) / (F(nc - 1) * F(nc - zc) * F(nc + r - zc)) * sig;
    total = total + fr<F>(nc, n) * fr<F>(nc, n) * term;
  }
  return total;
}

/// Var(delta_hat_{st,HT}) under balanced block randomization. Every term,
/// including the pair-sum contribution, carries the (n_c/n)^2 block weight
/// required by independence across blocks.
template <Field F>
F var_sate_ht(const PotentialOutcomeTable<F>& table, const BlockDesign& design, int s, int t) {
  check_conforms(table, design);
  if (s == t) throw DesignError("var_sate_ht: s and t must differ");
  const int n = design.total_units();
  const int r = design.num_treatments();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const StratumView stratum = StratumView::block(design, c);
    const std::vector<F> ys = detail::arm_values(table, stratum, s);
    const std::vector<F> yt = detail::arm_values(table, stratum, t);
    const int nc = design.block_size(c);
    const int zc = design.block_remainder(c);
    F term = fr<F>(r - 1, nc - 1) * (detail::pop_variance<F>(ys) + detail::pop_variance<F>(yt)) +
             F(2) * detail::pop_covariance<F>(ys, yt) / F(nc - 1);
    const F pair_weight = F(zc) * F(r - zc) / (F(nc) * F(nc) * F(nc) * F(r - 1));
    const F inner = fr<F>(r - 1, nc - 1) * (detail::pair_sum<F>(ys) + detail::pair_sum<F>(yt)) +
                    F(2) * detail::cross_pair_sum<F>(ys, yt) / F(nc - 1);
    term = term + pair_weight * inner;
    total = total + fr<F>(nc, n) * fr<F>(nc, n) * term;
  }
  return total;
}

/// The Var* upper bounds: expectation of the conservative variance
/// estimators, and an upper bound on the true variance with equality iff
/// treatment shifts outcomes by a per-block constant.
template <Field F>
F var_star(const PotentialOutcomeTable<F>& table, const BlockDesign& design, int s, int t,
           EstimatorKind kind) {
  check_conforms(table, design);
  if (s == t) throw DesignError("var_star: s and t must differ");
  const int n = design.total_units();
  const int r = design.num_treatments();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const StratumView stratum = StratumView::block(design, c);
    const std::vector<F> ys = detail::arm_values(table, stratum, s);
    const std::vector<F> yt = detail::arm_values(table, stratum, t);
    const F sig = detail::pop_variance<F>(ys) + detail::pop_variance<F>(yt);
    const int nc = design.block_size(c);
    const int zc = design.block_remainder(c);
    F term = fr<F>(r, nc - 1) * sig;
    if (kind == EstimatorKind::Diff) {
      term = term +
             F(r) * F(zc) * F(r - zc) / (F(nc - 1) * F(nc - zc) * F(nc + r - zc)) * sig;
    } else {
      const F pair_weight = F(zc) * F(r - zc) / (F(nc) * F(nc) * F(nc) * F(r - 1));
      const F inner =
          fr<F>(r - 1, nc - 1) * (detail::pair_sum<F>(ys) + detail::pair_sum<F>(yt)) +
          F(2) * detail::cross_pair_sum<F>(ys, yt) / F(nc - 1);
      term = term + pair_weight * inner;
    }
    total = total + fr<F>(nc, n) * fr<F>(nc, n) * term;
  }
  return total;
}

/// Expectation of the HT cross-treatment pair term of block c:
/// 2 z_c (r - z_c) / (n_c^3 (n_c - 1)(r - 1)) * sum_{k != l} y_{kcs} y_{lct}.
template <Field F>
F cross_sum_expectation(const PotentialOutcomeTable<F>& table, const BlockDesign& design, int c,
                        int s, int t) {
  check_conforms(table, design);
  if (s == t) throw DesignError("cross_sum_expectation: s and t must differ");
  const StratumView stratum = StratumView::block(design, c);
  const int nc = design.block_size(c);
  const int r = design.num_treatments();
  const int zc = design.block_remainder(c);
  const std::vector<F> ys = detail::arm_values(table, stratum, s);
  const std::vector<F> yt = detail::arm_values(table, stratum, t);
  return F(2) * F(zc) * F(r - zc) /
         (F(nc) * F(nc) * F(nc) * F(nc - 1) * F(r - 1)) * detail::cross_pair_sum<F>(ys, yt);
}

/// True when y_{kcs} = a_c + y_{kct} for a per-block constant a_c — the
/// exact equality condition of the conservative bounds.
template <Field F>
bool is_constant_shift(const PotentialOutcomeTable<F>& table, const BlockDesign& design, int s,
                       int t) {
  check_conforms(table, design);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const int first = design.unit_offset(c);
    const F shift = table.value(first, s) - table.value(first, t);
    for (int k = 1; k < design.block_size(c); ++k) {
      if (!(table.value(first + k, s) - table.value(first + k, t) == shift)) return false;
    }
  }
  return true;
}

/// Closed-form sampling moments of one estimator, tagged with the family
/// of formulas that produced them. covariances[s-1][t-1] spans all
/// treatment pairs of the stratum (diagonal = variances) and is symmetric.
template <Field F>
struct TheoreticalMoments {
  F mean;
  F variance;
  std::vector<std::vector<F>> covariances;
  std::string source;
};

/// Moments of mu_hat_{s,samp} or mu_hat_{s,HT} over a stratum under
/// balanced complete randomization.
template <Field F>
TheoreticalMoments<F> mu_hat_moments(const PotentialOutcomeTable<F>& table,
                                     const StratumView& stratum, int s, EstimatorKind kind) {
  const int r = stratum.num_treatments();
  const int m = stratum.size();
  TheoreticalMoments<F> out;
  out.source = kind == EstimatorKind::Diff ? "mu-samp-moments" : "mu-ht-moments";
  out.covariances.assign(r, std::vector<F>(r, F(0)));

  std::vector<std::vector<F>> arms;
  arms.reserve(r);
  for (int a = 1; a <= r; ++a) arms.push_back(detail::arm_values(table, stratum, a));

  F mean(0);
  for (const F& y : arms[s - 1]) mean = mean + y;
  out.mean = mean / F(m);

  for (int a = 1; a <= r; ++a) {
    out.covariances[a - 1][a - 1] =
        kind == EstimatorKind::Diff
            ? var_mu_samp(detail::pop_variance<F>(arms[a - 1]), m, r)
            : var_mu_ht<F>(arms[a - 1], r);
    for (int b = a + 1; b <= r; ++b) {
      const F cov = kind == EstimatorKind::Diff
                        ? cov_mu_samp(detail::pop_covariance<F>(arms[a - 1], arms[b - 1]), m)
                        : cov_mu_ht<F>(arms[a - 1], arms[b - 1], r);
      out.covariances[a - 1][b - 1] = cov;
      out.covariances[b - 1][a - 1] = cov;
    }
  }
  out.variance = out.covariances[s - 1][s - 1];
  return out;
}

/// Moments of delta_hat_{st} under balanced block randomization.
template <Field F>
TheoreticalMoments<F> sate_moments(const PotentialOutcomeTable<F>& table,
                                   const BlockDesign& design, int s, int t, EstimatorKind kind) {
  TheoreticalMoments<F> out;
  out.source = kind == EstimatorKind::Diff ? "sate-diff-moments" : "sate-ht-moments";
  out.mean = sate_true(table, design, s, t);
  out.variance = kind == EstimatorKind::Diff ? var_sate_diff(table, design, s, t)
                                             : var_sate_ht(table, design, s, t);
  return out;
}

/// Indicator-moment closed forms under balanced complete
/// randomization of m units: distinct units i, j and treatments s != t.
template <Field F>
struct IndicatorMoments {
  F count_mean;        // E[#T_s] = m/r
  F count_second;      // E[(#T_s)^2]
  F count_pair;        // E[#T_s #T_t]
  F inv_count;         // E[1/#T_s]
  F joint_same;        // E[T_is T_js]
  F joint_cross;       // E[T_is T_jt]
};

template <Field F>
IndicatorMoments<F> indicator_moments(int m, int r) {
  if (r < 2) throw DesignError("indicator_moments: r must be >= 2");
  if (m < r) throw DesignError("indicator_moments: m must be >= r");
  const int z = m % r;
  IndicatorMoments<F> out;
  out.count_mean = fr<F>(m, r);
  out.count_second = fr<F>(m, r) * fr<F>(m, r) + fr<F>(z, r) * (F(1) - fr<F>(z, r));
  out.count_pair = (F(m) * F(m) * F(r - 1) - F(z) * F(r - z)) / (F(r) * F(r) * F(r - 1));
  out.inv_count = (F(m) * F(r) + F(r) * F(r) - F(2) * F(r) * F(z)) /
                  (F(m - z) * F(m + r - z));
  out.joint_same =
      (F(m) * F(m - r) + F(z) * F(r - z)) / (F(m) * F(m - 1) * F(r) * F(r));
  out.joint_cross = (F(m) * F(m) * F(r - 1) - F(z) * F(r - z)) /
                    (F(m) * F(m - 1) * F(r) * F(r) * F(r - 1));
  return out;
}

}  // namespace blockrand
