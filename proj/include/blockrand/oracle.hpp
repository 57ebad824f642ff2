#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blockrand/design.hpp"
#include "blockrand/errors.hpp"
#include "blockrand/estimators.hpp"
#include "blockrand/fields.hpp"
#include "blockrand/moments.hpp"
#include "blockrand/outcomes.hpp"
#include "blockrand/rng.hpp"

namespace blockrand {

/// A deterministic function of the observed data of one assignment. Every
/// statistic sees only the ObservedStudy, never the full outcome table, so
/// oracle-certified statistics cannot peek at unobserved entries.
template <Field F>
struct Statistic {
  std::string label;
  std::function<F(const ObservedStudy<F>&)> eval;
};

/// Additive per-block term of a block-decomposable statistic. `term` gets
/// the observed single-block slice (a one-block study) plus the block's
/// index in the full design, and the statistic's value is the sum over
/// blocks. Independence across blocks then gives moments from per-block
/// enumerations instead of the full cartesian product.
template <Field F>
struct BlockTermStatistic {
  std::string label;
  std::function<F(const ObservedStudy<F>&, int c)> term;
};

/// Exact first/second moments of a statistic over the randomization
/// distribution.
template <Field F>
struct OracleResult {
  F expectation;
  F variance;
  BigInt support_size;
};

using ExactMoment = OracleResult<Rational>;

/// First moments plus requested mixed second moments of several statistics
/// from a single enumeration pass.
template <Field F>
class MomentTable {
 public:
  MomentTable(std::vector<F> mean, std::map<std::pair<int, int>, F> second, BigInt support)
      : mean_(std::move(mean)), second_(std::move(second)), support_(std::move(support)) {}

  const F& mean(int i) const { return mean_[i]; }
  F variance(int i) const { return second_moment(i, i) - mean_[i] * mean_[i]; }
  F covariance(int i, int j) const { return second_moment(i, j) - mean_[i] * mean_[j]; }
  const F& second_moment(int i, int j) const {
    return second_.at({std::min(i, j), std::max(i, j)});
  }
  const BigInt& support_size() const { return support_; }

 private:
  std::vector<F> mean_;
  std::map<std::pair<int, int>, F> second_;
  BigInt support_;
};

namespace detail {

template <Field F, class Enumerator>
MomentTable<F> moments_over(Enumerator& enumerator, const BigInt& support,
                            const PotentialOutcomeTable<F>& table, const BlockDesign& design,
                            std::span<const Statistic<F>> stats,
                            std::span<const std::pair<int, int>> pairs) {
  const int n = design.total_units();
  const int count = static_cast<int>(stats.size());

  std::vector<std::pair<int, int>> wanted;
  wanted.reserve(pairs.size() + count);
  for (int i = 0; i < count; ++i) wanted.emplace_back(i, i);
  for (auto [i, j] : pairs) {
    auto key = std::make_pair(std::min(i, j), std::max(i, j));
    if (key.first != key.second) wanted.push_back(key);
  }

  ObservedStudy<F> study{design, Assignment{}, std::vector<F>(n, F(0))};
  std::vector<F> values(count, F(0));
  std::vector<F> first(count, F(0));
  std::vector<F> second(wanted.size(), F(0));

  while (enumerator.next(study.assignment.labels)) {
    for (int u = 0; u < n; ++u) {
      study.responses[u] = table.value(u, study.assignment.labels[u]);
    }
    for (int i = 0; i < count; ++i) values[i] = stats[i].eval(study);
    for (int i = 0; i < count; ++i) first[i] = first[i] + values[i];
    for (std::size_t p = 0; p < wanted.size(); ++p) {
      second[p] = second[p] + values[wanted[p].first] * values[wanted[p].second];
    }
  }

  const F total = field_traits<F>::from_bigint(support);
  std::vector<F> mean;
  mean.reserve(count);
  for (int i = 0; i < count; ++i) mean.push_back(first[i] / total);
  std::map<std::pair<int, int>, F> second_map;
  for (std::size_t p = 0; p < wanted.size(); ++p) {
    second_map.emplace(wanted[p], second[p] / total);
  }
  return MomentTable<F>(std::move(mean), std::move(second_map), support);
}

}  // namespace detail

/// Exact moments of several statistics in one enumeration pass. `pairs`
/// lists the off-diagonal second moments to accumulate (diagonals always
/// are); covariances are available for exactly those pairs.
template <Field F>
MomentTable<F> exact_moments(const PotentialOutcomeTable<F>& table, const BlockDesign& design,
                             std::span<const Statistic<F>> stats,
                             std::span<const std::pair<int, int>> pairs = {},
                             RandomizationMode mode = RandomizationMode::Block,
                             std::uint64_t cap = kDefaultEnumerationCap) {
  check_conforms(table, design);
  if (mode == RandomizationMode::Complete) {
    const BigInt support =
        count_balanced_assignments(design.total_units(), design.num_treatments());
    detail::check_cap(support, cap);
    CompleteEnumerator enumerator(design.total_units(), design.num_treatments());
    return detail::moments_over(enumerator, support, table, design, stats, pairs);
  }
  const BigInt support = count_block_assignments(design);
  detail::check_cap(support, cap);
  BlockEnumerator enumerator(design);
  return detail::moments_over(enumerator, support, table, design, stats, pairs);
}

/// Exact expectation and variance of one statistic by full enumeration of
/// the (equally likely) balanced assignments.
template <Field F>
OracleResult<F> exact_expectation(const PotentialOutcomeTable<F>& table,
                                  const BlockDesign& design, const Statistic<F>& statistic,
                                  RandomizationMode mode = RandomizationMode::Block,
                                  std::uint64_t cap = kDefaultEnumerationCap) {
  const MomentTable<F> table_out =
      exact_moments<F>(table, design, std::span(&statistic, 1), {}, mode, cap);
  return {table_out.mean(0), table_out.variance(0), table_out.support_size()};
}

/// E[AB] - E[A]E[B] over the enumeration; symmetric in its arguments.
template <Field F>
F exact_covariance(const PotentialOutcomeTable<F>& table, const BlockDesign& design,
                   const Statistic<F>& a, const Statistic<F>& b,
                   RandomizationMode mode = RandomizationMode::Block,
                   std::uint64_t cap = kDefaultEnumerationCap) {
  const Statistic<F> stats[2] = {a, b};
  const std::pair<int, int> pairs[1] = {{0, 1}};
  const MomentTable<F> out = exact_moments<F>(table, design, stats, pairs, mode, cap);
  return out.covariance(0, 1);
}

/// Fast path for block-additive statistics: per-block enumeration plus
/// independence across blocks. Exactly equal to full-product enumeration.
template <Field F>
OracleResult<F> exact_expectation(const PotentialOutcomeTable<F>& table,
                                  const BlockDesign& design,
                                  const BlockTermStatistic<F>& statistic,
                                  std::uint64_t cap = kDefaultEnumerationCap) {
  check_conforms(table, design);
  F expectation(0);
  F variance(0);
  BigInt support = 1;
  for (int c = 0; c < design.num_blocks(); ++c) {
    const BlockDesign single =
        BlockDesign::single(design.block_size(c), design.num_treatments());
    const PotentialOutcomeTable<F> slice = block_slice(table, design, c);
    const Statistic<F> term{statistic.label + "[block " + std::to_string(c) + "]",
                            [&statistic, c](const ObservedStudy<F>& study) {
                              return statistic.term(study, c);
                            }};
    const OracleResult<F> block =
        exact_expectation<F>(slice, single, term, RandomizationMode::Block, cap);
    expectation = expectation + block.expectation;
    variance = variance + block.variance;
    support *= block.support_size;
  }
  return {expectation, variance, support};
}

// ---------------------------------------------------------------------------
// Statistic factories. Labels name what the statistic computes; the
// estimator implementations themselves are what gets certified.
// ---------------------------------------------------------------------------

template <Field F>
Statistic<F> stat_constant(F value, std::string label = "constant") {
  return {std::move(label), [value](const ObservedStudy<F>&) { return value; }};
}

template <Field F>
Statistic<F> stat_mu_samp(int s) {
  return {"mu_hat_samp(" + std::to_string(s) + ")", [s](const ObservedStudy<F>& study) {
            return mu_hat_samp(study, StratumView::domain(study.design), s);
          }};
}

template <Field F>
Statistic<F> stat_mu_ht(int s) {
  return {"mu_hat_ht(" + std::to_string(s) + ")", [s](const ObservedStudy<F>& study) {
            return mu_hat_ht(study, StratumView::domain(study.design), s);
          }};
}

template <Field F>
Statistic<F> stat_sigma2_samp(int s) {
  return {"sigma2_hat_samp(" + std::to_string(s) + ")", [s](const ObservedStudy<F>& study) {
            return sigma2_hat_samp(study, StratumView::domain(study.design), s);
          }};
}

template <Field F>
Statistic<F> stat_sigma2_ht(int s) {
  return {"sigma2_hat_ht(" + std::to_string(s) + ")", [s](const ObservedStudy<F>& study) {
            return sigma2_hat_ht(study, StratumView::domain(study.design), s);
          }};
}

template <Field F>
Statistic<F> stat_pair_sum(int s) {
  return {"observed_pair_sum(" + std::to_string(s) + ")", [s](const ObservedStudy<F>& study) {
            return observed_pair_sum(study, StratumView::domain(study.design), s);
          }};
}

template <Field F>
Statistic<F> stat_cross_pair_sum(int s, int t) {
  return {"observed_cross_pair_sum(" + std::to_string(s) + "," + std::to_string(t) + ")",
          [s, t](const ObservedStudy<F>& study) {
            return observed_cross_pair_sum(study, StratumView::domain(study.design), s, t);
          }};
}

template <Field F>
Statistic<F> stat_sate_diff(int s, int t) {
  return {"sate_hat_diff(" + std::to_string(s) + "," + std::to_string(t) + ")",
          [s, t](const ObservedStudy<F>& study) { return sate_hat_diff(study, s, t); }};
}

template <Field F>
Statistic<F> stat_sate_ht(int s, int t) {
  return {"sate_hat_ht(" + std::to_string(s) + "," + std::to_string(t) + ")",
          [s, t](const ObservedStudy<F>& study) { return sate_hat_ht(study, s, t); }};
}

template <Field F>
Statistic<F> stat_varhat_sate(EstimatorKind kind, int s, int t) {
  return {std::string("varhat_sate_") + estimator_kind_name(kind) + "(" + std::to_string(s) +
              "," + std::to_string(t) + ")",
          [kind, s, t](const ObservedStudy<F>& study) {
            return kind == EstimatorKind::Diff ? varhat_sate_diff(study, s, t)
                                               : varhat_sate_ht(study, s, t);
          }};
}

template <Field F>
Statistic<F> stat_varhat_mu_block(EstimatorKind kind, int c, int s) {
  return {std::string("varhat_mu_") + estimator_kind_name(kind) + "_block(" +
              std::to_string(c) + "," + std::to_string(s) + ")",
          [kind, c, s](const ObservedStudy<F>& study) {
            return kind == EstimatorKind::Diff ? varhat_mu_samp_block(study, c, s)
                                               : varhat_mu_ht_block(study, c, s);
          }};
}

/// delta_hat as a sum of per-block terms (n_c/n) * (mu_hat_cs - mu_hat_ct).
template <Field F>
BlockTermStatistic<F> term_sate(EstimatorKind kind, const BlockDesign& design, int s, int t) {
  const int n = design.total_units();
  std::vector<int> sizes = design.block_sizes();
  return {std::string("sate_hat_") + estimator_kind_name(kind) + "(" + std::to_string(s) + "," +
              std::to_string(t) + ")",
          [kind, n, sizes, s, t](const ObservedStudy<F>& slice, int c) {
            const F inner = kind == EstimatorKind::Diff ? sate_hat_diff(slice, s, t)
                                                        : sate_hat_ht(slice, s, t);
            return fr<F>(sizes[c], n) * inner;
          }};
}

/// varhat_sate as a sum of per-block terms (n_c/n)^2 * (block summand).
template <Field F>
BlockTermStatistic<F> term_varhat_sate(EstimatorKind kind, const BlockDesign& design, int s,
                                       int t) {
  const int n = design.total_units();
  std::vector<int> sizes = design.block_sizes();
  return {std::string("varhat_sate_") + estimator_kind_name(kind) + "(" + std::to_string(s) +
              "," + std::to_string(t) + ")",
          [kind, n, sizes, s, t](const ObservedStudy<F>& slice, int c) {
            // The slice is a single-block study, so the inner call yields the
            // block summand with weight 1; rescale to (n_c/n)^2.
            const F inner = kind == EstimatorKind::Diff ? varhat_sate_diff(slice, s, t)
                                                        : varhat_sate_ht(slice, s, t);
            return fr<F>(sizes[c], n) * fr<F>(sizes[c], n) * inner;
          }};
}

}  // namespace blockrand
