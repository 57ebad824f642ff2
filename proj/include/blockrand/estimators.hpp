#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blockrand/errors.hpp"
#include "blockrand/fields.hpp"
#include "blockrand/outcomes.hpp"

namespace blockrand {

/// The units an estimator ranges over: the whole domain or a single block.
/// Units of a block are contiguous in the flattened order.
class StratumView {
 public:
  static StratumView domain(const BlockDesign& design) {
    return StratumView(design, -1, 0, design.total_units());
  }
  static StratumView block(const BlockDesign& design, int c) {
    if (c < 0 || c >= design.num_blocks()) {
      throw ShapeError("stratum: block index " + std::to_string(c) + " out of range");
    }
    return StratumView(design, c, design.unit_offset(c), design.block_size(c));
  }

  int size() const { return size_; }                      // m
  int first_unit() const { return first_; }
  int num_treatments() const { return r_; }
  int remainder() const { return size_ % r_; }            // z_m = m mod r
  bool is_block() const { return block_ >= 0; }
  int block_index() const { return block_; }

 private:
  StratumView(const BlockDesign& design, int block, int first, int size)
      : r_(design.num_treatments()), block_(block), first_(first), size_(size) {}

  int r_;
  int block_;
  int first_;
  int size_;
};

namespace detail {

template <Field F>
struct TreatedSums {
  int count = 0;  // #T_s within the stratum
  F sum = F(0);   // sum of observed responses under s
  F sum_sq = F(0);
};

template <Field F>
TreatedSums<F> treated_sums(const ObservedStudy<F>& study, const StratumView& stratum, int s) {
  TreatedSums<F> out;
  const int last = stratum.first_unit() + stratum.size();
  for (int u = stratum.first_unit(); u < last; ++u) {
    if (study.assignment.labels[u] == s) {
      ++out.count;
      out.sum = out.sum + study.responses[u];
      out.sum_sq = out.sum_sq + study.responses[u] * study.responses[u];
    }
  }
  return out;
}

template <Field F>
void check_treatment(const ObservedStudy<F>& study, int s) {
  const int r = study.design.num_treatments();
  if (s < 1 || s > r) {
    throw DesignError("treatment id " + std::to_string(s) + " outside 1.." + std::to_string(r));
  }
}

}  // namespace detail

/// Sample mean of responses observed under treatment s in the stratum.
template <Field F>
F mu_hat_samp(const ObservedStudy<F>& study, const StratumView& stratum, int s) {
  detail::check_treatment(study, s);
  const auto sums = detail::treated_sums(study, stratum, s);
  if (sums.count == 0) {
    throw UndefinedEstimatorError("mu_hat_samp: no unit with treatment " + std::to_string(s) +
                                  " in stratum");
  }
  return sums.sum / F(sums.count);
}

/// Horvitz-Thompson mean: responses weighted by the inverse assignment
/// probability r/m instead of the realized count.
template <Field F>
F mu_hat_ht(const ObservedStudy<F>& study, const StratumView& stratum, int s) {
  detail::check_treatment(study, s);
  const auto sums = detail::treated_sums(study, stratum, s);
  return sums.sum * F(stratum.num_treatments()) / F(stratum.size());
}

/// Sample variance estimator ((m-1)/m) * sum T (y - mu_hat)^2 / (#T_s - 1).
template <Field F>
F sigma2_hat_samp(const ObservedStudy<F>& study, const StratumView& stratum, int s) {
  detail::check_treatment(study, s);
  const auto sums = detail::treated_sums(study, stratum, s);
  if (sums.count < 2) {
    throw UndefinedEstimatorError("sigma2_hat_samp: needs #T_s >= 2, got " +
                                  std::to_string(sums.count));
  }
  const F mean = sums.sum / F(sums.count);
  // sum T (y - mean)^2 = sum y^2 T - #T_s * mean^2
  const F centered = sums.sum_sq - F(sums.count) * mean * mean;
  const int m = stratum.size();
  return fr<F>(m - 1, m) * centered / F(sums.count - 1);
}

/// Horvitz-Thompson variance estimator; the ordered-pair sum is evaluated
/// as (sum yT)^2 - sum y^2 T. Undefined when m = r with z = 0 (the pair
/// term's denominator vanishes).
template <Field F>
F sigma2_hat_ht(const ObservedStudy<F>& study, const StratumView& stratum, int s) {
  detail::check_treatment(study, s);
  const int m = stratum.size();
  const int r = stratum.num_treatments();
  const int z = stratum.remainder();
  // m^2 (m - r) + m z (r - z)
  const F denom = F(m) * F(m) * F(m - r) + F(m) * F(z) * F(r - z);
  if (denom == F(0)) {
    throw UndefinedEstimatorError("sigma2_hat_ht: undefined for stratum size m = r = " +
                                  std::to_string(r));
  }
  const auto sums = detail::treated_sums(study, stratum, s);
  const F pair_sum = sums.sum * sums.sum - sums.sum_sq;
  return fr<F>((m - 1) * r, static_cast<long long>(m) * m) * sums.sum_sq -
         F(m - 1) * F(r) * F(r) / denom * pair_sum;
}

/// Observed same-treatment ordered-pair sum over a stratum:
/// sum_{k != l} y_k y_l T_{ks} T_{ls}.
template <Field F>
F observed_pair_sum(const ObservedStudy<F>& study, const StratumView& stratum, int s) {
  detail::check_treatment(study, s);
  const auto sums = detail::treated_sums(study, stratum, s);
  return sums.sum * sums.sum - sums.sum_sq;
}

/// Observed cross-treatment ordered-pair sum: sum_{k != l} y_k y_l T_{ks}
/// T_{lt}. The diagonal vanishes because a unit has exactly one label.
template <Field F>
F observed_cross_pair_sum(const ObservedStudy<F>& study, const StratumView& stratum, int s,
                          int t) {
  detail::check_treatment(study, s);
  detail::check_treatment(study, t);
  if (s == t) throw DesignError("observed_cross_pair_sum: s and t must differ");
  const auto s_sums = detail::treated_sums(study, stratum, s);
  const auto t_sums = detail::treated_sums(study, stratum, t);
  return s_sums.sum * t_sums.sum;
}

/// Difference-in-means SATE estimator: block-size-weighted difference of
/// within-block sample means.
template <Field F>
F sate_hat_diff(const ObservedStudy<F>& study, int s, int t) {
  detail::check_treatment(study, s);
  detail::check_treatment(study, t);
  if (s == t) throw DesignError("sate_hat_diff: s and t must differ");
  const BlockDesign& design = study.design;
  const int n = design.total_units();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const StratumView stratum = StratumView::block(design, c);
    const F diff = mu_hat_samp(study, stratum, s) - mu_hat_samp(study, stratum, t);
    total = total + fr<F>(design.block_size(c), n) * diff;
  }
  return total;
}

/// Horvitz-Thompson SATE estimator: inverse-probability weights r/n_c.
template <Field F>
F sate_hat_ht(const ObservedStudy<F>& study, int s, int t) {
  detail::check_treatment(study, s);
  detail::check_treatment(study, t);
  if (s == t) throw DesignError("sate_hat_ht: s and t must differ");
  const BlockDesign& design = study.design;
  const int n = design.total_units();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    const StratumView stratum = StratumView::block(design, c);
    const F diff = mu_hat_ht(study, stratum, s) - mu_hat_ht(study, stratum, t);
    total = total + fr<F>(design.block_size(c), n) * diff;
  }
  return total;
}

namespace detail {

inline void require_estimable_block(const BlockDesign& design, int c, const char* what) {
  if (design.block_size(c) < 2 * design.num_treatments()) {
    throw VarianceUnestimableError(std::string(what) + ": block sizes must be at least 2r (block " +
                                   std::to_string(c + 1) + " has " +
                                   std::to_string(design.block_size(c)) + " units, r = " +
                                   std::to_string(design.num_treatments()) + ")");
  }
}

}  // namespace detail

/// Unbiased estimator of Var(mu_hat_{cs,samp}) within block c.
template <Field F>
F varhat_mu_samp_block(const ObservedStudy<F>& study, int c, int s) {
  detail::require_estimable_block(study.design, c, "varhat_mu_samp_block");
  const BlockDesign& design = study.design;
  const int nc = design.block_size(c);
  const int r = design.num_treatments();
  const int zc = design.block_remainder(c);
  const F coeff = fr<F>(r - 1, nc - 1) +
                  F(r) * F(zc) * F(r - zc) / (F(nc - 1) * F(nc - zc) * F(nc + r - zc));
  return coeff * sigma2_hat_samp(study, StratumView::block(design, c), s);
}

/// Unbiased estimator of Var(mu_hat_{cs,HT}) within block c.
template <Field F>
F varhat_mu_ht_block(const ObservedStudy<F>& study, int c, int s) {
  detail::require_estimable_block(study.design, c, "varhat_mu_ht_block");
  const BlockDesign& design = study.design;
  const StratumView stratum = StratumView::block(design, c);
  const int nc = design.block_size(c);
  const int r = design.num_treatments();
  const int zc = design.block_remainder(c);
  // n_c^3 (n_c - r) + n_c^2 z_c (r - z_c); positive since n_c >= 2r > r
  const F denom = F(nc) * F(nc) * F(nc) * F(nc - r) + F(nc) * F(nc) * F(zc) * F(r - zc);
  const F pair_coeff = F(r) * F(r) * F(zc) * F(r - zc) / denom;
  return fr<F>(r - 1, nc - 1) * sigma2_hat_ht(study, stratum, s) +
         pair_coeff * observed_pair_sum(study, stratum, s);
}

/// Conservative variance estimator for the difference-in-means SATE
/// estimator. The first coefficient uses r (not r-1): the AM-GM bound on
/// the inestimable covariance is folded into the sigma^2 terms.
template <Field F>
F varhat_sate_diff(const ObservedStudy<F>& study, int s, int t) {
  if (s == t) throw DesignError("varhat_sate_diff: s and t must differ");
  const BlockDesign& design = study.design;
  const int n = design.total_units();
  const int r = design.num_treatments();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    detail::require_estimable_block(design, c, "varhat_sate_diff");
    const StratumView stratum = StratumView::block(design, c);
    const int nc = design.block_size(c);
    const int zc = design.block_remainder(c);
    const F coeff = fr<F>(r, nc - 1) +
                    F(r) * F(zc) * F(r - zc) / (F(nc - 1) * F(nc - zc) * F(nc + r - zc));
    const F weight = fr<F>(nc, n) * fr<F>(nc, n);
    total = total + weight * coeff *
                        (sigma2_hat_samp(study, stratum, s) + sigma2_hat_samp(study, stratum, t));
  }
  return total;
}

/// Conservative variance estimator for the Horvitz-Thompson SATE
/// estimator. May be negative on a given draw (the pair terms are signed);
/// only its expectation is guaranteed to bound the true variance.
template <Field F>
F varhat_sate_ht(const ObservedStudy<F>& study, int s, int t) {
  if (s == t) throw DesignError("varhat_sate_ht: s and t must differ");
  const BlockDesign& design = study.design;
  const int n = design.total_units();
  const int r = design.num_treatments();
  F total(0);
  for (int c = 0; c < design.num_blocks(); ++c) {
    detail::require_estimable_block(design, c, "varhat_sate_ht");
    const StratumView stratum = StratumView::block(design, c);
    const int nc = design.block_size(c);
    const int zc = design.block_remainder(c);
    const F same_denom = F(nc) * F(nc) * F(nc) * F(nc - r) + F(nc) * F(nc) * F(zc) * F(r - zc);
    const F cross_denom =
        F(nc) * F(nc) * F(nc) * F(nc) * F(r - 1) - F(nc) * F(nc) * F(zc) * F(r - zc);
    const F same_coeff = F(r) * F(r) * F(zc) * F(r - zc) / same_denom;
    const F cross_coeff = F(2) * F(r) * F(r) * F(zc) * F(r - zc) / cross_denom;
    F term = fr<F>(r, nc - 1) *
             (sigma2_hat_ht(study, stratum, s) + sigma2_hat_ht(study, stratum, t));
    term = term + same_coeff * (observed_pair_sum(study, stratum, s) +
                                observed_pair_sum(study, stratum, t));
    term = term + cross_coeff * observed_cross_pair_sum(study, stratum, s, t);
    total = total + fr<F>(nc, n) * fr<F>(nc, n) * term;
  }
  return total;
}

enum class EstimatorKind { Diff, HT };

inline const char* estimator_kind_name(EstimatorKind kind) {
  return kind == EstimatorKind::Diff ? "diff" : "ht";
}

/// A point estimate with its (optional) variance estimate. The variance is
/// present only when every block has at least 2r units; an HT variance may
/// come out negative and is recorded as-is.
template <Field F>
struct SateEstimate {
  EstimatorKind estimator_kind;
  F point;
  std::optional<F> variance_estimate;
  int s;
  int t;
};

template <Field F>
SateEstimate<F> estimate_sate(const ObservedStudy<F>& study, int s, int t, EstimatorKind kind,
                              bool want_variance) {
  SateEstimate<F> out{kind,
                      kind == EstimatorKind::Diff ? sate_hat_diff(study, s, t)
                                                  : sate_hat_ht(study, s, t),
                      std::nullopt, s, t};
  if (want_variance) {
    out.variance_estimate = kind == EstimatorKind::Diff ? varhat_sate_diff(study, s, t)
                                                        : varhat_sate_ht(study, s, t);
  }
  return out;
}

}  // namespace blockrand
