#pragma once

#include <string>
#include <vector>

#include "blockrand/design.hpp"
#include "blockrand/errors.hpp"
#include "blockrand/fields.hpp"

namespace blockrand {

/// Full potential-outcome matrix y_{kcs}: one fixed value per (unit,
/// treatment). Units are flattened block by block, as in Assignment.
/// Values are non-random; only one per unit is ever observed.
template <Field F>
class PotentialOutcomeTable {
 public:
  PotentialOutcomeTable(int num_treatments, std::vector<std::vector<F>> rows)
      : r_(num_treatments), rows_(std::move(rows)) {
    if (r_ < 1) throw ShapeError("table: number of treatments must be >= 1");
    for (std::size_t u = 0; u < rows_.size(); ++u) {
      if (static_cast<int>(rows_[u].size()) != r_) {
        throw ShapeError("table: unit " + std::to_string(u) + " has " +
                         std::to_string(rows_[u].size()) + " outcomes, expected " +
                         std::to_string(r_));
      }
    }
  }

  int num_units() const { return static_cast<int>(rows_.size()); }
  int num_treatments() const { return r_; }

  /// y for flattened unit index and treatment id s in 1..r.
  const F& value(int unit, int s) const { return rows_[unit][s - 1]; }

  const std::vector<std::vector<F>>& rows() const { return rows_; }

 private:
  int r_;
  std::vector<std::vector<F>> rows_;
};

template <Field F>
void check_conforms(const PotentialOutcomeTable<F>& table, const BlockDesign& design) {
  if (table.num_units() != design.total_units()) {
    throw ShapeError("table has " + std::to_string(table.num_units()) + " units, design has " +
                     std::to_string(design.total_units()));
  }
  if (table.num_treatments() != design.num_treatments()) {
    throw ShapeError("table has " + std::to_string(table.num_treatments()) +
                     " treatments, design has " + std::to_string(design.num_treatments()));
  }
}

/// The single-block restriction of a table (units of block c only).
template <Field F>
PotentialOutcomeTable<F> block_slice(const PotentialOutcomeTable<F>& table,
                                     const BlockDesign& design, int c) {
  check_conforms(table, design);
  const int offset = design.unit_offset(c);
  std::vector<std::vector<F>> rows(table.rows().begin() + offset,
                                   table.rows().begin() + offset + design.block_size(c));
  return PotentialOutcomeTable<F>(table.num_treatments(), std::move(rows));
}

/// Realized data of one experiment: the design, the drawn assignment, and
/// one observed response per unit. Estimators operate on this type only,
/// so they cannot touch unobserved potential outcomes.
template <Field F>
struct ObservedStudy {
  BlockDesign design;
  Assignment assignment;
  std::vector<F> responses;
};

/// Observed response Y_{kc} = sum_s y_{kcs} T_{kcs}: each unit reveals the
/// potential outcome of its own label and nothing else (SUTVA is
/// structural here).
template <Field F>
ObservedStudy<F> observe(const PotentialOutcomeTable<F>& table, const BlockDesign& design,
                         const Assignment& assignment) {
  check_conforms(table, design);
  if (static_cast<int>(assignment.labels.size()) != design.total_units()) {
    throw ShapeError("assignment has " + std::to_string(assignment.labels.size()) +
                     " labels, design has " + std::to_string(design.total_units()));
  }
  ObservedStudy<F> study{design, assignment, {}};
  study.responses.reserve(assignment.labels.size());
  for (std::size_t u = 0; u < assignment.labels.size(); ++u) {
    study.responses.push_back(table.value(static_cast<int>(u), assignment.labels[u]));
  }
  return study;
}

/// Fixed population parameters of a table: means, variances (1/n
/// convention), covariances, at domain and block level. gamma[s-1][t-1]
/// is symmetric with gamma[s-1][s-1] = sigma2[s-1].
template <Field F>
struct PopulationParams {
  std::vector<F> mu;
  std::vector<F> sigma2;
  std::vector<std::vector<F>> gamma;
  // Block-level versions, indexed [c].
  std::vector<std::vector<F>> block_mu;
  std::vector<std::vector<F>> block_sigma2;
  std::vector<std::vector<std::vector<F>>> block_gamma;
};

namespace detail {

// Mean/central second moments over units [first, last), population (1/m)
// convention.
template <Field F>
void central_moments(const PotentialOutcomeTable<F>& table, int first, int last,
                     std::vector<F>& mu, std::vector<std::vector<F>>& gamma) {
  const int r = table.num_treatments();
  const int m = last - first;
  mu.assign(r, F(0));
  for (int u = first; u < last; ++u) {
    for (int s = 1; s <= r; ++s) mu[s - 1] = mu[s - 1] + table.value(u, s);
  }
  for (F& v : mu) v = v / F(m);
  gamma.assign(r, std::vector<F>(r, F(0)));
  for (int u = first; u < last; ++u) {
    for (int s = 1; s <= r; ++s) {
      const F ds = table.value(u, s) - mu[s - 1];
      for (int t = s; t <= r; ++t) {
        gamma[s - 1][t - 1] = gamma[s - 1][t - 1] + ds * (table.value(u, t) - mu[t - 1]);
      }
    }
  }
  for (int s = 0; s < r; ++s) {
    for (int t = s; t < r; ++t) {
      gamma[s][t] = gamma[s][t] / F(m);
      gamma[t][s] = gamma[s][t];
    }
  }
}

}  // namespace detail

template <Field F>
PopulationParams<F> population_params(const PotentialOutcomeTable<F>& table,
                                      const BlockDesign& design) {
  check_conforms(table, design);
  const int r = design.num_treatments();
  PopulationParams<F> params;
  detail::central_moments(table, 0, design.total_units(), params.mu, params.gamma);
  params.sigma2.resize(r);
  for (int s = 0; s < r; ++s) params.sigma2[s] = params.gamma[s][s];

  const int b = design.num_blocks();
  params.block_mu.resize(b);
  params.block_sigma2.resize(b);
  params.block_gamma.resize(b);
  for (int c = 0; c < b; ++c) {
    const int first = design.unit_offset(c);
    detail::central_moments(table, first, first + design.block_size(c), params.block_mu[c],
                            params.block_gamma[c]);
    params.block_sigma2[c].resize(r);
    for (int s = 0; s < r; ++s) params.block_sigma2[c][s] = params.block_gamma[c][s][s];
  }
  return params;
}

/// Sample average treatment effect delta_st = (1/n) sum (y_{kcs} - y_{kct}).
/// Antisymmetric in (s, t); s = t is rejected.
template <Field F>
F sate_true(const PotentialOutcomeTable<F>& table, const BlockDesign& design, int s, int t) {
  check_conforms(table, design);
  const int r = design.num_treatments();
  if (s < 1 || s > r || t < 1 || t > r) {
    throw DesignError("sate_true: treatment ids must be in 1.." + std::to_string(r));
  }
  if (s == t) throw DesignError("sate_true: s and t must differ");
  F sum(0);
  const int n = design.total_units();
  for (int u = 0; u < n; ++u) {
    sum = sum + (table.value(u, s) - table.value(u, t));
  }
  return sum / F(n);
}

}  // namespace blockrand
