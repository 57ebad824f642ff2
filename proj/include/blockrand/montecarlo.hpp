#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "blockrand/design.hpp"
#include "blockrand/errors.hpp"
#include "blockrand/moments.hpp"
#include "blockrand/oracle.hpp"
#include "blockrand/outcomes.hpp"
#include "blockrand/rng.hpp"
#include "blockrand/stats.hpp"

namespace blockrand {

/// Empirical moments of one statistic over R balanced-block draws.
/// Deterministic given the seed: replication i uses substream split(i), and
/// aggregation is pairwise summation, so any parallel schedule would
/// produce bit-identical numbers.
struct SimulationResult {
  std::string label;
  long long replications = 0;
  double empirical_mean = 0.0;
  double empirical_variance = 0.0;       // sample variance (divisor R-1)
  double mc_standard_error = 0.0;        // sqrt(empirical_variance / R)
  double variance_standard_error = 0.0;  // delta-method SE of the variance
  std::uint64_t seed = 0;
};

namespace detail {

inline SimulationResult summarize(std::string label, std::span<const double> values,
                                  std::uint64_t seed) {
  const long long reps = static_cast<long long>(values.size());
  SimulationResult out;
  out.label = std::move(label);
  out.replications = reps;
  out.seed = seed;
  out.empirical_mean = pairwise_sum(values) / static_cast<double>(reps);

  std::vector<double> sq(values.size());
  std::vector<double> quart(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - out.empirical_mean;
    sq[i] = d * d;
    quart[i] = sq[i] * sq[i];
  }
  const double m2 = pairwise_sum(sq) / static_cast<double>(reps);
  const double m4 = pairwise_sum(quart) / static_cast<double>(reps);
  out.empirical_variance = pairwise_sum(sq) / static_cast<double>(reps - 1);
  out.mc_standard_error = std::sqrt(out.empirical_variance / static_cast<double>(reps));
  out.variance_standard_error =
      std::sqrt(std::max(m4 - m2 * m2, 0.0) / static_cast<double>(reps));
  return out;
}

}  // namespace detail

/// R independent balanced-block draws; one result per statistic. All
/// statistics are evaluated on the same draws.
inline std::vector<SimulationResult> simulate(const PotentialOutcomeTable<double>& table,
                                              const BlockDesign& design,
                                              std::span<const Statistic<double>> statistics,
                                              long long replications, std::uint64_t seed) {
  if (replications < 2) throw DesignError("simulate: need at least 2 replications");
  check_conforms(table, design);

  const SplitRng root(seed);
  std::vector<std::vector<double>> values(statistics.size(),
                                          std::vector<double>(replications));
  ObservedStudy<double> study{design, Assignment{}, {}};
  const int n = design.total_units();
  for (long long rep = 0; rep < replications; ++rep) {
    SplitRng rep_rng = root.split(static_cast<std::uint64_t>(rep));
    study.assignment = sample_block(design, rep_rng);
    study.responses.resize(n);
    for (int u = 0; u < n; ++u) {
      study.responses[u] = table.value(u, study.assignment.labels[u]);
    }
    for (std::size_t i = 0; i < statistics.size(); ++i) {
      values[i][rep] = statistics[i].eval(study);
    }
  }

  std::vector<SimulationResult> results;
  results.reserve(statistics.size());
  for (std::size_t i = 0; i < statistics.size(); ++i) {
    results.push_back(detail::summarize(statistics[i].label, values[i], seed));
  }
  return results;
}

/// Side-by-side empirical variances of the two SATE estimators on the same
/// draws, with the theoretical values from the variance formulas. No
/// ordering between the two is asserted anywhere.
struct EstimatorComparison {
  SimulationResult diff;
  SimulationResult ht;
  double empirical_variance_difference = 0.0;  // diff minus ht
  double delta_true = 0.0;
  double theoretical_var_diff = 0.0;
  double theoretical_var_ht = 0.0;
  double theoretical_var_star_diff = 0.0;
  double theoretical_var_star_ht = 0.0;
};

inline EstimatorComparison compare_estimators(const PotentialOutcomeTable<double>& table,
                                              const BlockDesign& design, int s, int t,
                                              long long replications, std::uint64_t seed) {
  const Statistic<double> stats[2] = {stat_sate_diff<double>(s, t), stat_sate_ht<double>(s, t)};
  std::vector<SimulationResult> results = simulate(table, design, stats, replications, seed);
  EstimatorComparison out;
  out.diff = std::move(results[0]);
  out.ht = std::move(results[1]);
  out.empirical_variance_difference = out.diff.empirical_variance - out.ht.empirical_variance;
  out.delta_true = sate_true(table, design, s, t);
  out.theoretical_var_diff = var_sate_diff(table, design, s, t);
  out.theoretical_var_ht = var_sate_ht(table, design, s, t);
  out.theoretical_var_star_diff = var_star(table, design, s, t, EstimatorKind::Diff);
  out.theoretical_var_star_ht = var_star(table, design, s, t, EstimatorKind::HT);
  return out;
}

}  // namespace blockrand
