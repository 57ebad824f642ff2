#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "blockrand/design.hpp"
#include "blockrand/fields.hpp"
#include "blockrand/moments.hpp"
#include "blockrand/oracle.hpp"
#include "blockrand/outcomes.hpp"
#include "blockrand/rng.hpp"

namespace blockrand {

/// One (design, table) pair the identity suite runs on.
struct CorpusEntry {
  std::string name;
  std::string family;  // constant | constant-shift | linear | unequal-variance | random | hand
  BlockDesign design;
  PotentialOutcomeTable<Rational> table;
};

/// One certified identity instance: both sides as exact rationals.
struct IdentityCheck {
  std::string identity;
  std::string instance;
  std::string lhs;
  std::string rhs;
  bool pass;
};

struct VerifyReport {
  std::vector<IdentityCheck> checks;

  int failures() const {
    int count = 0;
    for (const auto& check : checks) {
      if (!check.pass) ++count;
    }
    return count;
  }

  /// identity -> (pass count, fail count)
  std::map<std::string, std::pair<int, int>> by_identity() const {
    std::map<std::string, std::pair<int, int>> out;
    for (const auto& check : checks) {
      auto& [pass, fail] = out[check.identity];
      (check.pass ? pass : fail) += 1;
    }
    return out;
  }
};

struct VerifyOptions {
  std::string identity;  // run only this identity when nonempty
  std::uint64_t cap = kDefaultEnumerationCap;
  // Whole-domain complete-randomization estimator checks run only when the
  // domain support is at most this large.
  std::uint64_t domain_complete_budget = 2000;
};

inline std::vector<std::string> known_identities() {
  return {
      "assignment-count",
      "replication-distribution",
      "indicator-moments",
      "mean-samp",
      "var-samp",
      "cov-samp",
      "mean-ht",
      "var-ht",
      "cov-ht",
      "sigma2-samp-unbiased",
      "sigma2-ht-unbiased",
      "varhat-mu-samp-unbiased",
      "varhat-mu-ht-unbiased",
      "cross-sum-expectation",
      "sate-diff-unbiased",
      "var-sate-diff",
      "sate-ht-unbiased",
      "var-sate-ht",
      "varhat-sate-diff-expectation",
      "varhat-sate-ht-expectation",
      "conservative-diff",
      "conservative-ht",
      "divisible-blocks",
  };
}

/// Exact-equality check; both sides recorded as rational strings.
inline IdentityCheck check_equal(std::string identity, std::string instance, const Rational& lhs,
                                 const Rational& rhs) {
  const bool pass = lhs == rhs;
  return {std::move(identity), std::move(instance), lhs.str(), rhs.str(), pass};
}

/// Conservative-bound check: lhs >= rhs, with equality exactly when
/// `equality_expected`.
inline IdentityCheck check_bound(std::string identity, std::string instance, const Rational& lhs,
                                 const Rational& rhs, bool equality_expected) {
  const bool pass = lhs >= rhs && ((lhs == rhs) == equality_expected);
  return {std::move(identity),
          std::move(instance) + (equality_expected ? " (equality expected)" : " (strict expected)"),
          lhs.str(), rhs.str(), pass};
}

// ---------------------------------------------------------------------------
// Default corpus
// ---------------------------------------------------------------------------

namespace detail {

template <class Fn>
PotentialOutcomeTable<Rational> build_table(const BlockDesign& design, Fn&& cell) {
  std::vector<std::vector<Rational>> rows;
  rows.reserve(design.total_units());
  for (int c = 0; c < design.num_blocks(); ++c) {
    for (int k = 0; k < design.block_size(c); ++k) {
      std::vector<Rational> row;
      row.reserve(design.num_treatments());
      for (int s = 1; s <= design.num_treatments(); ++s) {
        row.emplace_back(cell(k, c, s));
      }
      rows.push_back(std::move(row));
    }
  }
  return PotentialOutcomeTable<Rational>(design.num_treatments(), std::move(rows));
}

inline std::string design_tag(const BlockDesign& design) {
  std::string tag = "r" + std::to_string(design.num_treatments()) + " b[";
  for (int c = 0; c < design.num_blocks(); ++c) {
    if (c > 0) tag += ",";
    tag += std::to_string(design.block_size(c));
  }
  return tag + "]";
}

}  // namespace detail

/// All designs with b <= 2, n_c in {2..6}, r in {2,3}; per design the four
/// structured tables plus one seeded random integer table in [-5, 5].
inline std::vector<CorpusEntry> default_corpus() {
  std::vector<CorpusEntry> entries;

  std::vector<BlockDesign> designs;
  for (int r : {2, 3}) {
    for (int n1 = r; n1 <= 6; ++n1) designs.push_back(BlockDesign(r, {n1}));
    for (int n1 = r; n1 <= 6; ++n1) {
      for (int n2 = r; n2 <= 6; ++n2) designs.push_back(BlockDesign(r, {n1, n2}));
    }
  }

  int design_index = 0;
  for (const BlockDesign& design : designs) {
    const std::string tag = detail::design_tag(design);

    entries.push_back({tag + " constant", "constant", design,
                       detail::build_table(design, [](int, int, int) { return 2; })});
    entries.push_back({tag + " constant-shift", "constant-shift", design,
                       detail::build_table(design, [](int k, int c, int s) {
                         return (k + 1) + (c + 1) * (s - 1);
                       })});
    entries.push_back({tag + " linear", "linear", design,
                       detail::build_table(design, [](int k, int c, int s) {
                         return s * (k + 1) + c;
                       })});
    entries.push_back({tag + " unequal-variance", "unequal-variance", design,
                       detail::build_table(design, [](int k, int, int s) {
                         return s == 1 ? (k % 2 == 0 ? 4 : -4) : s;
                       })});

    SplitRng rng(0x5eedull + static_cast<std::uint64_t>(design_index));
    entries.push_back({tag + " random", "random", design,
                       detail::build_table(design, [&rng](int, int, int) {
                         return static_cast<int>(rng.below(11)) - 5;
                       })});
    ++design_index;
  }

  // Hand-checkable case: n = 3, r = 2, both arms (1, 2, 3).
  const BlockDesign hand = BlockDesign::single(3, 2);
  entries.push_back({"hand n=3 r=2 y=(1,2,3)", "hand", hand,
                     detail::build_table(hand, [](int k, int, int) { return k + 1; })});

  return entries;
}

// ---------------------------------------------------------------------------
// Identity suite
// ---------------------------------------------------------------------------

namespace detail {

struct IdentityFilter {
  const std::string& only;
  bool wants(const char* identity) const { return only.empty() || only == identity; }
  bool wants_any(std::initializer_list<const char*> identities) const {
    if (only.empty()) return true;
    for (const char* identity : identities) {
      if (only == identity) return true;
    }
    return false;
  }
};

// Enumeration cardinality equals the closed-form assignment count.
inline void verify_count_identity(VerifyReport& report, std::uint64_t cap) {
  for (int r = 1; r <= 4; ++r) {
    for (int n = r; n <= 10; ++n) {
      BigInt enumerated = 0;
      enumerate_complete(n, r, [&](const Assignment&) { ++enumerated; }, cap);
      report.checks.push_back(check_equal(
          "assignment-count", "n=" + std::to_string(n) + " r=" + std::to_string(r),
          Rational(enumerated), Rational(count_balanced_assignments(n, r))));
    }
  }
}

// Replication-count distribution: P(#T_1 = floor(m/r)+1) = z/r exactly.
inline void verify_distnums(VerifyReport& report, std::uint64_t cap) {
  for (int r = 2; r <= 4; ++r) {
    for (int m = r; m <= 8; ++m) {
      const int q = m / r;
      const int z = m % r;
      BigInt total = 0;
      BigInt larger = 0;
      enumerate_complete(m, r, [&](const Assignment& assignment) {
        ++total;
        int count = 0;
        for (int label : assignment.labels) count += label == 1;
        if (count == q + 1) ++larger;
      }, cap);
      report.checks.push_back(check_equal(
          "replication-distribution", "m=" + std::to_string(m) + " r=" + std::to_string(r),
          Rational(larger) / Rational(total), Rational(z) / Rational(r)));
    }
  }
}

// All six indicator-moment closed forms against enumeration.
inline void verify_indicator_moments(VerifyReport& report, std::uint64_t cap) {
  for (int r = 2; r <= 4; ++r) {
    for (int m = r; m <= 8; ++m) {
      BigInt total = 0;
      BigInt count_sum = 0, count_sq_sum = 0, count_pair_sum = 0;
      BigInt joint_same_sum = 0, joint_cross_sum = 0;
      Rational inv_count_sum = 0;
      enumerate_complete(m, r, [&](const Assignment& assignment) {
        ++total;
        int count_s = 0, count_t = 0;
        for (int label : assignment.labels) {
          count_s += label == 1;
          count_t += label == 2;
        }
        count_sum += count_s;
        count_sq_sum += count_s * count_s;
        count_pair_sum += count_s * count_t;
        inv_count_sum += Rational(1, count_s);
        joint_same_sum += assignment.labels[0] == 1 && assignment.labels[1] == 1;
        joint_cross_sum += assignment.labels[0] == 1 && assignment.labels[1] == 2;
      }, cap);
      const Rational denom(total);
      const auto closed = indicator_moments<Rational>(m, r);
      const std::string where = "m=" + std::to_string(m) + " r=" + std::to_string(r);
      report.checks.push_back(check_equal("indicator-moments", where + " E[#T_s]",
                                          Rational(count_sum) / denom, closed.count_mean));
      report.checks.push_back(check_equal("indicator-moments", where + " E[(#T_s)^2]",
                                          Rational(count_sq_sum) / denom, closed.count_second));
      report.checks.push_back(check_equal("indicator-moments", where + " E[#T_s#T_t]",
                                          Rational(count_pair_sum) / denom, closed.count_pair));
      report.checks.push_back(check_equal("indicator-moments", where + " E[1/#T_s]",
                                          inv_count_sum / denom, closed.inv_count));
      report.checks.push_back(check_equal("indicator-moments", where + " E[TisTjs]",
                                          Rational(joint_same_sum) / denom, closed.joint_same));
      report.checks.push_back(check_equal("indicator-moments", where + " E[TisTjt]",
                                          Rational(joint_cross_sum) / denom, closed.joint_cross));
    }
  }
}

// Block-level and whole-design identities for one corpus entry and one
// ordered treatment pair.
inline void verify_entry_pair(VerifyReport& report, const CorpusEntry& entry, int s, int t,
                              const IdentityFilter& filter, const VerifyOptions& opts) {
  const BlockDesign& design = entry.design;
  const PotentialOutcomeTable<Rational>& table = entry.table;
  const int r = design.num_treatments();
  const int n = design.total_units();
  const std::string pair_tag =
      entry.name + ", s=" + std::to_string(s) + " t=" + std::to_string(t);

  const PopulationParams<Rational> params = population_params(table, design);
  const bool estimable = design.min_block_size() >= 2 * r;
  const bool divides = design.divides_all_blocks();

  Rational e_diff = 0, v_diff = 0, e_ht = 0, v_ht = 0;
  Rational identity_gap_sq = 0;  // sum of E[(mu_samp - mu_ht)^2] per block and arm

  for (int c = 0; c < design.num_blocks(); ++c) {
    const int nc = design.block_size(c);
    const int zc = design.block_remainder(c);
    const BlockDesign single = BlockDesign::single(nc, r);
    const PotentialOutcomeTable<Rational> slice = block_slice(table, design, c);
    const std::string where = pair_tag + ", block " + std::to_string(c + 1);

    std::vector<Statistic<Rational>> stats;
    stats.push_back(stat_mu_samp<Rational>(s));   // 0
    stats.push_back(stat_mu_samp<Rational>(t));   // 1
    stats.push_back(stat_mu_ht<Rational>(s));     // 2
    stats.push_back(stat_mu_ht<Rational>(t));     // 3
    const bool block_estimable = nc >= 2 * r;
    if (block_estimable) {
      stats.push_back(stat_sigma2_samp<Rational>(s));                         // 4
      stats.push_back(stat_sigma2_samp<Rational>(t));                         // 5
      stats.push_back(stat_sigma2_ht<Rational>(s));                           // 6
      stats.push_back(stat_sigma2_ht<Rational>(t));                           // 7
      stats.push_back(stat_varhat_mu_block<Rational>(EstimatorKind::Diff, 0, s));  // 8
      stats.push_back(stat_varhat_mu_block<Rational>(EstimatorKind::HT, 0, s));    // 9
      stats.push_back(stat_cross_pair_sum<Rational>(s, t));                   // 10
    }
    std::vector<std::pair<int, int>> pairs = {{0, 1}, {2, 3}};
    if (divides) {
      pairs.emplace_back(0, 2);
      pairs.emplace_back(1, 3);
    }

    const MomentTable<Rational> mom =
        exact_moments<Rational>(slice, single, stats, pairs, RandomizationMode::Block, opts.cap);

    const std::vector<Rational> ys = detail::arm_values(table, StratumView::block(design, c), s);
    const std::vector<Rational> yt = detail::arm_values(table, StratumView::block(design, c), t);
    const Rational& mu_s = params.block_mu[c][s - 1];
    const Rational& mu_t = params.block_mu[c][t - 1];
    const Rational& sig_s = params.block_sigma2[c][s - 1];
    const Rational& sig_t = params.block_sigma2[c][t - 1];
    const Rational& gam = params.block_gamma[c][s - 1][t - 1];

    if (filter.wants("mean-samp")) {
      report.checks.push_back(check_equal("mean-samp", where + " arm s", mom.mean(0), mu_s));
      report.checks.push_back(check_equal("mean-samp", where + " arm t", mom.mean(1), mu_t));
    }
    if (filter.wants("var-samp")) {
      report.checks.push_back(check_equal("var-samp", where + " arm s", mom.variance(0),
                                          var_mu_samp(sig_s, nc, r)));
      report.checks.push_back(check_equal("var-samp", where + " arm t", mom.variance(1),
                                          var_mu_samp(sig_t, nc, r)));
    }
    if (filter.wants("cov-samp")) {
      report.checks.push_back(
          check_equal("cov-samp", where, mom.covariance(0, 1), cov_mu_samp(gam, nc)));
    }
    if (filter.wants("mean-ht")) {
      report.checks.push_back(check_equal("mean-ht", where + " arm s", mom.mean(2), mu_s));
      report.checks.push_back(check_equal("mean-ht", where + " arm t", mom.mean(3), mu_t));
    }
    if (filter.wants("var-ht")) {
      report.checks.push_back(check_equal("var-ht", where + " arm s", mom.variance(2),
                                          var_mu_ht<Rational>(ys, r)));
      report.checks.push_back(check_equal("var-ht", where + " arm t", mom.variance(3),
                                          var_mu_ht<Rational>(yt, r)));
    }
    if (filter.wants("cov-ht")) {
      report.checks.push_back(check_equal("cov-ht", where, mom.covariance(2, 3),
                                          cov_mu_ht<Rational>(ys, yt, r)));
    }
    if (block_estimable) {
      if (filter.wants("sigma2-samp-unbiased")) {
        report.checks.push_back(
            check_equal("sigma2-samp-unbiased", where + " arm s", mom.mean(4), sig_s));
        report.checks.push_back(
            check_equal("sigma2-samp-unbiased", where + " arm t", mom.mean(5), sig_t));
      }
      if (filter.wants("sigma2-ht-unbiased")) {
        report.checks.push_back(
            check_equal("sigma2-ht-unbiased", where + " arm s", mom.mean(6), sig_s));
        report.checks.push_back(
            check_equal("sigma2-ht-unbiased", where + " arm t", mom.mean(7), sig_t));
      }
      if (filter.wants("varhat-mu-samp-unbiased")) {
        report.checks.push_back(check_equal("varhat-mu-samp-unbiased", where, mom.mean(8),
                                            var_mu_samp(sig_s, nc, r)));
      }
      if (filter.wants("varhat-mu-ht-unbiased")) {
        report.checks.push_back(check_equal("varhat-mu-ht-unbiased", where, mom.mean(9),
                                            var_mu_ht<Rational>(ys, r)));
      }
      if (filter.wants("cross-sum-expectation")) {
        // Coefficient of the cross term in varhat_sate_ht.
        const Rational nc_q(nc);
        const Rational cross_coeff =
            Rational(2) * Rational(r) * Rational(r) * Rational(zc) * Rational(r - zc) /
            (nc_q * nc_q * nc_q * nc_q * Rational(r - 1) -
             nc_q * nc_q * Rational(zc) * Rational(r - zc));
        report.checks.push_back(check_equal("cross-sum-expectation", where,
                                            cross_coeff * mom.mean(10),
                                            cross_sum_expectation(table, design, c, s, t)));
      }
    }

    const Rational w = Rational(nc) / Rational(n);
    e_diff += w * (mom.mean(0) - mom.mean(1));
    v_diff += w * w * (mom.variance(0) + mom.variance(1) - Rational(2) * mom.covariance(0, 1));
    e_ht += w * (mom.mean(2) - mom.mean(3));
    v_ht += w * w * (mom.variance(2) + mom.variance(3) - Rational(2) * mom.covariance(2, 3));
    if (divides) {
      identity_gap_sq += mom.second_moment(0, 0) - Rational(2) * mom.second_moment(0, 2) +
                         mom.second_moment(2, 2);
      identity_gap_sq += mom.second_moment(1, 1) - Rational(2) * mom.second_moment(1, 3) +
                         mom.second_moment(3, 3);
    }
  }

  const Rational delta = sate_true(table, design, s, t);
  const Rational var_diff_formula = var_sate_diff(table, design, s, t);
  const Rational var_ht_formula = var_sate_ht(table, design, s, t);

  if (filter.wants("sate-diff-unbiased")) {
    report.checks.push_back(check_equal("sate-diff-unbiased", pair_tag, e_diff, delta));
  }
  if (filter.wants("var-sate-diff")) {
    report.checks.push_back(check_equal("var-sate-diff", pair_tag, v_diff, var_diff_formula));
  }
  if (filter.wants("sate-ht-unbiased")) {
    report.checks.push_back(check_equal("sate-ht-unbiased", pair_tag, e_ht, delta));
  }
  if (filter.wants("var-sate-ht")) {
    report.checks.push_back(check_equal("var-sate-ht", pair_tag, v_ht, var_ht_formula));
  }

  const Rational star_diff = var_star(table, design, s, t, EstimatorKind::Diff);
  const Rational star_ht = var_star(table, design, s, t, EstimatorKind::HT);
  const bool shift = is_constant_shift(table, design, s, t);

  if (estimable && filter.wants("varhat-sate-diff-expectation")) {
    const auto e_varhat = exact_expectation<Rational>(
        table, design, term_varhat_sate<Rational>(EstimatorKind::Diff, design, s, t), opts.cap);
    report.checks.push_back(
        check_equal("varhat-sate-diff-expectation", pair_tag, e_varhat.expectation, star_diff));
  }
  if (estimable && filter.wants("varhat-sate-ht-expectation")) {
    const auto e_varhat = exact_expectation<Rational>(
        table, design, term_varhat_sate<Rational>(EstimatorKind::HT, design, s, t), opts.cap);
    report.checks.push_back(
        check_equal("varhat-sate-ht-expectation", pair_tag, e_varhat.expectation, star_ht));
  }
  if (filter.wants("conservative-diff")) {
    report.checks.push_back(
        check_bound("conservative-diff", pair_tag, star_diff, var_diff_formula, shift));
  }
  if (filter.wants("conservative-ht")) {
    report.checks.push_back(
        check_bound("conservative-ht", pair_tag, star_ht, var_ht_formula, shift));
  }

  if (divides && filter.wants("divisible-blocks")) {
    report.checks.push_back(check_equal("divisible-blocks", pair_tag + " (per-arm gap)",
                                        identity_gap_sq, Rational(0)));
    report.checks.push_back(check_equal("divisible-blocks", pair_tag + " (variance formulas)",
                                        var_diff_formula, var_ht_formula));
  }

  // Domain-level estimator moments under complete randomization, when the support is
  // small enough.
  if (filter.wants_any({"mean-samp", "var-samp", "cov-samp",
                        "mean-ht", "var-ht", "cov-ht",
                        "sigma2-samp-unbiased", "sigma2-ht-unbiased"})) {
    const BigInt domain_support = count_balanced_assignments(n, r);
    if (domain_support <= BigInt(opts.domain_complete_budget)) {
      std::vector<Statistic<Rational>> stats;
      stats.push_back(stat_mu_samp<Rational>(s));
      stats.push_back(stat_mu_samp<Rational>(t));
      stats.push_back(stat_mu_ht<Rational>(s));
      stats.push_back(stat_mu_ht<Rational>(t));
      const bool domain_estimable = n >= 2 * r;
      if (domain_estimable) {
        stats.push_back(stat_sigma2_samp<Rational>(s));
        stats.push_back(stat_sigma2_ht<Rational>(s));
      }
      const std::vector<std::pair<int, int>> pairs = {{0, 1}, {2, 3}};
      const MomentTable<Rational> mom = exact_moments<Rational>(
          table, design, stats, pairs, RandomizationMode::Complete, opts.cap);
      const std::string where = pair_tag + ", domain (complete)";
      const StratumView domain = StratumView::domain(design);
      const std::vector<Rational> ys = detail::arm_values(table, domain, s);
      const std::vector<Rational> yt = detail::arm_values(table, domain, t);
      const Rational& sig_s = params.sigma2[s - 1];
      const Rational& gam = params.gamma[s - 1][t - 1];
      if (filter.wants("mean-samp")) {
        report.checks.push_back(
            check_equal("mean-samp", where, mom.mean(0), params.mu[s - 1]));
      }
      if (filter.wants("var-samp")) {
        report.checks.push_back(
            check_equal("var-samp", where, mom.variance(0), var_mu_samp(sig_s, n, r)));
      }
      if (filter.wants("cov-samp")) {
        report.checks.push_back(
            check_equal("cov-samp", where, mom.covariance(0, 1), cov_mu_samp(gam, n)));
      }
      if (filter.wants("mean-ht")) {
        report.checks.push_back(
            check_equal("mean-ht", where, mom.mean(2), params.mu[s - 1]));
      }
      if (filter.wants("var-ht")) {
        report.checks.push_back(
            check_equal("var-ht", where, mom.variance(2), var_mu_ht<Rational>(ys, r)));
      }
      if (filter.wants("cov-ht")) {
        report.checks.push_back(check_equal("cov-ht", where, mom.covariance(2, 3),
                                            cov_mu_ht<Rational>(ys, yt, r)));
      }
      if (domain_estimable) {
        if (filter.wants("sigma2-samp-unbiased")) {
          report.checks.push_back(
              check_equal("sigma2-samp-unbiased", where, mom.mean(4), sig_s));
        }
        if (filter.wants("sigma2-ht-unbiased")) {
          report.checks.push_back(check_equal("sigma2-ht-unbiased", where, mom.mean(5), sig_s));
        }
      }
    }
  }
}

}  // namespace detail

/// Certifies every closed-form identity on the corpus, in exact rational
/// arithmetic. Failures are report entries, never exceptions.
inline VerifyReport verify_identities(std::span<const CorpusEntry> corpus,
                                            const VerifyOptions& opts = {}) {
  VerifyReport report;
  const detail::IdentityFilter filter{opts.identity};

  if (filter.wants("assignment-count")) detail::verify_count_identity(report, opts.cap);
  if (filter.wants("replication-distribution")) detail::verify_distnums(report, opts.cap);
  if (filter.wants("indicator-moments")) {
    detail::verify_indicator_moments(report, opts.cap);
  }

  for (const CorpusEntry& entry : corpus) {
    detail::verify_entry_pair(report, entry, 1, 2, filter, opts);
    if (entry.design.num_treatments() >= 3) {
      detail::verify_entry_pair(report, entry, 2, 3, filter, opts);
    }
  }
  return report;
}

inline VerifyReport verify_identities(const std::vector<CorpusEntry>& corpus,
                                            const VerifyOptions& opts = {}) {
  return verify_identities(std::span<const CorpusEntry>(corpus), opts);
}

}  // namespace blockrand
