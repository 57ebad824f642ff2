// Acceptance suite: certifies the eight exit criteria and prints one
// PASS/FAIL line per criterion. Exit code = number of failed criteria.

#include <chrono>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "blockrand/design.hpp"
#include "blockrand/montecarlo.hpp"
#include "blockrand/oracle.hpp"
#include "blockrand/stats.hpp"
#include "blockrand/verify.hpp"

using namespace blockrand;

namespace {

struct Criterion {
  int number;
  std::string title;
  bool pass = true;
  std::string detail;

  Criterion(int n, std::string t) : number(n), title(std::move(t)) {}

  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Criterion 1: |enumerate_complete(n,r)| equals the closed-form count for
// all n <= 10, r <= 4 with n >= r; total runtime under 10 s.
Criterion criterion_count_identity() {
  Criterion c{1, "assignment-count identity (n <= 10, r <= 4)"};
  const auto start = std::chrono::steady_clock::now();
  for (int r = 1; r <= 4; ++r) {
    for (int n = r; n <= 10; ++n) {
      BigInt enumerated = 0;
      enumerate_complete(n, r, [&](const Assignment&) { ++enumerated; });
      if (enumerated != count_balanced_assignments(n, r)) {
        c.fail("mismatch at n=" + std::to_string(n) + " r=" + std::to_string(r) + ": " +
               enumerated.str() + " vs " + count_balanced_assignments(n, r).str());
      }
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 10.0) c.fail("runtime " + std::to_string(elapsed) + "s >= 10s");
  c.detail += "runtime " + std::to_string(elapsed) + "s";
  return c;
}

// Shared full-corpus identity run for criteria 2-6.
struct CorpusRun {
  VerifyReport report;
  std::map<std::string, std::pair<int, int>> summary;
  std::vector<CorpusEntry> corpus;
};

CorpusRun run_corpus_identities() {
  CorpusRun run;
  run.corpus = default_corpus();
  run.report = verify_identities(run.corpus);
  run.summary = run.report.by_identity();
  return run;
}

void require_identities(Criterion& c, const CorpusRun& run,
                        std::initializer_list<const char*> identities) {
  for (const char* identity : identities) {
    const auto it = run.summary.find(identity);
    if (it == run.summary.end() || it->second.first == 0) {
      c.fail(std::string(identity) + ": no checks ran");
      continue;
    }
    if (it->second.second != 0) {
      c.fail(std::string(identity) + ": " + std::to_string(it->second.second) + " failures");
    }
  }
}

// Criterion 2: all six indicator-moment closed forms match exact enumeration for
// m <= 8, r <= 4, zero tolerance.
Criterion criterion_indicator_moments(const CorpusRun& run) {
  Criterion c{2, "indicator-moment closed forms (m <= 8, r <= 4, exact)"};
  require_identities(c, run, {"indicator-moments"});
  return c;
}

// Criterion 3: estimator mean/variance/covariance closed forms on the
// default corpus, plus the hand-checkable 5/12 and 20/27 cases.
Criterion criterion_mu_moments(const CorpusRun& run) {
  Criterion c{3, "estimator mean/variance/covariance closed forms (exact rationals)"};
  require_identities(c, run,
                     {"mean-samp", "var-samp", "cov-samp",
                      "mean-ht", "var-ht", "cov-ht"});
  int random_tables = 0;
  for (const CorpusEntry& entry : run.corpus) random_tables += entry.family == "random";
  if (random_tables < 50) {
    c.fail("only " + std::to_string(random_tables) + " random tables in the corpus");
  }

  const BlockDesign hand = BlockDesign::single(3, 2);
  const PotentialOutcomeTable<Rational> table(
      2, {{Rational(1), Rational(1)}, {Rational(2), Rational(2)}, {Rational(3), Rational(3)}});
  const auto samp = exact_expectation<Rational>(table, hand, stat_mu_samp<Rational>(1));
  if (samp.variance != Rational(5, 12)) {
    c.fail("Var(mu_hat_samp) = " + samp.variance.str() + ", want 5/12");
  }
  const auto ht = exact_expectation<Rational>(table, hand, stat_mu_ht<Rational>(1));
  if (ht.variance != Rational(20, 27)) {
    c.fail("Var(mu_hat_ht) = " + ht.variance.str() + ", want 20/27");
  }
  return c;
}

// Criterion 4: variance-estimator unbiasedness on designs with n_c >= 2r.
Criterion criterion_unbiased_variance(const CorpusRun& run) {
  Criterion c{4, "variance-estimator unbiasedness suite (n_c >= 2r, exact)"};
  require_identities(c, run,
                     {"sigma2-samp-unbiased", "sigma2-ht-unbiased", "varhat-mu-samp-unbiased",
                      "varhat-mu-ht-unbiased", "cross-sum-expectation"});
  return c;
}

// Criterion 5: SATE unbiasedness, variance formulas, and the r | n_c identity.
Criterion criterion_sate_moments(const CorpusRun& run) {
  Criterion c{5, "SATE estimator moments and the r-divides identity (exact)"};
  require_identities(c, run, {"sate-diff-unbiased", "var-sate-diff", "sate-ht-unbiased", "var-sate-ht",
                              "divisible-blocks"});
  return c;
}

// Criterion 6: conservativeness of the variance estimators with the exact equality
// condition, strict on at least one unequal-variance fixture.
Criterion criterion_conservative(const CorpusRun& run) {
  Criterion c{6, "conservative variance estimators (exact bound + equality condition)"};
  require_identities(c, run, {"varhat-sate-diff-expectation", "varhat-sate-ht-expectation",
                              "conservative-diff", "conservative-ht"});
  int strict_unequal = 0;
  int equality_shift = 0;
  for (const IdentityCheck& check : run.report.checks) {
    if (check.identity != "conservative-diff" &&
        check.identity != "conservative-ht") {
      continue;
    }
    if (!check.pass) continue;
    if (check.instance.find("unequal-variance") != std::string::npos &&
        check.instance.find("(strict expected)") != std::string::npos) {
      ++strict_unequal;
    }
    if (check.instance.find("constant-shift") != std::string::npos &&
        check.instance.find("(equality expected)") != std::string::npos) {
      ++equality_shift;
    }
  }
  if (strict_unequal == 0) c.fail("no strict unequal-variance fixture certified");
  if (equality_shift == 0) c.fail("no constant-shift equality case certified");
  return c;
}

// Criterion 7: Monte Carlo consistency on an enumerable design; 10^5 draws
// within 4 MC standard errors of the oracle, bit-identical reports for a
// fixed seed, runtime under 30 s.
Criterion criterion_monte_carlo() {
  Criterion c{7, "Monte Carlo consistency (1e5 draws vs oracle, 4 SE)"};
  const auto start = std::chrono::steady_clock::now();
  const BlockDesign design(2, {3, 4});
  const PotentialOutcomeTable<Rational> exact_table(
      2, {{Rational(1), Rational(0)}, {Rational(4), Rational(2)}, {Rational(2), Rational(3)},
          {Rational(0), Rational(1)}, {Rational(3), Rational(3)}, {Rational(5), Rational(0)},
          {Rational(2), Rational(4)}});
  std::vector<std::vector<double>> rows;
  for (const auto& row : exact_table.rows()) {
    rows.push_back({row[0].convert_to<double>(), row[1].convert_to<double>()});
  }
  const PotentialOutcomeTable<double> table(2, rows);

  const std::vector<Statistic<double>> stats = {stat_sate_diff<double>(1, 2),
                                                stat_sate_ht<double>(1, 2)};
  const long long replications = 100000;
  const std::uint64_t seed = 12345;
  const auto first = simulate(table, design, stats, replications, seed);
  const auto second = simulate(table, design, stats, replications, seed);
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].empirical_mean != second[i].empirical_mean ||
        first[i].empirical_variance != second[i].empirical_variance) {
      c.fail(first[i].label + ": same seed did not reproduce bit-identically");
    }
  }

  const OracleResult<Rational> oracles[2] = {
      exact_expectation<Rational>(exact_table, design, stat_sate_diff<Rational>(1, 2)),
      exact_expectation<Rational>(exact_table, design, stat_sate_ht<Rational>(1, 2))};
  for (int i = 0; i < 2; ++i) {
    const double mean = oracles[i].expectation.convert_to<double>();
    const double variance = oracles[i].variance.convert_to<double>();
    if (std::abs(first[i].empirical_mean - mean) > 4 * first[i].mc_standard_error) {
      c.fail(first[i].label + ": mean " + std::to_string(first[i].empirical_mean) +
             " further than 4 SE from oracle " + std::to_string(mean));
    }
    if (std::abs(first[i].empirical_variance - variance) >
        4 * first[i].variance_standard_error) {
      c.fail(first[i].label + ": variance " + std::to_string(first[i].empirical_variance) +
             " further than 4 SE from oracle " + std::to_string(variance));
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 30.0) c.fail("runtime " + std::to_string(elapsed) + "s >= 30s");
  c.detail += "runtime " + std::to_string(elapsed) + "s";
  return c;
}

// Criterion 8: chi-square uniformity of sampled assignments at alpha=0.001
// with 50N draws for (n,r) in {(3,2),(4,2),(5,3)}.
Criterion criterion_uniformity() {
  Criterion c{8, "chi-square uniformity of sampling (alpha = 0.001)"};
  struct Case {
    int n, r;
  };
  for (const Case spec : {Case{3, 2}, Case{4, 2}, Case{5, 3}}) {
    std::map<std::vector<int>, int> index;
    enumerate_complete(spec.n, spec.r, [&](const Assignment& a) {
      const int next = static_cast<int>(index.size());
      index[a.labels] = next;
    });
    const long long categories = static_cast<long long>(index.size());
    std::vector<long long> observed(categories, 0);
    SplitRng rng(2024 + spec.n * 100 + spec.r);
    const long long draws = 50 * categories;
    for (long long i = 0; i < draws; ++i) {
      ++observed[index.at(sample_complete(spec.n, spec.r, rng).labels)];
    }
    const double stat = chi_square_uniform_statistic(observed);
    const double critical = chi_square_quantile(0.999, static_cast<int>(categories - 1));
    if (stat >= critical) {
      c.fail("(" + std::to_string(spec.n) + "," + std::to_string(spec.r) + "): stat " +
             std::to_string(stat) + " >= critical " + std::to_string(critical));
    }
  }
  return c;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria;
  criteria.push_back(criterion_count_identity());

  const CorpusRun run = run_corpus_identities();
  criteria.push_back(criterion_indicator_moments(run));
  criteria.push_back(criterion_mu_moments(run));
  criteria.push_back(criterion_unbiased_variance(run));
  criteria.push_back(criterion_sate_moments(run));
  criteria.push_back(criterion_conservative(run));
  criteria.push_back(criterion_monte_carlo());
  criteria.push_back(criterion_uniformity());

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    failures += criterion.pass ? 0 : 1;
    std::printf("%s  %d. %s%s%s\n", criterion.pass ? "PASS" : "FAIL", criterion.number,
                criterion.title.c_str(), criterion.detail.empty() ? "" : " — ",
                criterion.detail.c_str());
  }
  std::printf("%d/%zu criteria passed (%zu identity checks on %zu corpus entries)\n",
              static_cast<int>(criteria.size()) - failures, criteria.size(),
              run.report.checks.size(), run.corpus.size());
  return failures;
}
