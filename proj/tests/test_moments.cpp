#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "blockrand/moments.hpp"
#include "blockrand/oracle.hpp"
#include "blockrand/rng.hpp"

using namespace blockrand;

TEST_CASE("var_mu_samp", "[moments]") {
  CHECK(var_mu_samp(Rational(2, 3), 3, 2) == Rational(5, 12));
  SECTION("z = 0: reduces to (r-1)/(n-1) sigma^2") {
    CHECK(var_mu_samp(Rational(7), 6, 2) == Rational(7, 5));
    CHECK(var_mu_samp(Rational(3), 6, 3) == Rational(6, 5));
  }
  CHECK(var_mu_samp(Rational(0), 5, 2) == Rational(0));
  CHECK_THROWS_AS(var_mu_samp(Rational(1), 2, 3), DesignError);
}

TEST_CASE("cov_mu_samp", "[moments]") {
  CHECK(cov_mu_samp(0.25, 3) == -0.125);
  CHECK(cov_mu_samp(Rational(0), 4) == Rational(0));
  CHECK(cov_mu_samp(Rational(-1, 4), 3) == Rational(1, 8));  // sign flips with gamma
}

TEST_CASE("var_mu_ht", "[moments]") {
  const std::vector<Rational> y123 = {Rational(1), Rational(2), Rational(3)};
  CHECK(var_mu_ht<Rational>(y123, 2) == Rational(20, 27));
  SECTION("z = 0: reduces to (r-1)/(m-1) sigma^2") {
    const std::vector<Rational> y = {Rational(1), Rational(2), Rational(3), Rational(4)};
    CHECK(var_mu_ht<Rational>(y, 2) == Rational(1, 3) * Rational(5, 4));
  }
  SECTION("all-zero arm: 0") {
    const std::vector<Rational> zero(5, Rational(0));
    CHECK(var_mu_ht<Rational>(zero, 2) == Rational(0));
  }
}

TEST_CASE("cov_mu_ht", "[moments]") {
  SECTION("z = 0: reduces to -gamma/(m-1)") {
    const std::vector<Rational> ys = {Rational(1), Rational(2), Rational(3), Rational(4)};
    const std::vector<Rational> yt = {Rational(2), Rational(1), Rational(4), Rational(0)};
    CHECK(cov_mu_ht<Rational>(ys, yt, 2) ==
          -detail::pop_covariance<Rational>(ys, yt) / Rational(3));
  }
  SECTION("m=3, r=2: matches the oracle exactly") {
    const PotentialOutcomeTable<Rational> table(
        2, {{Rational(1), Rational(4)}, {Rational(2), Rational(0)}, {Rational(5), Rational(2)}});
    const BlockDesign d(2, {3});
    const Rational oracle = exact_covariance<Rational>(table, d, stat_mu_ht<Rational>(1),
                                                       stat_mu_ht<Rational>(2));
    const std::vector<Rational> ys = {Rational(1), Rational(2), Rational(5)};
    const std::vector<Rational> yt = {Rational(4), Rational(0), Rational(2)};
    CHECK(oracle == cov_mu_ht<Rational>(ys, yt, 2));
  }
  SECTION("zero arm: 0") {
    const std::vector<Rational> ys = {Rational(1), Rational(2), Rational(3)};
    const std::vector<Rational> yt(3, Rational(0));
    CHECK(cov_mu_ht<Rational>(ys, yt, 2) == Rational(0));
  }
  SECTION("symmetric in (s, t)") {
    const std::vector<Rational> ys = {Rational(1), Rational(-2), Rational(3), Rational(0),
                                      Rational(2)};
    const std::vector<Rational> yt = {Rational(4), Rational(0), Rational(2), Rational(-1),
                                      Rational(1)};
    CHECK(cov_mu_ht<Rational>(ys, yt, 3) == cov_mu_ht<Rational>(yt, ys, 3));
  }
}

TEST_CASE("var_sate_diff", "[moments]") {
  SECTION("single block (2), y_s=(1,2), y_t=(3,4): 1") {
    const PotentialOutcomeTable<Rational> table(
        2, {{Rational(1), Rational(3)}, {Rational(2), Rational(4)}});
    CHECK(var_sate_diff(table, BlockDesign(2, {2}), 1, 2) == Rational(1));
  }
  SECTION("constant table: 0") {
    const PotentialOutcomeTable<Rational> table(
        2, std::vector<std::vector<Rational>>(4, {Rational(3), Rational(3)}));
    CHECK(var_sate_diff(table, BlockDesign(2, {4}), 1, 2) == Rational(0));
  }
  SECTION("blocks (3,4), r=2: equals the oracle exactly") {
    const BlockDesign d(2, {3, 4});
    SplitRng rng(5);
    std::vector<std::vector<Rational>> rows;
    for (int u = 0; u < 7; ++u) {
      rows.push_back({Rational(static_cast<int>(rng.below(11)) - 5),
                      Rational(static_cast<int>(rng.below(11)) - 5)});
    }
    const PotentialOutcomeTable<Rational> table(2, rows);
    const auto oracle = exact_expectation<Rational>(table, d, stat_sate_diff<Rational>(1, 2));
    CHECK(oracle.variance == var_sate_diff(table, d, 1, 2));
  }
}

TEST_CASE("var_sate_ht", "[moments]") {
  SECTION("z_c = 0 everywhere: equals var_sate_diff") {
    const BlockDesign d(2, {4, 6});
    SplitRng rng(6);
    std::vector<std::vector<Rational>> rows;
    for (int u = 0; u < 10; ++u) {
      rows.push_back({Rational(static_cast<int>(rng.below(11)) - 5),
                      Rational(static_cast<int>(rng.below(11)) - 5)});
    }
    const PotentialOutcomeTable<Rational> table(2, rows);
    CHECK(var_sate_ht(table, d, 1, 2) == var_sate_diff(table, d, 1, 2));
  }
  SECTION("block (3), r=2: equals the oracle exactly") {
    const BlockDesign d(2, {3});
    const PotentialOutcomeTable<Rational> table(
        2, {{Rational(1), Rational(0)}, {Rational(4), Rational(2)}, {Rational(2), Rational(5)}});
    const auto oracle = exact_expectation<Rational>(table, d, stat_sate_ht<Rational>(1, 2));
    CHECK(oracle.variance == var_sate_ht(table, d, 1, 2));
  }
  SECTION("y_t = 0, y_s = (1,2,3): Var = Var(mu_hat_HT) = 20/27") {
    const BlockDesign d(2, {3});
    const PotentialOutcomeTable<Rational> table(
        2, {{Rational(1), Rational(0)}, {Rational(2), Rational(0)}, {Rational(3), Rational(0)}});
    CHECK(var_sate_ht(table, d, 1, 2) == Rational(20, 27));
  }
}

TEST_CASE("var_star", "[moments]") {
  SECTION("y_s=(0,2), y_t=(0,0), block (2), r=2: Var*_diff=2, Var_diff=1") {
    const PotentialOutcomeTable<Rational> table(
        2, {{Rational(0), Rational(0)}, {Rational(2), Rational(0)}});
    const BlockDesign d(2, {2});
    CHECK(var_star(table, d, 1, 2, EstimatorKind::Diff) == Rational(2));
    CHECK(var_sate_diff(table, d, 1, 2) == Rational(1));
  }
  SECTION("constant-shift table: Var* = Var for both kinds") {
    const BlockDesign d(2, {3, 4});
    std::vector<std::vector<Rational>> rows;
    for (int u = 0; u < 7; ++u) rows.push_back({Rational(u * u), Rational(u * u + 2)});
    const PotentialOutcomeTable<Rational> table(2, rows);
    REQUIRE(is_constant_shift(table, d, 1, 2));
    CHECK(var_star(table, d, 1, 2, EstimatorKind::Diff) == var_sate_diff(table, d, 1, 2));
    CHECK(var_star(table, d, 1, 2, EstimatorKind::HT) == var_sate_ht(table, d, 1, 2));
  }
  SECTION("Var* equals the oracle expectation of varhat for n_c >= 2r designs") {
    const BlockDesign d(2, {4, 5});
    std::vector<std::vector<Rational>> rows;
    for (int u = 0; u < 9; ++u) {
      rows.push_back({Rational((3 * u) % 7 - 3), Rational((5 * u) % 4)});
    }
    const PotentialOutcomeTable<Rational> table(2, rows);
    for (const EstimatorKind kind : {EstimatorKind::Diff, EstimatorKind::HT}) {
      const auto oracle = exact_expectation<Rational>(
          table, d, term_varhat_sate<Rational>(kind, d, 1, 2));
      CHECK(oracle.expectation == var_star(table, d, 1, 2, kind));
    }
  }
}

TEST_CASE("is_constant_shift", "[moments]") {
  const BlockDesign d(2, {2, 2});
  const PotentialOutcomeTable<Rational> shifted(
      2, {{Rational(1), Rational(3)}, {Rational(5), Rational(7)},
          {Rational(0), Rational(-1)}, {Rational(2), Rational(1)}});
  CHECK(is_constant_shift(shifted, d, 1, 2));  // shifts differ per block but are constant within
  const PotentialOutcomeTable<Rational> skewed(
      2, {{Rational(1), Rational(3)}, {Rational(5), Rational(6)},
          {Rational(0), Rational(-1)}, {Rational(2), Rational(1)}});
  CHECK_FALSE(is_constant_shift(skewed, d, 1, 2));
}

TEST_CASE("indicator moments", "[moments]") {
  SECTION("m=3, r=2 closed forms") {
    const auto moments = indicator_moments<Rational>(3, 2);
    CHECK(moments.inv_count == Rational(3, 4));       // 0.75
    CHECK(moments.count_pair == Rational(2));         // counts always (2,1)
    CHECK(moments.joint_same == Rational(1, 6));
    CHECK(moments.count_mean == Rational(3, 2));
    CHECK(moments.count_second == Rational(5, 2));    // (3/2)^2 + 1/4
  }
  SECTION("matches enumeration on a subset of the grid") {
    for (int r = 2; r <= 3; ++r) {
      for (int m = r; m <= 6; ++m) {
        BigInt total = 0, count_sum = 0, pair_sum = 0;
        Rational inv_sum = 0;
        enumerate_complete(m, r, [&](const Assignment& a) {
          ++total;
          int cs = 0, ct = 0;
          for (int label : a.labels) {
            cs += label == 1;
            ct += label == 2;
          }
          count_sum += cs;
          pair_sum += cs * ct;
          inv_sum += Rational(1, cs);
        });
        const auto closed = indicator_moments<Rational>(m, r);
        CHECK(Rational(count_sum) / Rational(total) == closed.count_mean);
        CHECK(Rational(pair_sum) / Rational(total) == closed.count_pair);
        CHECK(inv_sum / Rational(total) == closed.inv_count);
      }
    }
  }
  CHECK_THROWS_AS(indicator_moments<Rational>(2, 3), DesignError);
  CHECK_THROWS_AS(indicator_moments<Rational>(4, 1), DesignError);
}

TEST_CASE("cross-sum expectation closed form matches the oracle", "[moments]") {
  const BlockDesign d(2, {5});
  const PotentialOutcomeTable<Rational> table(
      2, {{Rational(1), Rational(2)}, {Rational(-1), Rational(3)}, {Rational(4), Rational(0)},
          {Rational(2), Rational(2)}, {Rational(0), Rational(1)}});
  // statistic: the full cross term of varhat_sate_ht for this block
  const int nc = 5, r = 2, zc = 1;
  const Rational coeff = Rational(2 * r * r * zc * (r - zc)) /
                         (Rational(nc) * nc * nc * nc * (r - 1) - Rational(nc) * nc * zc * (r - zc));
  const Statistic<Rational> cross{
      "cross term", [&](const ObservedStudy<Rational>& study) {
        return Rational(coeff *
                        observed_cross_pair_sum(study, StratumView::domain(study.design), 1, 2));
      }};
  const auto oracle = exact_expectation<Rational>(table, d, cross);
  CHECK(oracle.expectation == cross_sum_expectation(table, d, 0, 1, 2));
}

TEST_CASE("theoretical moment bundles", "[moments]") {
  const BlockDesign d(3, {5});
  SplitRng rng(23);
  std::vector<std::vector<Rational>> rows;
  for (int u = 0; u < 5; ++u) {
    rows.push_back({Rational(static_cast<int>(rng.below(11)) - 5),
                    Rational(static_cast<int>(rng.below(11)) - 5),
                    Rational(static_cast<int>(rng.below(11)) - 5)});
  }
  const PotentialOutcomeTable<Rational> table(3, rows);
  const StratumView domain = StratumView::domain(d);

  for (const EstimatorKind kind : {EstimatorKind::Diff, EstimatorKind::HT}) {
    const auto moments = mu_hat_moments(table, domain, 2, kind);
    CHECK(moments.mean == population_params(table, d).mu[1]);
    CHECK(moments.variance == moments.covariances[1][1]);
    CHECK(moments.variance >= Rational(0));
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        CHECK(moments.covariances[a][b] == moments.covariances[b][a]);
      }
    }
    // matches the oracle covariance of the corresponding estimators
    const auto stat_a = kind == EstimatorKind::Diff ? stat_mu_samp<Rational>(1)
                                                    : stat_mu_ht<Rational>(1);
    const auto stat_b = kind == EstimatorKind::Diff ? stat_mu_samp<Rational>(3)
                                                    : stat_mu_ht<Rational>(3);
    CHECK(exact_covariance<Rational>(table, d, stat_a, stat_b) == moments.covariances[0][2]);
  }

  const auto sate = sate_moments(table, d, 1, 3, EstimatorKind::HT);
  CHECK(sate.mean == sate_true(table, d, 1, 3));
  CHECK(sate.variance == var_sate_ht(table, d, 1, 3));
  CHECK(sate.source == "sate-ht-moments");
  CHECK(mu_hat_moments(table, domain, 1, EstimatorKind::Diff).source == "mu-samp-moments");
}

TEST_CASE("gamma matrices are symmetric", "[moments]") {
  const BlockDesign d(3, {4, 5});
  SplitRng rng(12);
  std::vector<std::vector<Rational>> rows;
  for (int u = 0; u < 9; ++u) {
    rows.push_back({Rational(static_cast<int>(rng.below(11)) - 5),
                    Rational(static_cast<int>(rng.below(11)) - 5),
                    Rational(static_cast<int>(rng.below(11)) - 5)});
  }
  const PotentialOutcomeTable<Rational> table(3, rows);
  const auto params = population_params(table, d);
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 3; ++t) {
      CHECK(params.gamma[s][t] == params.gamma[t][s]);
      CHECK(params.block_gamma[0][s][t] == params.block_gamma[0][t][s]);
    }
  }
}
