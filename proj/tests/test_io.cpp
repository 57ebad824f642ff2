#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "blockrand/io.hpp"

using namespace blockrand;

TEST_CASE("design JSON parsing", "[io]") {
  SECTION("well-formed") {
    const Json doc = Json::parse(R"({"r": 2, "block_sizes": [3, 4]})");
    const BlockDesign design = parse_design_json(doc);
    CHECK(design.num_treatments() == 2);
    CHECK(design.block_sizes() == std::vector<int>{3, 4});
    CHECK(parse_design_json(design_to_json(design)) == design);
  }
  SECTION("errors name the offending field") {
    CHECK_THROWS_WITH(parse_design_json(Json::parse(R"({"block_sizes": [3]})")),
                      Catch::Matchers::ContainsSubstring("'r'"));
    CHECK_THROWS_WITH(parse_design_json(Json::parse(R"({"r": 2, "sizes": [3]})")),
                      Catch::Matchers::ContainsSubstring("'sizes'"));
    CHECK_THROWS_WITH(
        parse_design_json(Json::parse(R"({"r": 2, "block_sizes": [3], "extra": 1})")),
        Catch::Matchers::ContainsSubstring("'extra'"));
    CHECK_THROWS_WITH(parse_design_json(Json::parse(R"({"r": 2.5, "block_sizes": [3]})")),
                      Catch::Matchers::ContainsSubstring("integer"));
    CHECK_THROWS_WITH(parse_design_json(Json::parse(R"({"r": 3, "block_sizes": [3, 2]})")),
                      Catch::Matchers::ContainsSubstring("block_sizes[1]"));
  }
}

TEST_CASE("table JSON parsing", "[io]") {
  const char* text = R"({"blocks": [
    {"units": [[1, 2], [3, 4]]},
    {"units": [[5, 6], [7, 8], [9, 10]]}
  ]})";
  SECTION("double mode") {
    const auto table = parse_table_json<double>(Json::parse(text));
    CHECK(table.num_units() == 5);
    CHECK(table.num_treatments() == 2);
    CHECK(table.value(4, 2) == 10.0);
    CHECK(table_json_block_sizes(Json::parse(text)) == std::vector<int>{2, 3});
  }
  SECTION("rational mode keeps integers exact and accepts literals") {
    const auto table = parse_table_json<Rational>(
        Json::parse(R"({"blocks": [{"units": [[1, "1/2"], ["0.25", "-3"]]}]})"));
    CHECK(table.value(0, 2) == Rational(1, 2));
    CHECK(table.value(1, 1) == Rational(1, 4));
    CHECK(table.value(1, 2) == Rational(-3));
  }
  SECTION("rational mode rejects float literals") {
    CHECK_THROWS_WITH(
        parse_table_json<Rational>(Json::parse(R"({"blocks": [{"units": [[0.5, 1]]}]})")),
        Catch::Matchers::ContainsSubstring("rational mode"));
  }
  SECTION("ragged rows are rejected with a location") {
    CHECK_THROWS_WITH(
        parse_table_json<double>(
            Json::parse(R"({"blocks": [{"units": [[1, 2], [3]]}]})")),
        Catch::Matchers::ContainsSubstring("units[1]"));
  }
  SECTION("round trip through table_to_json") {
    const BlockDesign design(2, {2, 3});
    const auto table = parse_table_json<Rational>(Json::parse(text));
    const Json doc = table_to_json(table, design);
    const auto again = parse_table_json<Rational>(doc);
    CHECK(again.rows() == table.rows());
  }
}

TEST_CASE("decimal and p/q literals", "[io][fields]") {
  CHECK(rational_from_decimal("0.5") == Rational(1, 2));
  CHECK(rational_from_decimal("-1.25e1") == Rational(-25, 2));
  CHECK(rational_from_decimal("3") == Rational(3));
  CHECK(rational_from_decimal("2.50") == Rational(5, 2));
  CHECK(rational_from_decimal("1e-3") == Rational(1, 1000));
  CHECK(rational_from_literal("7/4") == Rational(7, 4));
  CHECK(rational_from_literal("-7/4") == Rational(-7, 4));
  CHECK_THROWS_AS(rational_from_decimal("abc"), ParseError);
  CHECK_THROWS_AS(rational_from_decimal(""), ParseError);
  CHECK_THROWS_AS(rational_from_decimal("1.2.3"), ParseError);
  CHECK_THROWS_AS(rational_from_literal("1/0"), ParseError);
  CHECK_THROWS_AS(rational_from_literal("0.5/2"), ParseError);
}

TEST_CASE("assignment CSV round trip", "[io][csv]") {
  const BlockDesign design(2, {2, 3});
  const Assignment assignment{{1, 2, 2, 1, 2}};
  std::ostringstream out;
  write_assignment_csv(out, design, assignment);
  CHECK(out.str() ==
        "block_id,unit_index,treatment\n1,1,1\n1,2,2\n2,1,2\n2,2,1\n2,3,2\n");
  std::istringstream in(out.str());
  CHECK(read_assignment_csv(in, design).labels == assignment.labels);
}

TEST_CASE("assignment CSV validation", "[io][csv]") {
  const BlockDesign design(2, {2});
  SECTION("bad header") {
    std::istringstream in("a,b,c\n1,1,1\n1,2,2\n");
    CHECK_THROWS_WITH(read_assignment_csv(in, design),
                      Catch::Matchers::ContainsSubstring("header"));
  }
  SECTION("wrong canonical order") {
    std::istringstream in("block_id,unit_index,treatment\n1,2,1\n1,1,2\n");
    CHECK_THROWS_WITH(read_assignment_csv(in, design),
                      Catch::Matchers::ContainsSubstring("expected block_id=1 unit_index=1"));
  }
  SECTION("treatment out of range") {
    std::istringstream in("block_id,unit_index,treatment\n1,1,3\n1,2,2\n");
    CHECK_THROWS_WITH(read_assignment_csv(in, design),
                      Catch::Matchers::ContainsSubstring("outside 1..2"));
  }
  SECTION("row count mismatch") {
    std::istringstream in("block_id,unit_index,treatment\n1,1,1\n");
    CHECK_THROWS_AS(read_assignment_csv(in, design), ParseError);
  }
}

TEST_CASE("study CSV round trip", "[io][csv]") {
  const BlockDesign design(2, {3});
  const PotentialOutcomeTable<Rational> table(
      2, {{Rational(1, 2), Rational(0)}, {Rational(2), Rational(1)}, {Rational(3), Rational(5)}});
  const auto study = observe(table, design, Assignment{{1, 1, 2}});
  std::ostringstream out;
  write_study_csv(out, study);
  std::istringstream in(out.str());
  const auto again = read_study_csv<Rational>(in, design);
  CHECK(again.assignment.labels == study.assignment.labels);
  CHECK(again.responses == study.responses);

  SECTION("double mode reads the same file") {
    std::istringstream in2(out.str());
    const auto dbl = read_study_csv<double>(in2, design);
    CHECK(dbl.responses == std::vector<double>{0.5, 2.0, 5.0});
  }
  SECTION("missing outcome column is reported") {
    std::istringstream in3("block_id,unit_index,treatment\n1,1,1\n1,2,1\n1,3,2\n");
    CHECK_THROWS_WITH(read_study_csv<double>(in3, design),
                      Catch::Matchers::ContainsSubstring("outcome"));
  }
}

TEST_CASE("corpus JSON parsing", "[io][corpus]") {
  const char* text = R"({"entries": [{
    "name": "tiny",
    "design": {"r": 2, "block_sizes": [2]},
    "table": {"blocks": [{"units": [[1, 2], [3, 4]]}]}
  }]})";
  const auto corpus = parse_corpus_json(Json::parse(text));
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].name == "tiny");
  CHECK(corpus[0].design.total_units() == 2);
  CHECK(corpus[0].table.value(1, 2) == Rational(4));
  SECTION("table/design mismatch is rejected") {
    const char* bad = R"({"entries": [{
      "name": "bad",
      "design": {"r": 2, "block_sizes": [3]},
      "table": {"blocks": [{"units": [[1, 2], [3, 4]]}]}
    }]})";
    CHECK_THROWS_AS(parse_corpus_json(Json::parse(bad)), ShapeError);
  }
}
