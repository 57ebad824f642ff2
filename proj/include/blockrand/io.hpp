#pragma once

#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockrand/design.hpp"
#include "blockrand/errors.hpp"
#include "blockrand/fields.hpp"
#include "blockrand/outcomes.hpp"
#include "blockrand/verify.hpp"

namespace blockrand {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return doc;
}

namespace detail {

inline void require_object(const Json& value, const std::string& where) {
  if (!value.is_object()) throw ParseError(where + ": expected a JSON object");
}

inline const Json& require_key(const Json& object, const std::string& key,
                               const std::string& where) {
  const auto it = object.find(key);
  if (it == object.end()) throw ParseError(where + ": missing required field '" + key + "'");
  return *it;
}

inline void reject_unknown_keys(const Json& object, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, value] : object.items()) {
    bool ok = false;
    for (const char* candidate : known) ok = ok || key == candidate;
    if (!ok) throw ParseError(where + ": unknown field '" + key + "'");
  }
}

inline int require_int(const Json& value, const std::string& where) {
  if (!value.is_number_integer()) throw ParseError(where + ": expected an integer");
  return value.get<int>();
}

}  // namespace detail

// --------------------------------------------------------------------------
// Design JSON: {"r": int, "block_sizes": [int, ...]}
// --------------------------------------------------------------------------

inline BlockDesign parse_design_json(const Json& doc, const std::string& where = "design") {
  detail::require_object(doc, where);
  detail::reject_unknown_keys(doc, {"r", "block_sizes"}, where);
  const int r = detail::require_int(detail::require_key(doc, "r", where), where + ".r");
  const Json& sizes = detail::require_key(doc, "block_sizes", where);
  if (!sizes.is_array() || sizes.empty()) {
    throw ParseError(where + ".block_sizes: expected a non-empty array");
  }
  std::vector<int> block_sizes;
  block_sizes.reserve(sizes.size());
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    block_sizes.push_back(
        detail::require_int(sizes[c], where + ".block_sizes[" + std::to_string(c) + "]"));
  }
  try {
    return BlockDesign(r, std::move(block_sizes));
  } catch (const DesignError& e) {
    throw ParseError(where + ": " + e.what());
  }
}

inline Json design_to_json(const BlockDesign& design) {
  Json doc;
  doc["r"] = design.num_treatments();
  doc["block_sizes"] = design.block_sizes();
  return doc;
}

// --------------------------------------------------------------------------
// Table JSON: {"blocks": [{"units": [[y_1, ..., y_r], ...]}, ...]}
//
// Cells are JSON integers (exact in both modes), JSON floats (double mode
// only), or strings holding a decimal or p/q literal (exact). Rational mode
// rejects float-typed cells: their text form has already been rounded.
// --------------------------------------------------------------------------

namespace detail {

template <Field F>
F parse_cell(const Json& value, const std::string& where);

template <>
inline double parse_cell<double>(const Json& value, const std::string& where) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    try {
      return field_traits<Rational>::to_double(rational_from_literal(value.get<std::string>()));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  throw ParseError(where + ": expected a number or a rational string");
}

template <>
inline Rational parse_cell<Rational>(const Json& value, const std::string& where) {
  if (value.is_number_integer()) return Rational(value.get<long long>());
  if (value.is_string()) {
    try {
      return rational_from_literal(value.get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (value.is_number_float()) {
    throw ParseError(where +
                     ": rational mode requires integer or string cells (float literals are "
                     "not exact)");
  }
  throw ParseError(where + ": expected a number or a rational string");
}

}  // namespace detail

template <Field F>
PotentialOutcomeTable<F> parse_table_json(const Json& doc, const std::string& where = "table") {
  detail::require_object(doc, where);
  detail::reject_unknown_keys(doc, {"blocks"}, where);
  const Json& blocks = detail::require_key(doc, "blocks", where);
  if (!blocks.is_array() || blocks.empty()) {
    throw ParseError(where + ".blocks: expected a non-empty array");
  }
  std::vector<std::vector<F>> rows;
  int r = -1;
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    const std::string block_where = where + ".blocks[" + std::to_string(c) + "]";
    detail::require_object(blocks[c], block_where);
    detail::reject_unknown_keys(blocks[c], {"units"}, block_where);
    const Json& units = detail::require_key(blocks[c], "units", block_where);
    if (!units.is_array() || units.empty()) {
      throw ParseError(block_where + ".units: expected a non-empty array");
    }
    for (std::size_t k = 0; k < units.size(); ++k) {
      const std::string unit_where = block_where + ".units[" + std::to_string(k) + "]";
      const Json& cells = units[k];
      if (!cells.is_array()) throw ParseError(unit_where + ": expected an array of outcomes");
      if (r < 0) r = static_cast<int>(cells.size());
      if (static_cast<int>(cells.size()) != r) {
        throw ParseError(unit_where + ": expected " + std::to_string(r) + " outcomes, got " +
                         std::to_string(cells.size()));
      }
      std::vector<F> row;
      row.reserve(cells.size());
      for (std::size_t s = 0; s < cells.size(); ++s) {
        row.push_back(
            detail::parse_cell<F>(cells[s], unit_where + "[" + std::to_string(s) + "]"));
      }
      rows.push_back(std::move(row));
    }
  }
  return PotentialOutcomeTable<F>(r, std::move(rows));
}

/// Block sizes implied by the table document itself (units per block).
inline std::vector<int> table_json_block_sizes(const Json& doc) {
  std::vector<int> sizes;
  const Json& blocks = detail::require_key(doc, "blocks", "table");
  for (const Json& block : blocks) {
    sizes.push_back(static_cast<int>(detail::require_key(block, "units", "table.blocks").size()));
  }
  return sizes;
}

inline Json rational_to_json(const Rational& value) {
  if (boost::multiprecision::denominator(value) == 1) {
    const BigInt num = boost::multiprecision::numerator(value);
    if (num >= std::numeric_limits<long long>::min() &&
        num <= std::numeric_limits<long long>::max()) {
      return Json(num.convert_to<long long>());
    }
  }
  return Json(value.str());
}

template <Field F>
Json table_to_json(const PotentialOutcomeTable<F>& table, const BlockDesign& design) {
  check_conforms(table, design);
  Json blocks = Json::array();
  for (int c = 0; c < design.num_blocks(); ++c) {
    Json units = Json::array();
    for (int k = 0; k < design.block_size(c); ++k) {
      Json row = Json::array();
      for (int s = 1; s <= design.num_treatments(); ++s) {
        const F& value = table.value(design.unit_offset(c) + k, s);
        if constexpr (field_traits<F>::exact) {
          row.push_back(rational_to_json(value));
        } else {
          row.push_back(value);
        }
      }
      units.push_back(std::move(row));
    }
    blocks.push_back(Json{{"units", std::move(units)}});
  }
  return Json{{"blocks", std::move(blocks)}};
}

// --------------------------------------------------------------------------
// CSV formats. Assignment rows: block_id,unit_index,treatment (both ids
// 1-based, unit_index within its block). Study rows add an outcome column.
// Rows are in canonical order (blocks in order, units ascending); LF line
// endings.
// --------------------------------------------------------------------------

inline void write_assignment_csv(std::ostream& out, const BlockDesign& design,
                                 const Assignment& assignment) {
  out << "block_id,unit_index,treatment\n";
  for (int c = 0; c < design.num_blocks(); ++c) {
    for (int k = 0; k < design.block_size(c); ++k) {
      out << (c + 1) << ',' << (k + 1) << ','
          << assignment.labels[design.unit_offset(c) + k] << '\n';
    }
  }
}

template <Field F>
void write_study_csv(std::ostream& out, const ObservedStudy<F>& study) {
  out << "block_id,unit_index,treatment,outcome\n";
  const BlockDesign& design = study.design;
  for (int c = 0; c < design.num_blocks(); ++c) {
    for (int k = 0; k < design.block_size(c); ++k) {
      const int u = design.unit_offset(c) + k;
      out << (c + 1) << ',' << (k + 1) << ',' << study.assignment.labels[u] << ',';
      if constexpr (field_traits<F>::exact) {
        out << study.responses[u].str();
      } else {
        out << study.responses[u];
      }
      out << '\n';
    }
  }
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

inline int parse_csv_int(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw ParseError(where + ": expected an integer, got '" + text + "'");
  }
}

struct CsvRows {
  std::vector<std::vector<std::string>> rows;
  bool has_outcome = false;
};

inline CsvRows read_csv(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(what + ": empty file");
  const std::vector<std::string> header = split_csv_row(line);
  CsvRows out;
  if (header == std::vector<std::string>{"block_id", "unit_index", "treatment"}) {
    out.has_outcome = false;
  } else if (header ==
             std::vector<std::string>{"block_id", "unit_index", "treatment", "outcome"}) {
    out.has_outcome = true;
  } else {
    throw ParseError(what + ": bad header '" + line +
                     "' (expected block_id,unit_index,treatment[,outcome])");
  }
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() && in.eof()) break;
    std::vector<std::string> fields = split_csv_row(line);
    const std::size_t expected = out.has_outcome ? 4 : 3;
    if (fields.size() != expected) {
      throw ParseError(what + " row " + std::to_string(row_number) + ": expected " +
                       std::to_string(expected) + " fields, got " +
                       std::to_string(fields.size()));
    }
    out.rows.push_back(std::move(fields));
  }
  return out;
}

// Validates canonical row order against the design and extracts labels.
inline Assignment rows_to_assignment(const CsvRows& csv, const BlockDesign& design,
                                     const std::string& what) {
  if (static_cast<int>(csv.rows.size()) != design.total_units()) {
    throw ParseError(what + ": has " + std::to_string(csv.rows.size()) + " rows, design has " +
                     std::to_string(design.total_units()) + " units");
  }
  Assignment assignment;
  assignment.labels.resize(design.total_units());
  int row_index = 0;
  for (int c = 0; c < design.num_blocks(); ++c) {
    for (int k = 0; k < design.block_size(c); ++k, ++row_index) {
      const auto& fields = csv.rows[row_index];
      const std::string where = what + " row " + std::to_string(row_index + 2);
      const int block_id = parse_csv_int(fields[0], where + " block_id");
      const int unit_index = parse_csv_int(fields[1], where + " unit_index");
      const int treatment = parse_csv_int(fields[2], where + " treatment");
      if (block_id != c + 1 || unit_index != k + 1) {
        throw ParseError(where + ": expected block_id=" + std::to_string(c + 1) +
                         " unit_index=" + std::to_string(k + 1) + ", got " +
                         std::to_string(block_id) + "," + std::to_string(unit_index));
      }
      if (treatment < 1 || treatment > design.num_treatments()) {
        throw ParseError(where + ": treatment " + std::to_string(treatment) + " outside 1.." +
                         std::to_string(design.num_treatments()));
      }
      assignment.labels[row_index] = treatment;
    }
  }
  return assignment;
}

// Outcomes are decimal or p/q literals in both modes; double mode converts
// the exact value.
template <Field F>
F parse_outcome(const std::string& text, const std::string& where) {
  try {
    const Rational value = rational_from_literal(text);
    if constexpr (field_traits<F>::exact) {
      return value;
    } else {
      return field_traits<Rational>::to_double(value);
    }
  } catch (const std::exception&) {
    throw ParseError(where + ": bad outcome '" + text + "'");
  }
}

}  // namespace detail

inline Assignment read_assignment_csv(std::istream& in, const BlockDesign& design,
                                      const std::string& what = "assignment csv") {
  const detail::CsvRows csv = detail::read_csv(in, what);
  if (csv.has_outcome) {
    throw ParseError(what + ": unexpected outcome column in an assignment file");
  }
  return detail::rows_to_assignment(csv, design, what);
}

/// Reads a 4-column study CSV into an ObservedStudy.
template <Field F>
ObservedStudy<F> read_study_csv(std::istream& in, const BlockDesign& design,
                                const std::string& what = "study csv") {
  const detail::CsvRows csv = detail::read_csv(in, what);
  if (!csv.has_outcome) {
    throw ParseError(what + ": missing outcome column (or pass a potential-outcome table)");
  }
  ObservedStudy<F> study{design, detail::rows_to_assignment(csv, design, what), {}};
  study.responses.reserve(csv.rows.size());
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    study.responses.push_back(detail::parse_outcome<F>(
        csv.rows[i][3], what + " row " + std::to_string(i + 2) + " outcome"));
  }
  return study;
}

// --------------------------------------------------------------------------
// Corpus JSON: {"entries": [{"name": ..., "design": {...}, "table": {...}}]}
// --------------------------------------------------------------------------

inline std::vector<CorpusEntry> parse_corpus_json(const Json& doc) {
  detail::require_object(doc, "corpus");
  detail::reject_unknown_keys(doc, {"entries"}, "corpus");
  const Json& entries = detail::require_key(doc, "entries", "corpus");
  if (!entries.is_array() || entries.empty()) {
    throw ParseError("corpus.entries: expected a non-empty array");
  }
  std::vector<CorpusEntry> corpus;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string where = "corpus.entries[" + std::to_string(i) + "]";
    detail::require_object(entries[i], where);
    detail::reject_unknown_keys(entries[i], {"name", "design", "table"}, where);
    const Json& name = detail::require_key(entries[i], "name", where);
    if (!name.is_string()) throw ParseError(where + ".name: expected a string");
    BlockDesign design =
        parse_design_json(detail::require_key(entries[i], "design", where), where + ".design");
    PotentialOutcomeTable<Rational> table = parse_table_json<Rational>(
        detail::require_key(entries[i], "table", where), where + ".table");
    check_conforms(table, design);
    corpus.push_back(
        {name.get<std::string>(), "custom", std::move(design), std::move(table)});
  }
  return corpus;
}

}  // namespace blockrand
