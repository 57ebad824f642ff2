#pragma once

#include <stdexcept>
#include <string>

namespace blockrand {

/// Invalid design parameters (r, block sizes) or mismatched treatment ids.
class DesignError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data whose shape does not conform to the design it is used with.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An estimator evaluated on data where it is undefined (e.g. no unit with
/// treatment s in the stratum, or #T_s < 2 for a sample variance).
class UndefinedEstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Variance estimation requested on a design that does not support it
/// (some block smaller than 2r).
class VarianceUnestimableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration would exceed the configured cap.
class EnumerationCapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (JSON schema violation, bad CSV row, ...).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace blockrand
