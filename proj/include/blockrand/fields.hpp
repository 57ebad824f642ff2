#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "blockrand/errors.hpp"

namespace blockrand {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// Scalar field the estimator and moment formulas are evaluated over.
/// `double` for everyday use, `Rational` when identities are certified
/// exactly. Formula code never relies on rounding behaviour, so any model
/// of this concept gives algebraically identical results.
template <class F>
concept Field = requires(F a, F b) {
  F(0);
  F(1);
  { a + b } -> std::convertible_to<F>;
  { a - b } -> std::convertible_to<F>;
  { a * b } -> std::convertible_to<F>;
  { a / b } -> std::convertible_to<F>;
  { -a } -> std::convertible_to<F>;
  { a == b } -> std::convertible_to<bool>;
  { a < b } -> std::convertible_to<bool>;
};

template <class F>
struct field_traits;

template <>
struct field_traits<double> {
  static constexpr bool exact = false;
  static constexpr const char* name = "double";
  static double from_int(long long v) { return static_cast<double>(v); }
  static double from_bigint(const BigInt& v) { return v.convert_to<double>(); }
  static double to_double(double v) { return v; }
  static std::string to_string(double v) { return std::to_string(v); }
};

template <>
struct field_traits<Rational> {
  static constexpr bool exact = true;
  static constexpr const char* name = "rational";
  static Rational from_int(long long v) { return Rational(v); }
  static Rational from_bigint(const BigInt& v) { return Rational(v); }
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static std::string to_string(const Rational& v) { return v.str(); }
};

/// num/den as a field value. Denominator must be nonzero; formula
/// preconditions guarantee this everywhere it is used.
template <Field F>
F fr(long long num, long long den) {
  return F(num) / F(den);
}

/// Exact rational value of a decimal literal: [sign] digits [. digits]
/// [e|E [sign] digits]. Every finite decimal is a rational, so this never
/// loses information; anything else (hex floats, inf, nan) is rejected.
inline Rational rational_from_decimal(std::string_view text) {
  const auto fail = [&]() -> Rational {
    throw ParseError("not a decimal rational: '" + std::string(text) + "'");
  };
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    negative = text[i] == '-';
    ++i;
  }
  BigInt digits = 0;
  long long scale = 0;  // power of ten dividing `digits`
  bool any_digit = false;
  for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
    digits = digits * 10 + (text[i] - '0');
    any_digit = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
      digits = digits * 10 + (text[i] - '0');
      ++scale;
      any_digit = true;
    }
  }
  if (!any_digit) return fail();
  long long exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    if (i == text.size()) return fail();
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
      exponent = exponent * 10 + (text[i] - '0');
      if (exponent > 100000) return fail();
    }
    if (exp_negative) exponent = -exponent;
  }
  if (i != text.size()) return fail();

  Rational value(digits);
  long long net = exponent - scale;
  const BigInt ten_pow =
      boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(net < 0 ? -net : net));
  if (net >= 0) {
    value *= Rational(ten_pow);
  } else {
    value /= Rational(ten_pow);
  }
  return negative ? Rational(-value) : value;
}

/// Rational from "p/q" or from a decimal literal.
inline Rational rational_from_literal(std::string_view text) {
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) return rational_from_decimal(text);
  const Rational num = rational_from_decimal(text.substr(0, slash));
  const Rational den = rational_from_decimal(text.substr(slash + 1));
  if (den == 0) throw ParseError("rational literal with zero denominator: '" +
                                 std::string(text) + "'");
  if (boost::multiprecision::denominator(num) != 1 ||
      boost::multiprecision::denominator(den) != 1) {
    throw ParseError("p/q literal must have integer parts: '" + std::string(text) + "'");
  }
  return num / den;
}

}  // namespace blockrand
