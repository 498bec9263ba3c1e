#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

#include "tracefix/error.hpp"

namespace tracefix {

using Rational = boost::multiprecision::cpp_rational;

class ExpressionError : public Error {
 public:
  ExpressionError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class DivisionByZero : public ExpressionError {
 public:
  explicit DivisionByZero(std::size_t position) : ExpressionError("division by zero", position) {}
};

/// Exact evaluation of + - * / with parentheses and unary minus. Accepts
/// the Unicode operators U+2212, U+00D7 and U+00F7. Positions in errors
/// are byte offsets into `expr`.
Rational evaluate_expression(std::string_view expr);

/// Integers print exactly; other values print as decimals rounded to 15
/// significant digits with trailing zeros removed.
std::string format_number(const Rational& value);

/// Exact rational for a plain decimal literal such as "-12.50".
std::optional<Rational> parse_decimal(std::string_view literal);

/// The last numeric literal in `text`, ignoring thousands separators,
/// currency symbols and trailing punctuation.
std::optional<double> extract_number(std::string_view text);

}  // namespace tracefix
