#include "tracefix/expression.hpp"

#include <cctype>
#include <cstdlib>

namespace tracefix {

namespace {

using boost::multiprecision::cpp_int;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

cpp_int pow10(unsigned exponent) {
  cpp_int out = 1;
  for (unsigned i = 0; i < exponent; ++i) out *= 10;
  return out;
}

enum class Op { add, sub, mul, div, none };

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Rational parse() {
    Rational value = expression();
    skip_space();
    if (pos_ != text_.size()) throw ExpressionError("unexpected character", pos_);
    return value;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool starts_with(std::string_view token) const { return text_.substr(pos_, token.size()) == token; }

  // Additive operators, including U+2212 MINUS SIGN.
  Op peek_additive(std::size_t* width) {
    skip_space();
    if (starts_with("+")) return *width = 1, Op::add;
    if (starts_with("-")) return *width = 1, Op::sub;
    if (starts_with("\xE2\x88\x92")) return *width = 3, Op::sub;
    return Op::none;
  }

  // Multiplicative operators, including U+00D7 and U+00F7.
  Op peek_multiplicative(std::size_t* width) {
    skip_space();
    if (starts_with("*")) return *width = 1, Op::mul;
    if (starts_with("/")) return *width = 1, Op::div;
    if (starts_with("\xC3\x97")) return *width = 2, Op::mul;
    if (starts_with("\xC3\xB7")) return *width = 2, Op::div;
    return Op::none;
  }

  Rational expression() {
    Rational value = term();
    std::size_t width = 0;
    for (Op op = peek_additive(&width); op != Op::none; op = peek_additive(&width)) {
      pos_ += width;
      Rational rhs = term();
      if (op == Op::add)
        value += rhs;
      else
        value -= rhs;
    }
    return value;
  }

  Rational term() {
    Rational value = unary();
    std::size_t width = 0;
    for (Op op = peek_multiplicative(&width); op != Op::none; op = peek_multiplicative(&width)) {
      const std::size_t op_pos = pos_;
      pos_ += width;
      Rational rhs = unary();
      if (op == Op::mul) {
        value *= rhs;
      } else {
        if (rhs == 0) throw DivisionByZero(op_pos);
        value /= rhs;
      }
    }
    return value;
  }

  Rational unary() {
    std::size_t width = 0;
    Op op = peek_additive(&width);
    if (op == Op::sub) {
      pos_ += width;
      return -unary();
    }
    if (op == Op::add) {
      pos_ += width;
      return unary();
    }
    return primary();
  }

  Rational primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ExpressionError("unexpected end of expression", pos_);
    if (text_[pos_] == '(') {
      const std::size_t open = pos_++;
      Rational value = expression();
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != ')') throw ExpressionError("unbalanced parenthesis", open);
      ++pos_;
      return value;
    }
    if (!is_digit(text_[pos_])) throw ExpressionError("expected a number", pos_);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      if (pos_ >= text_.size() || !is_digit(text_[pos_])) throw ExpressionError("malformed number", start);
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_;
    }
    return *parse_decimal(text_.substr(start, pos_ - start));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<Rational> parse_decimal(std::string_view literal) {
  bool negative = false;
  if (!literal.empty() && (literal.front() == '-' || literal.front() == '+')) {
    negative = literal.front() == '-';
    literal.remove_prefix(1);
  }
  if (literal.empty()) return std::nullopt;
  cpp_int digits = 0;
  unsigned fraction_digits = 0;
  bool seen_point = false;
  bool seen_digit = false;
  for (char c : literal) {
    if (c == '.' && !seen_point) {
      seen_point = true;
      continue;
    }
    if (!is_digit(c)) return std::nullopt;
    seen_digit = true;
    digits = digits * 10 + (c - '0');
    if (seen_point) ++fraction_digits;
  }
  if (!seen_digit) return std::nullopt;
  Rational value(digits, pow10(fraction_digits));
  return negative ? Rational(-value) : value;
}

Rational evaluate_expression(std::string_view expr) { return Parser(expr).parse(); }

std::string format_number(const Rational& value) {
  if (boost::multiprecision::denominator(value) == 1) return boost::multiprecision::numerator(value).str();

  constexpr int kSignificant = 15;
  const bool negative = value < 0;
  cpp_int num = boost::multiprecision::abs(boost::multiprecision::numerator(value));
  const cpp_int den = boost::multiprecision::denominator(value);

  // Number of decimal places that leaves kSignificant significant digits.
  int places;
  cpp_int whole = num / den;
  if (whole > 0) {
    places = kSignificant - static_cast<int>(whole.str().size());
  } else {
    int leading_zeros = 0;
    cpp_int probe = num * 10;
    while (probe < den) {
      probe *= 10;
      ++leading_zeros;
    }
    places = kSignificant + leading_zeros;
  }
  if (places < 0) places = 0;

  const cpp_int scaled = (num * pow10(static_cast<unsigned>(places)) * 2 + den) / (den * 2);
  std::string digits = scaled.str();
  if (places > 0) {
    if (digits.size() <= static_cast<std::size_t>(places))
      digits.insert(0, static_cast<std::size_t>(places) + 1 - digits.size(), '0');
    digits.insert(digits.size() - static_cast<std::size_t>(places), ".");
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
  }
  if (negative && digits != "0") digits.insert(0, "-");
  return digits;
}

std::optional<double> extract_number(std::string_view text) {
  std::optional<std::string> last;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::string literal;
    // A '-' directly before the digits is a sign unless it reads as a
    // binary minus (preceded by a digit, letter or closing paren).
    if (i > 0 && text[i - 1] == '-') {
      const bool binary = i > 1 && (std::isalnum(static_cast<unsigned char>(text[i - 2])) || text[i - 2] == ')');
      if (!binary) literal.push_back('-');
    }
    std::size_t j = i;
    while (j < n && is_digit(text[j])) literal.push_back(text[j++]);
    const std::size_t first_group = j - i;
    // Thousands groups: ",ddd" not followed by a fourth digit.
    auto is_group = [&](std::size_t at) {
      return at + 3 < n && text[at] == ',' && is_digit(text[at + 1]) && is_digit(text[at + 2]) &&
             is_digit(text[at + 3]) && !(at + 4 < n && is_digit(text[at + 4]));
    };
    if (first_group <= 3) {
      while (is_group(j)) {
        literal.append(text.substr(j + 1, 3));
        j += 4;
      }
    }
    if (j + 1 < n && text[j] == '.' && is_digit(text[j + 1])) {
      literal.push_back('.');
      ++j;
      while (j < n && is_digit(text[j])) literal.push_back(text[j++]);
    }
    last = std::move(literal);
    i = j;
  }
  if (!last) return std::nullopt;
  return std::strtod(last->c_str(), nullptr);
}

}  // namespace tracefix
