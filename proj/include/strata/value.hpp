#pragma once

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace strata {

/// Decimal number with 50 significant digits. Sums of short decimal
/// literals are exact, so currency columns never drift.
class Number {
 public:
  using Rep = boost::multiprecision::cpp_dec_float_50;

  Number() = default;
  Number(int v) : rep_(v) {}  // NOLINT(google-explicit-constructor)
  explicit Number(long long v) : rep_(v) {}
  explicit Number(Rep rep) : rep_(std::move(rep)) {}

  /// Parses a plain decimal literal: optional sign, digits, optional
  /// fraction and exponent. Rejects anything else (no locale, no "inf").
  static std::optional<Number> parse(std::string_view text);

  /// Exact decimal for the shortest text that round-trips `v`.
  static Number from_double(double v);

  /// Canonical rendering: at most 20 significant digits, no trailing
  /// zeros, fixed notation for exponents in [-7, 20], otherwise `1.5e+25`.
  [[nodiscard]] std::string to_string() const;

  /// Fixed notation with exactly `decimals` fraction digits, rounding
  /// half-even first.
  [[nodiscard]] std::string to_fixed(int decimals) const;

  [[nodiscard]] double to_double() const;
  [[nodiscard]] const Rep& rep() const { return rep_; }

  [[nodiscard]] bool is_zero() const { return rep_.is_zero(); }
  [[nodiscard]] bool is_integer() const;
  [[nodiscard]] bool is_finite() const;

  [[nodiscard]] Number round_half_even(int decimals) const;

  friend Number operator+(const Number& a, const Number& b) { return Number(Rep(a.rep_ + b.rep_)); }
  friend Number operator-(const Number& a, const Number& b) { return Number(Rep(a.rep_ - b.rep_)); }
  friend Number operator*(const Number& a, const Number& b) { return Number(Rep(a.rep_ * b.rep_)); }
  /// Caller checks for a zero divisor.
  friend Number operator/(const Number& a, const Number& b) { return Number(Rep(a.rep_ / b.rep_)); }
  Number operator-() const { return Number(Rep(-rep_)); }
  Number& operator+=(const Number& o) {
    rep_ += o.rep_;
    return *this;
  }

  friend bool operator==(const Number& a, const Number& b) { return a.rep_ == b.rep_; }
  friend std::partial_ordering operator<=>(const Number& a, const Number& b) {
    if (a.rep_ < b.rep_) return std::partial_ordering::less;
    if (a.rep_ > b.rep_) return std::partial_ordering::greater;
    if (a.rep_ == b.rep_) return std::partial_ordering::equivalent;
    return std::partial_ordering::unordered;
  }

 private:
  Rep rep_{0};
};

enum class ErrorCode { Parse, Ref, Type, Div0, Cycle, NoMatch, Multi };

/// "#PARSE", "#REF", ...
std::string_view error_code_name(ErrorCode code);
std::optional<ErrorCode> error_code_from_name(std::string_view name);

struct Empty {
  friend bool operator==(Empty, Empty) { return true; }
};

struct Error {
  ErrorCode code;
  friend bool operator==(Error, Error) = default;
};

/// Cell payload.
class Value {
 public:
  using Storage = std::variant<Empty, Number, std::string, bool, Error>;

  Value() = default;
  Value(Empty) {}                                       // NOLINT
  Value(Number n) : v_(std::move(n)) {}                 // NOLINT
  Value(std::string s) : v_(std::move(s)) {}            // NOLINT
  Value(const char* s) : v_(std::string(s)) {}          // NOLINT
  Value(bool b) : v_(b) {}                              // NOLINT
  Value(ErrorCode c) : v_(Error{c}) {}                  // NOLINT
  Value(int n) : v_(Number(n)) {}                       // NOLINT

  /// Interprets user-typed text: "" is Empty, TRUE/FALSE (any case) are
  /// booleans, decimal literals are numbers, everything else is text.
  static Value from_literal(std::string_view text);

  [[nodiscard]] bool is_empty() const { return std::holds_alternative<Empty>(v_); }
  [[nodiscard]] bool is_number() const { return std::holds_alternative<Number>(v_); }
  [[nodiscard]] bool is_text() const { return std::holds_alternative<std::string>(v_); }
  [[nodiscard]] bool is_bool() const { return std::holds_alternative<bool>(v_); }
  [[nodiscard]] bool is_error() const { return std::holds_alternative<Error>(v_); }

  [[nodiscard]] const Number& number() const { return std::get<Number>(v_); }
  [[nodiscard]] const std::string& text() const { return std::get<std::string>(v_); }
  [[nodiscard]] bool boolean() const { return std::get<bool>(v_); }
  [[nodiscard]] ErrorCode error() const { return std::get<Error>(v_).code; }

  [[nodiscard]] const Storage& storage() const { return v_; }

  /// Canonical, locale-free text: numbers per Number::to_string, booleans
  /// TRUE/FALSE, errors by code name, Empty as "".
  [[nodiscard]] std::string to_string() const;

  /// "empty", "number", "text", "boolean", "error"
  [[nodiscard]] std::string_view type_name() const;

  /// Exact equality; text compares case-sensitively.
  friend bool operator==(const Value& a, const Value& b) { return a.v_ == b.v_; }

 private:
  Storage v_;
};

/// Per-field display format. Descriptors: "general", "fixed-Ndp",
/// "currency-Ndp" (pound sign, thousands separators), "percent-Ndp".
class DisplayFormat {
 public:
  enum class Kind { General, Fixed, Currency, Percent };

  DisplayFormat() = default;
  static std::optional<DisplayFormat> parse(std::string_view descriptor);

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] int decimals() const { return decimals_; }
  [[nodiscard]] std::string descriptor() const;
  [[nodiscard]] bool is_general() const { return kind_ == Kind::General; }

  /// Non-numbers render as Value::to_string.
  [[nodiscard]] std::string render(const Value& v) const;

  friend bool operator==(const DisplayFormat&, const DisplayFormat&) = default;

 private:
  Kind kind_ = Kind::General;
  int decimals_ = 0;
};

}  // namespace strata
