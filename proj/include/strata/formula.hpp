#pragma once

// Field-reference formula language.
//
// Formulas name fields, never cell positions: `SUM(Total)`,
// `Quantity*Animals!Price`, `SUM([Sales Summary]!Total)`. The normative
// grammar lives in docs/grammar.ebnf.

#include "strata/value.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace strata {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class UnaryOp { Negate };
enum class BinaryOp { Add, Sub, Mul, Div, Pow, Eq, Ne, Lt, Le, Gt, Ge };
enum class Function { Sum, Count, Avg, Min, Max, If, Round };

std::string_view binary_op_symbol(BinaryOp op);
std::string_view function_name(Function fn);
/// Case-insensitive lookup.
std::optional<Function> function_from_name(std::string_view name);
/// SUM, COUNT, AVG, MIN and MAX consume whole cell sets.
bool is_aggregate(Function fn);

struct NumberLit {
  Number value;  // never negative; negation is a Unary node
};
struct TextLit {
  std::string value;
};
struct BoolLit {
  bool value;
};
struct LocalRef {
  std::string field;
};
struct CrossRef {
  std::string table;
  std::string field;
};
struct Unary {
  UnaryOp op;
  ExprPtr operand;
};
struct Binary {
  BinaryOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct Call {
  Function fn;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<NumberLit, TextLit, BoolLit, LocalRef, CrossRef, Unary, Binary, Call> node;
};

/// Deep structural equality.
bool operator==(const Expr& a, const Expr& b);

ExprPtr make_number(Number v);
ExprPtr make_text(std::string v);
ExprPtr make_bool(bool v);
ExprPtr make_local(std::string field);
ExprPtr make_cross(std::string table, std::string field);
ExprPtr make_unary(UnaryOp op, ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_call(Function fn, std::vector<ExprPtr> args);

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message);
  /// Byte offset into the original formula text.
  [[nodiscard]] std::size_t position() const { return position_; }
  [[nodiscard]] const std::string& detail() const { return detail_; }

 private:
  std::size_t position_;
  std::string detail_;
};

/// Parses formula text; a leading "=" is optional. Throws ParseError.
ExprPtr parse_formula(std::string_view text);

/// Canonical text without the leading "=": minimal parentheses, upper-case
/// function names, brackets only around names that need them.
std::string print_formula(const Expr& e);

/// A name needs `[...]` unless it is a plain identifier that cannot be
/// mistaken for a positional reference or a boolean keyword.
bool needs_brackets(std::string_view name);

struct Reference {
  std::optional<std::string> table;  // set for cross-table references
  std::string field;
  friend bool operator==(const Reference&, const Reference&) = default;
};
using RefList = std::vector<Reference>;

/// Every field reference in left-to-right order, one entry per occurrence.
RefList collect_refs(const Expr& e);

}  // namespace strata
