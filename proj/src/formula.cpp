#include "strata/formula.hpp"

#include <array>
#include <cctype>

namespace strata {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// A1, AB12, XFD1048576, R1C1
bool looks_positional(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  if (i >= 1 && i <= 3 && i < s.size()) {
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) ++j;
    if (j == s.size()) return true;
  }
  if (s.size() >= 4 && (s[0] == 'R' || s[0] == 'r')) {
    std::size_t j = 1;
    while (j < s.size() && is_digit(s[j])) ++j;
    if (j > 1 && j < s.size() && (s[j] == 'C' || s[j] == 'c')) {
      std::size_t k = j + 1;
      while (k < s.size() && is_digit(s[k])) ++k;
      if (k > j + 1 && k == s.size()) return true;
    }
  }
  return false;
}

enum class Tok {
  Number,
  String,
  Ident,
  Bracketed,
  Plus,
  Minus,
  Star,
  Slash,
  Caret,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  LParen,
  RParen,
  Comma,
  Bang,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  std::size_t pos;
};

std::string_view describe(Tok t) {
  switch (t) {
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::Ident: return "name";
    case Tok::Bracketed: return "bracketed name";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Caret: return "'^'";
    case Tok::Eq: return "'='";
    case Tok::Ne: return "'<>'";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Bang: return "'!'";
    case Tok::End: return "end of formula";
  }
  return "token";
}

std::vector<Token> tokenize(std::string_view src, std::size_t start) {
  std::vector<Token> out;
  std::size_t i = start;
  const std::size_t n = src.size();
  auto single = [&](Tok k) {
    out.push_back({k, std::string(1, src[i]), i});
    ++i;
  };
  while (i < n) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++i;
      continue;
    }
    if (is_digit(c) || (c == '.' && i + 1 < n && is_digit(src[i + 1]))) {
      const std::size_t b = i;
      while (i < n && is_digit(src[i])) ++i;
      if (i < n && src[i] == '.') {
        ++i;
        while (i < n && is_digit(src[i])) ++i;
      }
      if (i < n && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (src[j] == '+' || src[j] == '-')) ++j;
        if (j < n && is_digit(src[j])) {
          while (j < n && is_digit(src[j])) ++j;
          i = j;
        }
      }
      out.push_back({Tok::Number, std::string(src.substr(b, i - b)), b});
      continue;
    }
    if (is_ident_start(c)) {
      const std::size_t b = i;
      while (i < n && is_ident_char(src[i])) ++i;
      out.push_back({Tok::Ident, std::string(src.substr(b, i - b)), b});
      continue;
    }
    switch (c) {
      case '[': {
        const std::size_t b = i;
        const auto close = src.find(']', i + 1);
        if (close == std::string_view::npos) throw ParseError(b, "unterminated '[' name");
        if (close == i + 1) throw ParseError(b, "empty bracketed name");
        const auto name = src.substr(i + 1, close - i - 1);
        if (name.find('[') != std::string_view::npos) {
          throw ParseError(b + 1 + name.find('['), "'[' inside bracketed name");
        }
        out.push_back({Tok::Bracketed, std::string(name), b});
        i = close + 1;
        break;
      }
      case '"': {
        const std::size_t b = i;
        std::string text;
        ++i;
        bool closed = false;
        while (i < n) {
          if (src[i] == '"') {
            if (i + 1 < n && src[i + 1] == '"') {
              text.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          text.push_back(src[i++]);
        }
        if (!closed) throw ParseError(b, "unterminated string literal");
        out.push_back({Tok::String, std::move(text), b});
        break;
      }
      case '+': single(Tok::Plus); break;
      case '-': single(Tok::Minus); break;
      case '*': single(Tok::Star); break;
      case '/': single(Tok::Slash); break;
      case '^': single(Tok::Caret); break;
      case '=': single(Tok::Eq); break;
      case '(': single(Tok::LParen); break;
      case ')': single(Tok::RParen); break;
      case ',': single(Tok::Comma); break;
      case '!': single(Tok::Bang); break;
      case '<':
        if (i + 1 < n && src[i + 1] == '>') {
          out.push_back({Tok::Ne, "<>", i});
          i += 2;
        } else if (i + 1 < n && src[i + 1] == '=') {
          out.push_back({Tok::Le, "<=", i});
          i += 2;
        } else {
          single(Tok::Lt);
        }
        break;
      case '>':
        if (i + 1 < n && src[i + 1] == '=') {
          out.push_back({Tok::Ge, ">=", i});
          i += 2;
        } else {
          single(Tok::Gt);
        }
        break;
      case ':':
        throw ParseError(i, "':' ranges are not supported; reference fields by name");
      case ';':
        throw ParseError(i, "';' is not an argument separator; use ','");
      default:
        throw ParseError(i, "unexpected character '" + std::string(1, c) + "'");
    }
  }
  out.push_back({Tok::End, "", n});
  return out;
}

// Binding powers. Comparisons are non-associative; ^ is right-associative
// and binds tighter than prefix minus.
constexpr int kCompareBp = 10;
constexpr int kAddBp = 20;
constexpr int kMulBp = 30;
constexpr int kPrefixBp = 40;
constexpr int kPowBp = 50;

std::optional<BinaryOp> infix_op(Tok t) {
  switch (t) {
    case Tok::Plus: return BinaryOp::Add;
    case Tok::Minus: return BinaryOp::Sub;
    case Tok::Star: return BinaryOp::Mul;
    case Tok::Slash: return BinaryOp::Div;
    case Tok::Caret: return BinaryOp::Pow;
    case Tok::Eq: return BinaryOp::Eq;
    case Tok::Ne: return BinaryOp::Ne;
    case Tok::Lt: return BinaryOp::Lt;
    case Tok::Le: return BinaryOp::Le;
    case Tok::Gt: return BinaryOp::Gt;
    case Tok::Ge: return BinaryOp::Ge;
    default: return std::nullopt;
  }
}

int left_bp(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add:
    case BinaryOp::Sub: return kAddBp;
    case BinaryOp::Mul:
    case BinaryOp::Div: return kMulBp;
    case BinaryOp::Pow: return kPowBp;
    default: return kCompareBp;
  }
}

bool is_comparison(BinaryOp op) { return left_bp(op) == kCompareBp; }

struct Arity {
  std::size_t min;
  std::size_t max;
};

Arity arity(Function fn) {
  switch (fn) {
    case Function::If: return {3, 3};
    case Function::Round: return {2, 2};
    default: return {1, 255};
  }
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  ExprPtr parse() {
    ExprPtr e = expression(0);
    if (peek().kind != Tok::End) fail_expected("operator or end of formula");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& advance() { return toks_[pos_++]; }

  [[noreturn]] void fail_expected(std::string_view what) const {
    const Token& t = peek();
    std::string found = t.kind == Tok::End ? std::string(describe(t.kind))
                                           : std::string(describe(t.kind)) + " '" + t.text + "'";
    if (t.kind != Tok::End && t.kind != Tok::Ident && t.kind != Tok::Number &&
        t.kind != Tok::String && t.kind != Tok::Bracketed) {
      found = std::string(describe(t.kind));
    }
    throw ParseError(t.pos, "expected " + std::string(what) + ", found " + found);
  }

  void expect(Tok kind) {
    if (peek().kind != kind) fail_expected(describe(kind));
    ++pos_;
  }

  ExprPtr expression(int min_bp) {
    ExprPtr lhs = prefix();
    bool compared = false;
    for (;;) {
      auto op = infix_op(peek().kind);
      if (!op) break;
      const int lbp = left_bp(*op);
      if (lbp < min_bp) break;
      if (is_comparison(*op)) {
        if (compared) {
          throw ParseError(peek().pos, "comparison operators cannot be chained; add parentheses");
        }
        compared = true;
      }
      advance();
      const int rbp = *op == BinaryOp::Pow ? kPowBp : lbp + 1;
      ExprPtr rhs = expression(rbp);
      lhs = make_binary(*op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  std::string name_token() {
    const Token& t = peek();
    if (t.kind == Tok::Bracketed) {
      advance();
      return t.text;
    }
    if (t.kind == Tok::Ident) {
      check_not_positional(t);
      advance();
      return t.text;
    }
    fail_expected("field name");
  }

  static void check_not_positional(const Token& t) {
    if (looks_positional(t.text)) {
      throw ParseError(t.pos, "positional reference '" + t.text +
                                  "' is not supported; reference fields by name (use [" + t.text +
                                  "] for a field with that name)");
    }
  }

  ExprPtr prefix() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: {
        advance();
        auto n = Number::parse(t.text);
        if (!n) throw ParseError(t.pos, "malformed number '" + t.text + "'");
        return make_number(*n);
      }
      case Tok::String: advance(); return make_text(t.text);
      case Tok::Minus: {
        advance();
        return make_unary(UnaryOp::Negate, expression(kPrefixBp));
      }
      case Tok::LParen: {
        advance();
        ExprPtr inner = expression(0);
        expect(Tok::RParen);
        return inner;
      }
      case Tok::Bracketed: return reference();
      case Tok::Ident: {
        if (toks_[pos_ + 1].kind == Tok::LParen) return call();
        const std::string u = upper(t.text);
        if ((u == "TRUE" || u == "FALSE") && toks_[pos_ + 1].kind != Tok::Bang) {
          advance();
          return make_bool(u == "TRUE");
        }
        return reference();
      }
      default: fail_expected("expression");
    }
  }

  ExprPtr reference() {
    std::string first = name_token();
    if (peek().kind == Tok::Bang) {
      advance();
      std::string field = name_token();
      return make_cross(std::move(first), std::move(field));
    }
    return make_local(std::move(first));
  }

  ExprPtr call() {
    const Token& name = advance();
    auto fn = function_from_name(name.text);
    if (!fn) throw ParseError(name.pos, "unknown function '" + name.text + "'");
    expect(Tok::LParen);
    std::vector<ExprPtr> args;
    if (peek().kind != Tok::RParen) {
      args.push_back(expression(0));
      while (peek().kind == Tok::Comma) {
        advance();
        args.push_back(expression(0));
      }
    }
    if (peek().kind != Tok::RParen) fail_expected("',' or ')'");
    const std::size_t close = peek().pos;
    advance();
    const Arity a = arity(*fn);
    if (args.size() < a.min || args.size() > a.max) {
      const std::string want = a.min == a.max ? std::to_string(a.min)
                                              : "at least " + std::to_string(a.min);
      throw ParseError(close, std::string(function_name(*fn)) + " takes " + want +
                                  " argument(s), got " + std::to_string(args.size()));
    }
    return make_call(*fn, std::move(args));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// Printer precedence classes.
int precedence(const Expr& e) {
  if (const auto* b = std::get_if<Binary>(&e.node)) {
    switch (b->op) {
      case BinaryOp::Add:
      case BinaryOp::Sub: return 2;
      case BinaryOp::Mul:
      case BinaryOp::Div: return 3;
      case BinaryOp::Pow: return 5;
      default: return 1;
    }
  }
  if (std::holds_alternative<Unary>(e.node)) return 4;
  return 6;
}

std::string quote_name(std::string_view name) {
  if (needs_brackets(name)) return "[" + std::string(name) + "]";
  return std::string(name);
}

void print_to(const Expr& e, std::string& out);

void print_child(const Expr& child, bool parens, std::string& out) {
  if (parens) out.push_back('(');
  print_to(child, out);
  if (parens) out.push_back(')');
}

void print_to(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          out += n.value.to_string();
        } else if constexpr (std::is_same_v<T, TextLit>) {
          out.push_back('"');
          for (char c : n.value) {
            if (c == '"') out.push_back('"');
            out.push_back(c);
          }
          out.push_back('"');
        } else if constexpr (std::is_same_v<T, BoolLit>) {
          out += n.value ? "TRUE" : "FALSE";
        } else if constexpr (std::is_same_v<T, LocalRef>) {
          out += quote_name(n.field);
        } else if constexpr (std::is_same_v<T, CrossRef>) {
          out += quote_name(n.table);
          out.push_back('!');
          out += quote_name(n.field);
        } else if constexpr (std::is_same_v<T, Unary>) {
          out.push_back('-');
          print_child(*n.operand, precedence(*n.operand) < 4, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const int p = precedence(e);
          const int lp = precedence(*n.lhs);
          const int rp = precedence(*n.rhs);
          const bool right_assoc = n.op == BinaryOp::Pow;
          const bool non_assoc = p == 1;
          print_child(*n.lhs, lp < p || (lp == p && (right_assoc || non_assoc)), out);
          out += binary_op_symbol(n.op);
          print_child(*n.rhs, rp < p || (rp == p && !right_assoc), out);
        } else {
          out += function_name(n.fn);
          out.push_back('(');
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i) out.push_back(',');
            print_to(*n.args[i], out);
          }
          out.push_back(')');
        }
      },
      e.node);
}

void collect(const Expr& e, RefList& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, LocalRef>) {
          out.push_back({std::nullopt, n.field});
        } else if constexpr (std::is_same_v<T, CrossRef>) {
          out.push_back({n.table, n.field});
        } else if constexpr (std::is_same_v<T, Unary>) {
          collect(*n.operand, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect(*n.lhs, out);
          collect(*n.rhs, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) collect(*a, out);
        }
      },
      e.node);
}

constexpr std::array<std::pair<Function, std::string_view>, 7> kFunctions{{
    {Function::Sum, "SUM"},
    {Function::Count, "COUNT"},
    {Function::Avg, "AVG"},
    {Function::Min, "MIN"},
    {Function::Max, "MAX"},
    {Function::If, "IF"},
    {Function::Round, "ROUND"},
}};

}  // namespace

std::string_view binary_op_symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Pow: return "^";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "<>";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
  }
  return "?";
}

std::string_view function_name(Function fn) {
  for (const auto& [f, name] : kFunctions) {
    if (f == fn) return name;
  }
  return "?";
}

std::optional<Function> function_from_name(std::string_view name) {
  const std::string u = upper(name);
  for (const auto& [f, n] : kFunctions) {
    if (n == u) return f;
  }
  return std::nullopt;
}

bool is_aggregate(Function fn) {
  return fn == Function::Sum || fn == Function::Count || fn == Function::Avg ||
         fn == Function::Min || fn == Function::Max;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberLit> || std::is_same_v<T, TextLit> ||
                      std::is_same_v<T, BoolLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, LocalRef>) {
          return x.field == y.field;
        } else if constexpr (std::is_same_v<T, CrossRef>) {
          return x.table == y.table && x.field == y.field;
        } else if constexpr (std::is_same_v<T, Unary>) {
          return x.op == y.op && *x.operand == *y.operand;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return x.op == y.op && *x.lhs == *y.lhs && *x.rhs == *y.rhs;
        } else {
          if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (!(*x.args[i] == *y.args[i])) return false;
          }
          return true;
        }
      },
      a.node);
}

ExprPtr make_number(Number v) { return std::make_shared<const Expr>(Expr{NumberLit{std::move(v)}}); }
ExprPtr make_text(std::string v) { return std::make_shared<const Expr>(Expr{TextLit{std::move(v)}}); }
ExprPtr make_bool(bool v) { return std::make_shared<const Expr>(Expr{BoolLit{v}}); }
ExprPtr make_local(std::string field) {
  return std::make_shared<const Expr>(Expr{LocalRef{std::move(field)}});
}
ExprPtr make_cross(std::string table, std::string field) {
  return std::make_shared<const Expr>(Expr{CrossRef{std::move(table), std::move(field)}});
}
ExprPtr make_unary(UnaryOp op, ExprPtr operand) {
  return std::make_shared<const Expr>(Expr{Unary{op, std::move(operand)}});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<const Expr>(Expr{Binary{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr make_call(Function fn, std::vector<ExprPtr> args) {
  return std::make_shared<const Expr>(Expr{Call{fn, std::move(args)}});
}

ParseError::ParseError(std::size_t position, const std::string& message)
    : std::runtime_error("#PARSE at " + std::to_string(position) + ": " + message),
      position_(position),
      detail_(message) {}

ExprPtr parse_formula(std::string_view text) {
  std::size_t start = 0;
  while (start < text.size() && (text[start] == ' ' || text[start] == '\t')) ++start;
  if (start < text.size() && text[start] == '=') ++start;
  Parser p(tokenize(text, start));
  return p.parse();
}

std::string print_formula(const Expr& e) {
  std::string out;
  print_to(e, out);
  return out;
}

bool needs_brackets(std::string_view name) {
  if (name.empty() || !is_ident_start(name[0])) return true;
  for (char c : name) {
    if (!is_ident_char(c)) return true;
  }
  const std::string u = upper(name);
  return u == "TRUE" || u == "FALSE" || looks_positional(name);
}

RefList collect_refs(const Expr& e) {
  RefList out;
  collect(e, out);
  return out;
}

}  // namespace strata
