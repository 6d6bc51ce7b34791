#include "strata/value.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace strata {

namespace {

constexpr int kCanonicalDigits = 20;

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Splits a scientific rendering "-d.ddde+XX" into sign, digit string and
// decimal exponent of the first digit.
struct Scientific {
  bool negative = false;
  std::string digits;
  int exponent = 0;
};

Scientific split_scientific(const std::string& s) {
  Scientific out;
  std::size_t i = 0;
  if (s[i] == '-') {
    out.negative = true;
    ++i;
  } else if (s[i] == '+') {
    ++i;
  }
  for (; i < s.size() && s[i] != 'e' && s[i] != 'E'; ++i) {
    if (is_digit(s[i])) out.digits.push_back(s[i]);
  }
  if (i < s.size()) out.exponent = std::stoi(s.substr(i + 1));
  while (out.digits.size() > 1 && out.digits.back() == '0') out.digits.pop_back();
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string group_thousands(const std::string& integral) {
  std::string out;
  const int n = static_cast<int>(integral.size());
  for (int i = 0; i < n; ++i) {
    if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(integral[i]);
  }
  return out;
}

}  // namespace

std::optional<Number> Number::parse(std::string_view text) {
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < n && is_digit(text[i])) {
    ++i;
    ++digits;
  }
  if (i < n && text[i] == '.') {
    ++i;
    while (i < n && is_digit(text[i])) {
      ++i;
      ++digits;
    }
  }
  if (digits == 0) return std::nullopt;
  if (i < n && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    if (i < n && (text[i] == '+' || text[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < n && is_digit(text[i])) {
      ++i;
      ++exp_digits;
    }
    if (exp_digits == 0 || exp_digits > 6) return std::nullopt;
  }
  if (i != n) return std::nullopt;
  try {
    return Number(Rep(std::string(text)));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

Number Number::from_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("unrepresentable number");
  auto parsed = parse(std::string_view(buf.data(), static_cast<std::size_t>(end - buf.data())));
  if (!parsed) throw std::runtime_error("non-finite number");
  return *parsed;
}

std::string Number::to_string() const {
  if (rep_.is_zero()) return "0";
  const Scientific sci =
      split_scientific(rep_.str(kCanonicalDigits - 1, std::ios_base::scientific));
  std::string out = sci.negative ? "-" : "";
  const int len = static_cast<int>(sci.digits.size());
  if (sci.exponent < -7 || sci.exponent > 20) {
    out += sci.digits.substr(0, 1);
    if (len > 1) out += "." + sci.digits.substr(1);
    out += sci.exponent < 0 ? "e-" : "e+";
    out += std::to_string(std::abs(sci.exponent));
    return out;
  }
  if (sci.exponent < 0) {
    out += "0.";
    out.append(static_cast<std::size_t>(-sci.exponent - 1), '0');
    out += sci.digits;
    return out;
  }
  const int int_len = sci.exponent + 1;
  if (len <= int_len) {
    out += sci.digits;
    out.append(static_cast<std::size_t>(int_len - len), '0');
  } else {
    out += sci.digits.substr(0, static_cast<std::size_t>(int_len));
    out += ".";
    out += sci.digits.substr(static_cast<std::size_t>(int_len));
  }
  return out;
}

std::string Number::to_fixed(int decimals) const {
  const Number rounded = round_half_even(decimals);
  std::string s = rounded.rep_.str(decimals, std::ios_base::fixed);
  if (s.find_first_not_of("-0.") == std::string::npos && !s.empty() && s[0] == '-') s.erase(0, 1);
  if (decimals == 0) {
    auto dot = s.find('.');
    if (dot != std::string::npos) s.erase(dot);
  }
  return s;
}

double Number::to_double() const { return std::strtod(to_string().c_str(), nullptr); }

bool Number::is_integer() const {
  using boost::multiprecision::floor;
  return is_finite() && Rep(floor(rep_)) == rep_;
}

bool Number::is_finite() const { return (boost::math::isfinite)(rep_); }

Number Number::round_half_even(int decimals) const {
  using boost::multiprecision::floor;
  using boost::multiprecision::pow;
  const Rep scale = pow(Rep(10), decimals);
  const Rep scaled = rep_ * scale;
  Rep fl = floor(scaled);
  const Rep frac = scaled - fl;
  const Rep half("0.5");
  if (frac > half) {
    fl += 1;
  } else if (frac == half) {
    const Rep halved = fl / 2;
    if (Rep(floor(halved)) != halved) fl += 1;
  }
  return Number(Rep(fl / scale));
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "#PARSE";
    case ErrorCode::Ref: return "#REF";
    case ErrorCode::Type: return "#TYPE";
    case ErrorCode::Div0: return "#DIV0";
    case ErrorCode::Cycle: return "#CYCLE";
    case ErrorCode::NoMatch: return "#NOMATCH";
    case ErrorCode::Multi: return "#MULTI";
  }
  return "#?";
}

std::optional<ErrorCode> error_code_from_name(std::string_view name) {
  for (ErrorCode c : {ErrorCode::Parse, ErrorCode::Ref, ErrorCode::Type, ErrorCode::Div0,
                      ErrorCode::Cycle, ErrorCode::NoMatch, ErrorCode::Multi}) {
    if (error_code_name(c) == name) return c;
  }
  return std::nullopt;
}

Value Value::from_literal(std::string_view text) {
  if (text.empty()) return Empty{};
  const std::string l = lower(text);
  if (l == "true") return true;
  if (l == "false") return false;
  if (auto n = Number::parse(text)) return *n;
  return std::string(text);
}

std::string Value::to_string() const {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Empty>) {
          return "";
        } else if constexpr (std::is_same_v<T, Number>) {
          return v.to_string();
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "TRUE" : "FALSE";
        } else {
          return std::string(error_code_name(v.code));
        }
      },
      v_);
}

std::string_view Value::type_name() const {
  switch (v_.index()) {
    case 0: return "empty";
    case 1: return "number";
    case 2: return "text";
    case 3: return "boolean";
    default: return "error";
  }
}

std::optional<DisplayFormat> DisplayFormat::parse(std::string_view descriptor) {
  DisplayFormat f;
  if (descriptor.empty() || descriptor == "general") return f;
  auto dash = descriptor.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  const auto head = descriptor.substr(0, dash);
  auto tail = descriptor.substr(dash + 1);
  if (tail.size() < 3 || tail.substr(tail.size() - 2) != "dp") return std::nullopt;
  tail.remove_suffix(2);
  int decimals = 0;
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), decimals);
  if (ec != std::errc() || ptr != tail.data() + tail.size() || decimals < 0 || decimals > 12) {
    return std::nullopt;
  }
  if (head == "fixed") {
    f.kind_ = Kind::Fixed;
  } else if (head == "currency") {
    f.kind_ = Kind::Currency;
  } else if (head == "percent") {
    f.kind_ = Kind::Percent;
  } else {
    return std::nullopt;
  }
  f.decimals_ = decimals;
  return f;
}

std::string DisplayFormat::descriptor() const {
  switch (kind_) {
    case Kind::General: return "general";
    case Kind::Fixed: return "fixed-" + std::to_string(decimals_) + "dp";
    case Kind::Currency: return "currency-" + std::to_string(decimals_) + "dp";
    case Kind::Percent: return "percent-" + std::to_string(decimals_) + "dp";
  }
  return "general";
}

std::string DisplayFormat::render(const Value& v) const {
  if (!v.is_number() || kind_ == Kind::General) return v.to_string();
  switch (kind_) {
    case Kind::Fixed: return v.number().to_fixed(decimals_);
    case Kind::Percent: return (v.number() * Number(100)).to_fixed(decimals_) + "%";
    case Kind::Currency: {
      std::string s = v.number().to_fixed(decimals_);
      const bool negative = !s.empty() && s[0] == '-';
      if (negative) s.erase(0, 1);
      const auto dot = s.find('.');
      std::string integral = dot == std::string::npos ? s : s.substr(0, dot);
      std::string fraction = dot == std::string::npos ? "" : s.substr(dot);
      return std::string(negative ? "-" : "") + "\xC2\xA3" + group_thousands(integral) + fraction;
    }
    case Kind::General: break;
  }
  return v.to_string();
}

}  // namespace strata
