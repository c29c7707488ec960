// Recursive-descent parser for the coefficient expression grammar.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | coordinate | 'pi' | function '(' expr ')' | '(' expr ')'

#include <cctype>
#include <charconv>
#include <numbers>
#include <unordered_map>

#include "dflag/error.hpp"
#include "dflag/expr.hpp"

namespace dflag {

namespace {

const std::unordered_map<std::string_view, Op>& functions() {
  static const std::unordered_map<std::string_view, Op> table = {
      {"sin", Op::sin}, {"cos", Op::cos}, {"tan", Op::tan},   {"cot", Op::cot},
      {"exp", Op::exp}, {"log", Op::log}, {"sqrt", Op::sqrt},
  };
  return table;
}

bool is_reserved(std::string_view name) { return name == "pi" || functions().count(name) != 0; }

class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& coords) : src_(src), coords_(coords) {}

  ExprPtr parse() {
    skip_space();
    if (pos_ == src_.size()) fail("empty expression");
    ExprPtr e = parse_expr();
    skip_space();
    if (pos_ != src_.size()) fail(std::string("unexpected '") + src_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t pos) const {
    throw ParseError("syntax error: " + what, pos + 1);
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = expr::add(lhs, parse_term());
      else if (accept('-'))
        lhs = expr::sub(lhs, parse_term());
      else
        return lhs;
    }
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = expr::mul(lhs, parse_unary());
      else if (accept('/'))
        lhs = expr::div(lhs, parse_unary());
      else
        return lhs;
    }
  }

  ExprPtr parse_unary() {
    if (accept('-')) return expr::neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (accept('^')) return expr::pow(base, parse_unary());
    return base;
  }

  ExprPtr parse_primary() {
    skip_space();
    if (pos_ == src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  ExprPtr parse_number() {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ == src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
        fail_at("malformed exponent", mark);
      digits();
    }
    double value = 0.0;
    auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (res.ec != std::errc() || res.ptr != src_.data() + pos_) fail_at("malformed number", start);
    return expr::constant(value);
  }

  ExprPtr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);
    if (auto f = functions().find(name); f != functions().end()) {
      if (!accept('(')) fail("function '" + std::string(name) + "' needs '('");
      ExprPtr arg = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return expr::call(f->second, arg);
    }
    if (name == "pi") return expr::constant(std::numbers::pi);
    for (std::size_t i = 0; i < coords_.size(); ++i)
      if (coords_[i] == name) return expr::variable(i);
    throw ParseError("unknown identifier '" + std::string(name) + "'", start + 1);
  }

  std::string_view src_;
  const std::vector<std::string>& coords_;
  std::size_t pos_ = 0;
};

void check_coordinate_names(const std::vector<std::string>& coords) {
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const std::string& c = coords[i];
    bool ok = !c.empty() && (std::isalpha(static_cast<unsigned char>(c[0])) || c[0] == '_');
    for (char ch : c) ok = ok && (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_');
    if (!ok) throw std::invalid_argument("invalid coordinate name '" + c + "'");
    if (is_reserved(c)) throw std::invalid_argument("coordinate name '" + c + "' is reserved");
    for (std::size_t j = 0; j < i; ++j)
      if (coords[j] == c) throw std::invalid_argument("duplicate coordinate name '" + c + "'");
  }
}

}  // namespace

ScalarField parse_scalar_field(std::string_view src, CoordList coords) {
  check_coordinate_names(*coords);
  return {Parser(src, *coords).parse(), std::move(coords)};
}

ScalarField parse_scalar_field(std::string_view src, const std::vector<std::string>& coords) {
  return parse_scalar_field(src, make_coords(coords));
}

double parse_constant(std::string_view src) {
  static const std::vector<std::string> none;
  ExprPtr e = Parser(src, none).parse();
  return expr::evaluate(*e, {}, none);
}

}  // namespace dflag
