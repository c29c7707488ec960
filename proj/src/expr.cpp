#include "dflag/expr.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dflag/error.hpp"

namespace dflag {

namespace expr {

namespace {

ExprPtr make(Op op, ExprPtr lhs, ExprPtr rhs = nullptr) {
  return std::make_shared<const ExprNode>(ExprNode{op, 0.0, 0, std::move(lhs), std::move(rhs)});
}

bool is_const(const ExprPtr& e) { return e->op == Op::constant; }

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x && std::fabs(x) < 1e9; }

double int_pow(double base, long long n) {
  bool invert = n < 0;
  unsigned long long k = invert ? static_cast<unsigned long long>(-n) : static_cast<unsigned long long>(n);
  double result = 1.0;
  double b = base;
  while (k != 0) {
    if (k & 1ULL) result *= b;
    b *= b;
    k >>= 1;
  }
  return invert ? 1.0 / result : result;
}

// Raw real power; returns NaN outside the real domain.
double real_pow(double base, double exponent) {
  if (is_integer(exponent)) {
    if (base == 0.0 && exponent < 0.0) return std::nan("");
    return int_pow(base, static_cast<long long>(exponent));
  }
  if (base < 0.0) return std::nan("");
  if (base == 0.0 && exponent <= 0.0) return std::nan("");
  return std::pow(base, exponent);
}

double raw_function(Op op, double x) {
  switch (op) {
    case Op::sin: return std::sin(x);
    case Op::cos: return std::cos(x);
    case Op::tan: {
      double c = std::cos(x);
      return c == 0.0 ? std::nan("") : std::sin(x) / c;
    }
    case Op::cot: {
      double s = std::sin(x);
      return s == 0.0 ? std::nan("") : std::cos(x) / s;
    }
    case Op::exp: return std::exp(x);
    case Op::log: return x > 0.0 ? std::log(x) : std::nan("");
    case Op::sqrt: return x >= 0.0 ? std::sqrt(x) : std::nan("");
    default: throw std::logic_error("not a function op");
  }
}

int precedence(const ExprNode& n) {
  switch (n.op) {
    case Op::constant: return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    case Op::pow: return 4;
    default: return 5;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void print(const ExprNode& n, const std::vector<std::string>& coords, int min_prec, std::string& out) {
  bool parens = precedence(n) < min_prec;
  if (parens) out += '(';
  switch (n.op) {
    case Op::constant: out += format_number(n.value); break;
    case Op::variable: out += coords.at(n.var); break;
    case Op::neg:
      out += '-';
      print(*n.lhs, coords, 3, out);
      break;
    case Op::add:
    case Op::sub:
      print(*n.lhs, coords, 1, out);
      out += n.op == Op::add ? " + " : " - ";
      print(*n.rhs, coords, 2, out);
      break;
    case Op::mul:
    case Op::div:
      print(*n.lhs, coords, 2, out);
      out += n.op == Op::mul ? '*' : '/';
      print(*n.rhs, coords, 3, out);
      break;
    case Op::pow:
      print(*n.lhs, coords, 5, out);
      out += '^';
      print(*n.rhs, coords, 3, out);
      break;
    default:
      out += function_name(n.op);
      out += '(';
      print(*n.lhs, coords, 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

}  // namespace

const char* function_name(Op op) {
  switch (op) {
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::tan: return "tan";
    case Op::cot: return "cot";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sqrt: return "sqrt";
    default: return "?";
  }
}

bool is_constant(const ExprPtr& e, double value) { return is_const(e) && e->value == value; }

ExprPtr constant(double value) {
  return std::make_shared<const ExprNode>(ExprNode{Op::constant, value, 0, nullptr, nullptr});
}

ExprPtr variable(std::size_t index) {
  return std::make_shared<const ExprNode>(ExprNode{Op::variable, 0.0, index, nullptr, nullptr});
}

ExprPtr neg(ExprPtr a) {
  if (is_const(a)) return constant(-a->value);
  if (a->op == Op::neg) return a->lhs;
  return make(Op::neg, std::move(a));
}

ExprPtr add(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) return constant(a->value + b->value);
  if (is_constant(a, 0.0)) return b;
  if (is_constant(b, 0.0)) return a;
  if (b->op == Op::neg) return sub(std::move(a), b->lhs);
  if (a->op == Op::neg) return sub(std::move(b), a->lhs);
  return make(Op::add, std::move(a), std::move(b));
}

ExprPtr sub(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) return constant(a->value - b->value);
  if (is_constant(b, 0.0)) return a;
  if (is_constant(a, 0.0)) return neg(std::move(b));
  if (b->op == Op::neg) return add(std::move(a), b->lhs);
  return make(Op::sub, std::move(a), std::move(b));
}

ExprPtr mul(ExprPtr a, ExprPtr b) {
  if (is_const(b) && !is_const(a)) std::swap(a, b);
  if (is_const(a)) {
    if (is_const(b)) return constant(a->value * b->value);
    if (a->value == 0.0) return constant(0.0);
    if (a->value == 1.0) return b;
    if (a->value == -1.0) return neg(std::move(b));
    if (b->op == Op::mul && is_const(b->lhs)) return mul(constant(a->value * b->lhs->value), b->rhs);
    if (b->op == Op::neg) return mul(constant(-a->value), b->lhs);
  }
  if (a->op == Op::neg && b->op == Op::neg) return mul(a->lhs, b->lhs);
  if (a->op == Op::neg) return neg(mul(a->lhs, std::move(b)));
  if (b->op == Op::neg) return neg(mul(std::move(a), b->lhs));
  return make(Op::mul, std::move(a), std::move(b));
}

ExprPtr div(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b) && b->value != 0.0) {
    double q = a->value / b->value;
    if (std::isfinite(q)) return constant(q);
  }
  if (is_constant(a, 0.0) && !is_constant(b, 0.0)) return constant(0.0);
  if (is_constant(b, 1.0)) return a;
  if (is_constant(b, -1.0)) return neg(std::move(a));
  return make(Op::div, std::move(a), std::move(b));
}

ExprPtr pow(ExprPtr a, ExprPtr b) {
  if (is_constant(b, 0.0)) return constant(1.0);
  if (is_constant(b, 1.0)) return a;
  if (is_const(a) && is_const(b)) {
    double v = real_pow(a->value, b->value);
    if (std::isfinite(v)) return constant(v);
  }
  return make(Op::pow, std::move(a), std::move(b));
}

ExprPtr call(Op function, ExprPtr a) {
  if (is_const(a)) {
    double v = raw_function(function, a->value);
    if (std::isfinite(v)) return constant(v);
  }
  return make(function, std::move(a));
}

std::string to_string(const ExprNode& node, const std::vector<std::string>& coords) {
  std::string out;
  print(node, coords, 0, out);
  return out;
}

ExprPtr differentiate(const ExprPtr& e, std::size_t var) {
  const ExprNode& n = *e;
  switch (n.op) {
    case Op::constant: return constant(0.0);
    case Op::variable: return constant(n.var == var ? 1.0 : 0.0);
    case Op::neg: return neg(differentiate(n.lhs, var));
    case Op::add: return add(differentiate(n.lhs, var), differentiate(n.rhs, var));
    case Op::sub: return sub(differentiate(n.lhs, var), differentiate(n.rhs, var));
    case Op::mul:
      return add(mul(differentiate(n.lhs, var), n.rhs), mul(n.lhs, differentiate(n.rhs, var)));
    case Op::div: {
      ExprPtr da = differentiate(n.lhs, var);
      ExprPtr db = differentiate(n.rhs, var);
      return sub(div(da, n.rhs), div(mul(n.lhs, db), pow(n.rhs, constant(2.0))));
    }
    case Op::pow: {
      ExprPtr da = differentiate(n.lhs, var);
      if (is_const(n.rhs)) {
        double c = n.rhs->value;
        return mul(mul(constant(c), pow(n.lhs, constant(c - 1.0))), da);
      }
      ExprPtr db = differentiate(n.rhs, var);
      ExprPtr inner = add(mul(db, call(Op::log, n.lhs)), div(mul(n.rhs, da), n.lhs));
      return mul(e, inner);
    }
    case Op::sin: return mul(call(Op::cos, n.lhs), differentiate(n.lhs, var));
    case Op::cos: return neg(mul(call(Op::sin, n.lhs), differentiate(n.lhs, var)));
    case Op::tan:
      return mul(add(constant(1.0), pow(e, constant(2.0))), differentiate(n.lhs, var));
    case Op::cot:
      return neg(mul(add(constant(1.0), pow(e, constant(2.0))), differentiate(n.lhs, var)));
    case Op::exp: return mul(e, differentiate(n.lhs, var));
    case Op::log: return div(differentiate(n.lhs, var), n.lhs);
    case Op::sqrt: return div(differentiate(n.lhs, var), mul(constant(2.0), e));
  }
  throw std::logic_error("unhandled op");
}

double evaluate(const ExprNode& n, std::span<const double> point,
                const std::vector<std::string>& coords) {
  auto singular = [&](const char* why) -> double {
    throw SingularEvaluation(why, to_string(n, coords));
  };
  switch (n.op) {
    case Op::constant: return n.value;
    case Op::variable: return point[n.var];
    case Op::neg: return -evaluate(*n.lhs, point, coords);
    case Op::add: return evaluate(*n.lhs, point, coords) + evaluate(*n.rhs, point, coords);
    case Op::sub: return evaluate(*n.lhs, point, coords) - evaluate(*n.rhs, point, coords);
    case Op::mul: return evaluate(*n.lhs, point, coords) * evaluate(*n.rhs, point, coords);
    case Op::div: {
      double num = evaluate(*n.lhs, point, coords);
      double den = evaluate(*n.rhs, point, coords);
      if (den == 0.0) return singular("division by zero");
      double q = num / den;
      return std::isfinite(q) ? q : singular("non-finite quotient");
    }
    case Op::pow: {
      double v = real_pow(evaluate(*n.lhs, point, coords), evaluate(*n.rhs, point, coords));
      return std::isfinite(v) ? v : singular("power outside the real domain");
    }
    default: {
      double v = raw_function(n.op, evaluate(*n.lhs, point, coords));
      return std::isfinite(v) ? v : singular("singular function value");
    }
  }
}

}  // namespace expr

CoordList make_coords(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

ScalarField::ScalarField() : root_(expr::constant(0.0)), coords_(make_coords({})) {}

ScalarField::ScalarField(ExprPtr root, CoordList coords)
    : root_(std::move(root)), coords_(std::move(coords)) {
  if (!root_ || !coords_) throw std::invalid_argument("ScalarField: null root or coordinates");
}

ScalarField ScalarField::constant(double value, CoordList coords) {
  return {expr::constant(value), std::move(coords)};
}

ScalarField ScalarField::coordinate(std::size_t index, CoordList coords) {
  if (index >= coords->size()) throw std::out_of_range("coordinate index");
  return {expr::variable(index), std::move(coords)};
}

bool ScalarField::is_constant() const noexcept { return root_->op == Op::constant; }
bool ScalarField::is_zero() const noexcept { return expr::is_constant(root_, 0.0); }

double ScalarField::operator()(std::span<const double> point) const {
  if (point.size() != coords_->size())
    throw ShapeError("point has " + std::to_string(point.size()) + " coordinates, field expects " +
                     std::to_string(coords_->size()));
  return expr::evaluate(*root_, point, *coords_);
}

ScalarField ScalarField::derivative(std::size_t mu) const {
  if (mu >= coords_->size()) throw std::out_of_range("derivative: coordinate index");
  return {expr::differentiate(root_, mu), coords_};
}

std::string ScalarField::str() const { return expr::to_string(*root_, *coords_); }

std::size_t ScalarField::size() const {
  auto count = [](auto&& self, const ExprPtr& e) -> std::size_t {
    if (!e) return 0;
    return 1 + self(self, e->lhs) + self(self, e->rhs);
  };
  return count(count, root_);
}

namespace {

const CoordList& common_coords(const ScalarField& a, const ScalarField& b) {
  // Constants built without coordinates adopt the other operand's chart.
  if (a.coords() == b.coords() || *a.coords() == *b.coords()) return a.coords();
  if (a.coords()->empty() && a.is_constant()) return b.coords();
  if (b.coords()->empty() && b.is_constant()) return a.coords();
  throw ShapeError("scalar fields live on different coordinate lists");
}

}  // namespace

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  return {expr::add(a.root(), b.root()), common_coords(a, b)};
}
ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  return {expr::sub(a.root(), b.root()), common_coords(a, b)};
}
ScalarField operator*(const ScalarField& a, const ScalarField& b) {
  return {expr::mul(a.root(), b.root()), common_coords(a, b)};
}
ScalarField operator/(const ScalarField& a, const ScalarField& b) {
  return {expr::div(a.root(), b.root()), common_coords(a, b)};
}
ScalarField operator-(const ScalarField& a) { return {expr::neg(a.root()), a.coords()}; }
ScalarField operator*(double a, const ScalarField& b) {
  return {expr::mul(expr::constant(a), b.root()), b.coords()};
}

ScalarField pow(const ScalarField& base, const ScalarField& exponent) {
  return {expr::pow(base.root(), exponent.root()), common_coords(base, exponent)};
}
ScalarField pow(const ScalarField& base, double exponent) {
  return {expr::pow(base.root(), expr::constant(exponent)), base.coords()};
}
ScalarField apply(Op function, const ScalarField& argument) {
  return {expr::call(function, argument.root()), argument.coords()};
}

}  // namespace dflag
