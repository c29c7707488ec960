#pragma once

// Closed-form scalar fields over chart coordinates.
//
// A ScalarField is an immutable expression tree together with the ordered list
// of coordinate names it is defined over.  Differentiation is symbolic, so the
// derivative of a field is again a field that can be evaluated, printed and
// differentiated further.  Grammar: see docs/grammar.md.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dflag {

enum class Op : unsigned char {
  constant,
  variable,
  neg,
  add,
  sub,
  mul,
  div,
  pow,
  sin,
  cos,
  tan,
  cot,
  exp,
  log,
  sqrt,
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  Op op;
  double value = 0.0;    // Op::constant
  std::size_t var = 0;   // Op::variable
  ExprPtr lhs;           // operand of unary ops / functions
  ExprPtr rhs;
};

using CoordList = std::shared_ptr<const std::vector<std::string>>;

class ScalarField {
 public:
  /// Constant zero over no coordinates; mainly a placeholder for containers.
  ScalarField();
  ScalarField(ExprPtr root, CoordList coords);

  static ScalarField constant(double value, CoordList coords);
  static ScalarField coordinate(std::size_t index, CoordList coords);

  const ExprPtr& root() const noexcept { return root_; }
  const CoordList& coords() const noexcept { return coords_; }
  std::size_t dim() const noexcept { return coords_->size(); }

  bool is_constant() const noexcept;
  bool is_zero() const noexcept;

  /// IEEE double evaluation; throws SingularEvaluation at poles.
  double operator()(std::span<const double> point) const;
  double eval(std::span<const double> point) const { return (*this)(point); }

  /// Exact partial derivative with respect to coordinate `mu`.
  ScalarField derivative(std::size_t mu) const;

  /// Re-parseable text form.
  std::string str() const;

  /// Number of nodes in the tree (shared subtrees counted each time).
  std::size_t size() const;

  friend ScalarField operator+(const ScalarField& a, const ScalarField& b);
  friend ScalarField operator-(const ScalarField& a, const ScalarField& b);
  friend ScalarField operator*(const ScalarField& a, const ScalarField& b);
  friend ScalarField operator/(const ScalarField& a, const ScalarField& b);
  friend ScalarField operator-(const ScalarField& a);
  friend ScalarField operator*(double a, const ScalarField& b);

  ScalarField& operator+=(const ScalarField& other) { return *this = *this + other; }
  ScalarField& operator-=(const ScalarField& other) { return *this = *this - other; }

 private:
  ExprPtr root_;
  CoordList coords_;
};

ScalarField pow(const ScalarField& base, const ScalarField& exponent);
ScalarField pow(const ScalarField& base, double exponent);
ScalarField apply(Op function, const ScalarField& argument);

CoordList make_coords(std::vector<std::string> names);

/// Parses `src` over the given coordinates.  Throws ParseError with a 1-based
/// column on syntax errors and unknown identifiers.
ScalarField parse_scalar_field(std::string_view src, CoordList coords);
ScalarField parse_scalar_field(std::string_view src, const std::vector<std::string>& coords);

/// Parses a coordinate-free constant expression such as "pi - 0.3".
double parse_constant(std::string_view src);

namespace expr {

// Node builders with constant folding.  They never fold a result that is not
// finite, so singularities stay visible at evaluation time.
ExprPtr constant(double value);
ExprPtr variable(std::size_t index);
ExprPtr neg(ExprPtr a);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr div(ExprPtr a, ExprPtr b);
ExprPtr pow(ExprPtr a, ExprPtr b);
ExprPtr call(Op function, ExprPtr a);

bool is_constant(const ExprPtr& e, double value);
std::string to_string(const ExprNode& node, const std::vector<std::string>& coords);
ExprPtr differentiate(const ExprPtr& e, std::size_t var);
double evaluate(const ExprNode& node, std::span<const double> point,
                const std::vector<std::string>& coords);
const char* function_name(Op op);

}  // namespace expr

}  // namespace dflag
