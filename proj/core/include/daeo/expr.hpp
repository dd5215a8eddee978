#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "daeo/types.hpp"

namespace daeo {

// Variable families: x (state), u (input), y (output), w (argument slot of a
// pre-composed nonlinearity), t (time; accepted only where a context allows).
enum class VarKind : std::uint8_t { x, u, y, w, t };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind : std::uint8_t { constant, variable, unary, binary };
  enum class UnaryOp : std::uint8_t { neg, sin, cos, exp, log, tanh, sqrt, abs, sign };
  enum class BinaryOp : std::uint8_t { add, sub, mul, div, pow };

  Kind kind;
  double value = 0.0;            // constant
  VarKind var = VarKind::x;      // variable
  int index = 0;                 // variable (0-based)
  UnaryOp uop = UnaryOp::neg;
  BinaryOp bop = BinaryOp::add;
  ExprPtr a, b;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " at offset " + std::to_string(offset)),
        offset(offset) {}
  std::size_t offset;
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grammar (documented in the README):
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | base ('^' factor)?
//   base   := number | ident | ident '(' expr ')' | '(' expr ')'
// '^' binds tighter than unary minus, so -x1^2 parses as -(x1^2); '^' is
// right-associative. Functions: sin cos exp log tanh sqrt abs sign.
ExprPtr parse_expression(const std::string& text);

struct EvalContext {
  Eigen::VectorXd x, u, y, w;
  double t = 0.0;
};

// Throws EvalError on domain violations (log of non-positive, division by
// zero, fractional power of a negative base) and on non-finite results.
double eval(const Expr& e, const EvalContext& ctx);

// Exact symbolic derivative. d|v|/dv is sign(v) with sign(0) = 0.
ExprPtr differentiate(const Expr& e, VarKind kind, int index);

// Prints with minimal parentheses; reparsing yields a structurally
// identical tree.
std::string to_string(const Expr& e);

bool structurally_equal(const Expr& lhs, const Expr& rhs);

// True when the tree contains abs, sqrt or log anywhere (used to flag
// nonlinearities whose local Lipschitz continuity needs a domain argument).
bool has_nonsmooth_primitive(const Expr& e);

struct VectorFunction {
  std::vector<ExprPtr> exprs;
  int n_x = 0, n_u = 0, n_y = 0, n_w = 0;
  bool allow_t = false;

  int out_dim() const { return static_cast<int>(exprs.size()); }

  // Checks that every variable index is within the declared dimensions.
  void validate() const;

  Eigen::VectorXd eval(const EvalContext& ctx) const;

  // Symbolic Jacobian with respect to one variable family, as expression
  // trees (row = component, column = variable index).
  std::vector<std::vector<ExprPtr>> derivative_table(VarKind kind) const;

  Eigen::MatrixXd jacobian(VarKind kind, const EvalContext& ctx) const;
};

// Worst sampled ratio ||f(z,u,y) - f(x,u,y)|| / ||F(z-x)||. Half the pairs
// are drawn nearly coincident so derivative-scale ratios are reached. A pair
// with F(z-x) = 0 but differing f refutes the certificate (returns +inf).
double estimate_lipschitz_margin(const VectorFunction& f_l, const Mat& F,
                                 double box, int n_pairs, std::uint64_t seed);

// Minimum sampled slack (z-x)'Theta(f(z,u,y) - f(x,u,y)) - mu/2 ||z-x||^2
// over pairs in the w-domain box; a negative minimum refutes.
double estimate_monotonicity_margin(const VectorFunction& f_m, const Mat& Theta,
                                    double mu, double box, int n_pairs,
                                    std::uint64_t seed);

}  // namespace daeo
