#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mathonet/net.hpp"

namespace mathonet {

// Immutable expression tree. Add/Mul are n-ary; Unary wraps one child.
struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Const, Var, Add, Mul, Unary };
  Kind kind = Kind::Const;
  double value = 0.0;            // Const
  int var = -1;                  // Var
  UnaryKind op = UnaryKind::Identity;  // Unary
  std::vector<ExprPtr> kids;
};

ExprPtr make_const(double v);
ExprPtr make_var(int index);
ExprPtr make_add(std::vector<ExprPtr> kids);
ExprPtr make_mul(std::vector<ExprPtr> kids);
ExprPtr make_unary(UnaryKind op, ExprPtr child);

// Evaluates with the same safe-op conventions as the net forward pass.
double eval_expr(const Expr& e, std::span<const double> x);

// Exact symbolic mirror of forward(net, .): evaluating the result equals the
// net output up to summation-order roundoff. Masked connections are absent.
ExprPtr extract_expression(const MathONet& net);

// Distributes products along Identity paths, merges like monomials, folds
// constants (including through unary arguments), drops top-level terms with
// |coefficient| < coeff_floor, and orders terms canonically. Never rewrites
// inside Sin/Cos/Log/Exp arguments beyond that.
ExprPtr simplify(const ExprPtr& e, double coeff_floor);

// Number of top-level additive terms of a simplified expression; 0 only for
// the zero expression.
int term_count(const Expr& e);

// Canonical rendering: terms ordered deterministically, coefficients
// rounded half-even to `decimals`. Default variable names are x, y, z for up
// to three inputs and x1, x2, ... beyond that.
std::string to_string(const Expr& e, int decimals,
                      std::span<const std::string> var_names = {});

// One additive term of a simplified expression, split as coeff * unit.
struct TermView {
  double coeff = 0.0;
  ExprPtr unit;  // product of non-constant factors; Const(1) for pure constants
};
std::vector<TermView> term_views(const ExprPtr& simplified);

struct PolyTerm {
  double coeff = 0.0;
  std::vector<int> powers;  // one exponent per variable
};
// The monomial decomposition when the expression is a pure polynomial in the
// inputs; nullopt when any unary atom survives simplification.
std::optional<std::vector<PolyTerm>> polynomial_terms(const Expr& simplified, int n_vars);

// Coefficient of the monomial with the given exponents in a simplified
// expression (0 powers everywhere addresses the constant term).
std::optional<double> monomial_coeff(const Expr& simplified, std::span<const int> powers);

// Exponent vector of a term's unit factor when it is a pure monomial;
// nullopt when it contains a unary atom.
std::optional<std::vector<int>> monomial_powers(const Expr& unit, int n_vars);

}  // namespace mathonet
