// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dspace/errors.hpp"

namespace dspace {

/// Node kinds of the smooth-expression DAG.
enum class ExprKind {
  Constant,
  Var,      // free variable by index
  Sum,      // n-ary
  Product,  // n-ary
  Neg,
  Quot,     // kids[0] / kids[1]
  PowInt,   // kids[0] ^ exponent (any integer)
  Exp,
  Log,
  Sin,
  Cos,
  Sqrt,
  Compose,  // kids[0] = outer, kids[1..] = arguments bound to outer's variables
  Deriv,    // partial derivative of kids[0] w.r.t. distinct variable indices
};

/// Immutable expression tree over real variables. Copies share nodes and are
/// cheap. Evaluation and differentiation are exact forward-mode passes over a
/// nilpotent multi-dual algebra; no symbolic rewriting happens on evaluation
/// paths, so cost stays proportional to the tree size.
///
/// Variable indices are 0-based in the C++ API and 1-based in the serialized
/// prefix text, e.g. `(mul (var 1) (var 2))`.
class SmoothExpr {
public:
  /// Default-constructs the constant zero.
  SmoothExpr();

  static SmoothExpr constant(double value);
  static SmoothExpr var(int index);
  static SmoothExpr sum(std::vector<SmoothExpr> kids);
  static SmoothExpr product(std::vector<SmoothExpr> kids);
  static SmoothExpr neg(SmoothExpr e);
  static SmoothExpr quot(SmoothExpr num, SmoothExpr den);
  static SmoothExpr pow_int(SmoothExpr base, int exponent);
  static SmoothExpr exp_of(SmoothExpr e);
  static SmoothExpr log_of(SmoothExpr e);
  static SmoothExpr sin_of(SmoothExpr e);
  static SmoothExpr cos_of(SmoothExpr e);
  static SmoothExpr sqrt_of(SmoothExpr e);

  /// outer(args[0], ..., args[m-1]); outer's arity must not exceed args.size().
  static SmoothExpr compose(SmoothExpr outer, std::vector<SmoothExpr> args);

  /// Mixed partial derivative node w.r.t. distinct variable indices.
  /// Evaluates exactly (nested forward passes), and can itself be
  /// differentiated again.
  static SmoothExpr derivative(SmoothExpr inner, std::vector<int> vars);

  ExprKind kind() const;
  /// 1 + the largest variable index reachable; 0 for closed terms.
  int arity() const;
  double constant_value() const;
  int var_index() const;
  int exponent() const;
  const std::vector<SmoothExpr>& children() const;
  const std::vector<int>& deriv_vars() const;

  /// True when the normalized form is the constant 0.
  bool is_zero() const;

  /// Indices of variables the expression actually mentions.
  std::vector<int> free_vars() const;

  /// Canonical form used for keys and structural equality: sums/products
  /// flattened and sorted, constants folded, trivial nodes removed. May widen
  /// the natural domain (e.g. 0 * log x -> 0), so it is not used on
  /// evaluation paths.
  SmoothExpr normalized() const;

  /// Deterministic identity string: normalized().serialize().
  std::string key() const;

  /// Structural equality after normalization.
  bool same_as(const SmoothExpr& other) const;

  /// Replaces each variable with a new variable index or a frozen constant.
  /// Entry i of `images` describes the image of variable i; variables beyond
  /// the vector keep their index. A Deriv node is wrapped in a composition so
  /// the derivative is still taken before the substitution.
  struct VarImage {
    bool frozen = false;
    int var = 0;
    double value = 0.0;
    static VarImage to_var(int v) { return {false, v, 0.0}; }
    static VarImage to_const(double c) { return {true, 0, c}; }
  };
  SmoothExpr substituted(const std::vector<VarImage>& images) const;

  /// Prefix text form, e.g. `(add (const 1) (pow (var 1) 2))`.
  std::string serialize() const;
  static SmoothExpr parse(const std::string& text);

private:
  struct Node;
  explicit SmoothExpr(std::shared_ptr<const Node> n);
  static SmoothExpr unary(ExprKind k, SmoothExpr e);
  std::shared_ptr<const Node> node_;
};

SmoothExpr operator+(const SmoothExpr& a, const SmoothExpr& b);
SmoothExpr operator-(const SmoothExpr& a, const SmoothExpr& b);
SmoothExpr operator*(const SmoothExpr& a, const SmoothExpr& b);
SmoothExpr operator/(const SmoothExpr& a, const SmoothExpr& b);
SmoothExpr operator-(const SmoothExpr& a);
SmoothExpr operator+(double a, const SmoothExpr& b);
SmoothExpr operator+(const SmoothExpr& a, double b);
SmoothExpr operator*(double a, const SmoothExpr& b);
SmoothExpr operator*(const SmoothExpr& a, double b);
SmoothExpr operator-(double a, const SmoothExpr& b);
SmoothExpr operator-(const SmoothExpr& a, double b);
SmoothExpr operator/(const SmoothExpr& a, double b);

/// Value at p. Throws DomainError outside the natural domain; the point must
/// cover the expression's arity.
double eval(const SmoothExpr& e, std::span<const double> p);

/// Exact forward-mode partial derivative d e / d x_i at p.
double partial(const SmoothExpr& e, std::span<const double> p, int i);

/// Mixed partial over distinct variable indices, one nested forward pass.
/// The index list is order-normalized internally, so permuted index lists
/// produce bit-identical results.
double mixed_partial(const SmoothExpr& e, std::span<const double> p,
                     std::span<const int> indices);

/// A tuple of expressions sharing one input dimension.
class SmoothMap {
public:
  SmoothMap(int input_dim, std::vector<SmoothExpr> components);
  static SmoothMap identity(int n);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return static_cast<int>(components_.size()); }
  const std::vector<SmoothExpr>& components() const { return components_; }
  const SmoothExpr& component(int i) const { return components_.at(i); }

private:
  int input_dim_;
  std::vector<SmoothExpr> components_;
};

std::vector<double> eval(const SmoothMap& m, std::span<const double> p);

/// Jacobian at p: row = component, column = variable.
std::vector<std::vector<double>> jacobian(const SmoothMap& m,
                                          std::span<const double> p);

/// outer component composed with the map's components.
SmoothExpr compose_with_map(const SmoothExpr& outer, const SmoothMap& inner);
SmoothMap compose_maps(const SmoothMap& outer, const SmoothMap& inner);

} // namespace dspace
