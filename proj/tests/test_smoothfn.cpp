// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dspace/smoothfn.hpp"
#include "test_support.hpp"

using namespace dspace;
using testsupport::Rng;
using testsupport::central_diff_expr;
using testsupport::random_poly;

namespace {
SmoothExpr X = SmoothExpr::var(0);
SmoothExpr Y = SmoothExpr::var(1);
SmoothExpr Z = SmoothExpr::var(2);
std::vector<double> pt(std::initializer_list<double> v) { return {v}; }
} // namespace

TEST_CASE("eval basics") {
  CHECK(eval(X * X + Y, pt({0, 0})) == 0.0);
  CHECK(eval(X * Y, pt({2, 3})) == 6.0);
  CHECK_THROWS_AS(eval(SmoothExpr::sqrt_of(X), pt({-1})), DomainError);
  CHECK_THROWS_AS(eval(SmoothExpr::log_of(X), pt({0})), DomainError);
  CHECK_THROWS_AS(eval(X / Y, pt({1, 0})), DomainError);
  CHECK(eval(SmoothExpr::pow_int(X, 3), pt({2})) == 8.0);
  CHECK(eval(SmoothExpr::pow_int(X, -2), pt({2})) == doctest::Approx(0.25));
  CHECK_THROWS_AS(eval(SmoothExpr::pow_int(X, -1), pt({0})), DomainError);
}

TEST_CASE("partial derivatives at a point") {
  CHECK(partial(X, pt({5}), 0) == 1.0);

  SmoothExpr e = X * X * Y; // d/dx = 2xy -> 12 at (2,3)
  CHECK(partial(e, pt({2, 3}), 0) == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(std::abs(partial(e, pt({2, 3}), 0) - central_diff_expr(e, {2, 3}, 0)) <=
        1e-6);

  SmoothExpr s = SmoothExpr::sin_of(X);
  CHECK(partial(s, pt({0}), 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(partial(s, pt({0}), 0) - central_diff_expr(s, {0}, 0)) <= 1e-6);

  // derivative w.r.t. a variable the expression ignores
  CHECK(partial(X, pt({1, 2}), 1) == 0.0);
}

TEST_CASE("mixed partials") {
  SmoothExpr wuv = X * Y * Z;
  std::vector<int> uv = {1, 2};
  CHECK(mixed_partial(wuv, pt({3, 0, 0}), uv) == doctest::Approx(3.0));

  SmoothExpr affine = X + Y;
  std::vector<int> xy = {0, 1};
  CHECK(mixed_partial(affine, pt({0, 0}), xy) == 0.0);

  SmoothExpr uuv = X * X * Y; // d2/dxdy = 2x -> 2 at (1,1)
  CHECK(mixed_partial(uuv, pt({1, 1}), xy) == doctest::Approx(2.0));
}

TEST_CASE("mixed partial symmetry is exact") {
  Rng rng(20250809);
  for (int trial = 0; trial < 200; ++trial) {
    int dim = rng.integer(2, 4);
    SmoothExpr e = random_poly(rng, dim, 4, 5);
    auto p = rng.point(dim, -2, 2);
    int i = rng.integer(0, dim - 1);
    int j = (i + 1 + rng.integer(0, dim - 2)) % dim;
    std::vector<int> ij = {i, j}, ji = {j, i};
    double a = mixed_partial(e, p, ij);
    double b = mixed_partial(e, p, ji);
    CHECK(a == b); // order-normalized internally
  }
}

TEST_CASE("jacobian") {
  SmoothMap id2 = SmoothMap::identity(2);
  auto J = jacobian(id2, pt({0.3, 0.7}));
  CHECK(J[0][0] == 1.0);
  CHECK(J[0][1] == 0.0);
  CHECK(J[1][0] == 0.0);
  CHECK(J[1][1] == 1.0);

  SmoothMap para(1, {X * X, X}); // (t^2, t)
  auto Jp = jacobian(para, pt({3}));
  CHECK(Jp[0][0] == doctest::Approx(6.0));
  CHECK(Jp[1][0] == doctest::Approx(1.0));
  CHECK(std::abs(Jp[0][0] - central_diff_expr(X * X, {3}, 0)) <= 1e-6);

  SmoothMap m(2, {X * Y, X + Y});
  auto Jm = jacobian(m, pt({1, 2}));
  CHECK(Jm[0][0] == doctest::Approx(2.0));
  CHECK(Jm[0][1] == doctest::Approx(1.0));
  CHECK(Jm[1][0] == doctest::Approx(1.0));
  CHECK(Jm[1][1] == doctest::Approx(1.0));
}

TEST_CASE("forward mode agrees with central differences on random polynomials") {
  Rng rng(987654321);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int dim = rng.integer(1, 4);
    SmoothExpr e = random_poly(rng, dim, 4, rng.integer(1, 6));
    auto p = rng.point(dim, -1, 1);
    int i = rng.integer(0, dim - 1);
    double ad = partial(e, p, i);
    double fd = central_diff_expr(e, p, i, 1e-5);
    double val = eval(e, p);
    CHECK(std::abs(ad - fd) <= 1e-5 * (1.0 + std::abs(val)));
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("linearity of the derivative") {
  Rng rng(13579);
  for (int trial = 0; trial < 200; ++trial) {
    int dim = rng.integer(1, 3);
    SmoothExpr e1 = random_poly(rng, dim, 3, 4);
    SmoothExpr e2 = random_poly(rng, dim, 3, 4);
    double a = rng.uniform(-3, 3);
    auto p = rng.point(dim, -1, 1);
    int i = rng.integer(0, dim - 1);
    double lhs = partial(a * e1 + e2, p, i);
    double rhs = a * partial(e1, p, i) + partial(e2, p, i);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("derivative nodes evaluate and nest") {
  // d/dt (t^2) as an expression
  SmoothExpr d = SmoothExpr::derivative(X * X, {0});
  CHECK(eval(d, pt({3})) == doctest::Approx(6.0));

  // second derivative via nesting: d/dt d/dt t^3 = 6t
  SmoothExpr dd = SmoothExpr::derivative(SmoothExpr::derivative(X * X * X, {0}), {0});
  CHECK(eval(dd, pt({2})) == doctest::Approx(12.0));

  // derivative of sqrt at 0 is a domain error, value at 0 is fine
  SmoothExpr r = SmoothExpr::sqrt_of(X);
  CHECK(eval(r, pt({0})) == 0.0);
  CHECK_THROWS_AS(eval(SmoothExpr::derivative(r, {0}), pt({0})), DomainError);

  // differentiating a derivative node used inside an expression
  SmoothExpr mixed = SmoothExpr::derivative(X * Y, {1}) * X; // x * x
  CHECK(eval(mixed, pt({3, 5})) == doctest::Approx(9.0));
}

TEST_CASE("composition evaluates through the chain rule") {
  // outer(a, b) = a * b, args (x^2, x+1): f = x^2 (x+1), f' = 3x^2 + 2x
  SmoothExpr outer = X * Y;
  SmoothExpr f = SmoothExpr::compose(outer, {X * X, X + 1.0});
  CHECK(eval(f, pt({2})) == doctest::Approx(12.0));
  CHECK(partial(f, pt({2}), 0) == doctest::Approx(16.0));
  CHECK(std::abs(partial(f, pt({2}), 0) - central_diff_expr(f, {2}, 0)) <= 1e-5);
}

TEST_CASE("serialization round-trips") {
  SmoothExpr e = X * Y;
  CHECK(e.serialize() == "(mul (var 1) (var 2))");
  SmoothExpr back = SmoothExpr::parse(e.serialize());
  CHECK(back.same_as(e));

  SmoothExpr big = SmoothExpr::quot(
      SmoothExpr::sin_of(X) + 2.5, SmoothExpr::pow_int(Y, 3));
  SmoothExpr round = SmoothExpr::parse(big.serialize());
  CHECK(round.same_as(big));
  CHECK(eval(round, pt({0.3, 1.7})) == eval(big, pt({0.3, 1.7})));

  SmoothExpr dnode = SmoothExpr::derivative(X * Y, {0, 1});
  CHECK(SmoothExpr::parse(dnode.serialize()).same_as(dnode));

  CHECK_THROWS_AS(SmoothExpr::parse("(bogus 1)"), ParseError);
  CHECK_THROWS_AS(SmoothExpr::parse("(add (var 1)"), ParseError);
}

TEST_CASE("normalization gives order-independent keys") {
  SmoothExpr a = (X + Y) + Z;
  SmoothExpr b = Z + (Y + X);
  CHECK(a.same_as(b));

  SmoothExpr p1 = X * (Y * 2.0);
  SmoothExpr p2 = 2.0 * (Y * X);
  CHECK(p1.same_as(p2));

  SmoothExpr zero = X - X; // not folded symbolically; sums don't cancel terms
  CHECK_FALSE(zero.same_as(SmoothExpr::constant(1.0)));

  CHECK((X * 0.0).is_zero());
  CHECK(SmoothExpr::sum({}).is_zero());
}

TEST_CASE("substitution freezes and renames variables") {
  // face-style substitution: (x, y) -> (0, t)
  SmoothExpr e = X * Y + Y;
  auto sub = e.substituted({SmoothExpr::VarImage::to_const(0.0),
                            SmoothExpr::VarImage::to_var(0)});
  CHECK(sub.arity() == 1);
  CHECK(eval(sub, pt({0.5})) == doctest::Approx(0.5));

  // substitution wraps derivative nodes so the derivative happens first
  SmoothExpr d = SmoothExpr::derivative(X * Y, {0}); // = y
  auto frozen = d.substituted({SmoothExpr::VarImage::to_const(7.0),
                               SmoothExpr::VarImage::to_var(0)});
  CHECK(eval(frozen, pt({4})) == doctest::Approx(4.0));
}

TEST_CASE("smooth map validation") {
  CHECK_THROWS_AS(SmoothMap(1, {X * Y}), std::invalid_argument);
  SmoothMap ok(3, {X, Y});
  CHECK(ok.input_dim() == 3);
  CHECK(ok.output_dim() == 2);
}
