// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dspace/forms.hpp"
#include "test_support.hpp"

using namespace dspace;
using testsupport::Rng;
using testsupport::random_poly;

namespace {

SmoothExpr X = SmoothExpr::var(0);
SmoothExpr Y = SmoothExpr::var(1);
SmoothExpr Z = SmoothExpr::var(2);

SpacePtr plane() {
  static SpacePtr s = make_space(2, Membership::all(), {X, Y}, true);
  return s;
}
SpacePtr space3() {
  static SpacePtr s = make_space(3, Membership::all(), {X, Y, Z}, true);
  return s;
}
SpacePtr line() {
  static SpacePtr s = make_space(1, Membership::all(), {X}, true);
  return s;
}
SpacePtr cross() {
  static SpacePtr s =
      make_space(2, Membership::zero_set({X * Y}), {X, Y}, true);
  return s;
}

std::vector<double> e1{1.0, 0.0};
std::vector<double> e2{0.0, 1.0};

} // namespace

TEST_CASE("wedge antisymmetry and repeated indices") {
  PointForm dx(plane(), 1, {{SmoothExpr::constant(1), {0}}});
  PointForm dy(plane(), 1, {{SmoothExpr::constant(1), {1}}});

  PointForm dxdy = wedge(dx, dy);
  double m[] = {0.3, 0.4};
  std::vector<std::vector<double>> v12 = {e1, e2};
  std::vector<std::vector<double>> v21 = {e2, e1};
  CHECK(eval_form(dxdy, m, v12) == 1.0);
  CHECK(eval_form(dxdy, m, v21) == -1.0);

  PointForm dxdx = wedge(dx, dx);
  CHECK(dxdx.is_zero_form());

  // (x dy) ^ dz -> term (x, (2,3))
  PointForm xdy(space3(), 1, {{X, {1}}});
  PointForm dz(space3(), 1, {{SmoothExpr::constant(1), {2}}});
  PointForm w = wedge(xdy, dz);
  REQUIRE(w.terms().size() == 1);
  CHECK(w.terms()[0].index == std::vector<int>{1, 2});
  double p3[] = {2.0, 0.0, 0.0};
  CHECK(eval(w.terms()[0].coeff, p3) == 2.0);
}

TEST_CASE("eval_form basics") {
  PointForm dx(line(), 1, {{SmoothExpr::constant(1), {0}}});
  double m[] = {0.7};
  std::vector<std::vector<double>> v = {{1.0}};
  CHECK(eval_form(dx, m, v) == 1.0);

  // x dy on R^2 at (2,0) applied to e2
  PointForm xdy(plane(), 1, {{X, {1}}});
  double p[] = {2.0, 0.0};
  std::vector<std::vector<double>> ve2 = {e2};
  CHECK(eval_form(xdy, p, ve2) == 2.0);

  // transposition negates exactly, including random vectors
  Rng rng(5150);
  PointForm dxdy(plane(), 2,
                 {{SmoothExpr::constant(1), {0, 1}}});
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a = rng.point(2, -2, 2), b = rng.point(2, -2, 2);
    double q[] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<std::vector<double>> ab = {a, b}, ba = {b, a};
    CHECK(eval_form(dxdy, q, ab) == -eval_form(dxdy, q, ba));
  }
}

TEST_CASE("degree zero forms evaluate coefficients") {
  PointForm f(line(), 0, {{X * X, {}}});
  double m[] = {3.0};
  CHECK(eval_form(f, m, {}) == 9.0);
}

TEST_CASE("homogeneity check accepts multilinear and rejects others") {
  // sigma = w * u * v with one-dimensional blocks
  SigmaPresentedForm ok;
  ok.space = line();
  ok.base = SmoothMap(1, {X});
  ok.slots = {{0}, {0}};
  ok.sigma = X * Y * Z; // args: w, u, v
  CHECK(homogeneity_check(ok, 128).pass);

  // sigma = u^2 on a single block: fails, witness records the scaling
  SigmaPresentedForm sq;
  sq.space = line();
  sq.base = SmoothMap(1, {});
  sq.slots = {{0}};
  sq.sigma = X * X;
  auto res = homogeneity_check(sq, 128);
  CHECK_FALSE(res.pass);
  REQUIRE(res.witness.has_value());
  CHECK(res.witness->scales[0] == 2.0); // first fixed probe that breaks u^2
  CHECK(res.witness->deviation > 0.1);

  // sigma = u + v on two blocks: t = (1, 0) probe breaks additivity
  SigmaPresentedForm addv;
  addv.space = line();
  addv.base = SmoothMap(1, {});
  addv.slots = {{0}, {0}};
  addv.sigma = X + Y;
  auto res2 = homogeneity_check(addv, 128);
  CHECK_FALSE(res2.pass);
  CHECK(res2.witness.has_value());
}

TEST_CASE("canonicalize kills diagonal tensors") {
  // sigma = w u v with both slots the same generator: skew part vanishes
  SigmaPresentedForm s;
  s.space = line();
  s.base = SmoothMap(1, {X});
  s.slots = {{0}, {0}};
  s.sigma = X * Y * Z;
  PointForm w = canonicalize(s);
  CHECK(w.degree() == 2);
  CHECK(w.is_zero_form());
}

TEST_CASE("canonicalize assembles the determinant") {
  // sigma = u1^1 u2^2 - u2^1 u1^2 over slots (x, y): canonical form dx ^ dy
  SigmaPresentedForm s;
  s.space = plane();
  s.base = SmoothMap(2, {});
  s.slots = {{0, 1}, {0, 1}};
  // args: u^1 = (x0, x1), u^2 = (x2, x3)
  SmoothExpr u11 = SmoothExpr::var(0), u12 = SmoothExpr::var(1);
  SmoothExpr u21 = SmoothExpr::var(2), u22 = SmoothExpr::var(3);
  s.sigma = u11 * u22 - u12 * u21;
  PointForm w = canonicalize(s);
  REQUIRE(w.terms().size() == 1);
  CHECK(w.terms()[0].index == std::vector<int>{0, 1});
  double m[] = {0.2, 0.8};
  std::vector<std::vector<double>> v = {e1, e2};
  CHECK(eval_form(w, m, v) == doctest::Approx(1.0).epsilon(1e-14));

  // zero sigma gives the zero form
  SigmaPresentedForm z = s;
  z.sigma = SmoothExpr::constant(0.0);
  CHECK(canonicalize(z).is_zero_form());

  // canonicalize refuses non-homogeneous sigma
  SigmaPresentedForm bad = s;
  bad.sigma = u11 * u11;
  CHECK_THROWS_AS(canonicalize(bad), HomogeneityError);
}

TEST_CASE("canonicalized sigma forms reproduce direct evaluation") {
  Rng rng(777111);
  for (int trial = 0; trial < 30; ++trial) {
    // random skew sigma: sum over sorted pairs of P_I(w) det[u^r_{I_s}]
    SmoothExpr w0 = SmoothExpr::var(0);
    SmoothExpr p01 = random_poly(rng, 1, 2, 2); // polynomial in w
    SigmaPresentedForm s;
    s.space = plane();
    s.base = SmoothMap(2, {X + Y});
    s.slots = {{0, 1}, {0, 1}};
    // args: w, u^1_(1,2) at vars 1,2, u^2_(1,2) at vars 3,4
    SmoothExpr U11 = SmoothExpr::var(1), U12 = SmoothExpr::var(2);
    SmoothExpr U21 = SmoothExpr::var(3), U22 = SmoothExpr::var(4);
    SmoothExpr det12 = U11 * U22 - U12 * U21;
    s.sigma = SmoothExpr::compose(p01, {w0}) * det12;
    PointForm canon = canonicalize(s);

    for (int probe = 0; probe < 10; ++probe) {
      std::vector<double> m = rng.point(2, -1, 1);
      std::vector<double> v1 = rng.point(2, -1, 1), v2 = rng.point(2, -1, 1);
      // direct sigma evaluation on the tangent pair
      double w = eval(s.base.component(0), m);
      std::vector<double> args = {w, v1[0], v1[1], v2[0], v2[1]};
      double direct = eval(s.sigma, args);
      std::vector<std::vector<double>> vv = {v1, v2};
      double canonical = eval_form(canon, m, vv);
      CHECK(std::abs(direct - canonical) <= 1e-10 * (1 + std::abs(direct)));
    }
  }
}

TEST_CASE("re-presenting a canonical form is value-idempotent") {
  Rng rng(31007);
  PointForm w(plane(), 2, {{X * Y + 0.5, {0, 1}}});
  SigmaPresentedForm again = present_as_sigma(w);
  CHECK(homogeneity_check(again, 64).pass);
  PointForm w2 = canonicalize(again);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> m = rng.point(2, -1, 1);
    std::vector<double> v1 = rng.point(2, -1, 1), v2 = rng.point(2, -1, 1);
    std::vector<std::vector<double>> vv = {v1, v2};
    CHECK(std::abs(eval_form(w, m, vv) - eval_form(w2, m, vv)) <= 1e-10);
  }
}

TEST_CASE("factorize writes forms as pullbacks") {
  // omega = x dy -> F = (x, y), eta = u1 du2
  PointForm xdy(plane(), 1, {{X, {1}}});
  auto fac = factorize(xdy);
  CHECK(fac.map.output_dim() == 2);
  REQUIRE(fac.eta.terms().size() == 1);
  CHECK(fac.eta.terms()[0].index == std::vector<int>{1});
  double u[] = {0.25, 0.9};
  CHECK(eval(fac.eta.terms()[0].coeff, u) == 0.25);

  // omega = dx -> eta = du1
  PointForm dx(line(), 1, {{SmoothExpr::constant(1), {0}}});
  auto fac1 = factorize(dx);
  REQUIRE(fac1.eta.terms().size() == 1);
  CHECK(fac1.eta.terms()[0].index == std::vector<int>{0});

  // zero form
  auto fac0 = factorize(PointForm::zero(plane(), 1));
  CHECK(fac0.eta.is_zero_form());
}

TEST_CASE("factorize round-trip re-evaluates the form") {
  Rng rng(90210);
  for (int trial = 0; trial < 20; ++trial) {
    PointForm w(plane(), 1,
                {{random_poly(rng, 2, 2, 3), {0}},
                 {random_poly(rng, 2, 2, 3), {1}}});
    auto fac = factorize(w);
    for (int probe = 0; probe < 5; ++probe) {
      std::vector<double> m = rng.point(2, -1, 1);
      std::vector<double> v = rng.point(2, -1, 1);
      // pull eta back through F by hand: eta_{i}(F(m)) d F_i(v)
      auto u = eval(fac.map, m);
      auto J = jacobian(fac.map, m);
      double pulled = 0.0;
      for (const auto& t : fac.eta.terms()) {
        double dFv = 0.0;
        for (int c = 0; c < 2; ++c) dFv += J[t.index[0]][c] * v[c];
        pulled += eval(t.coeff, u) * dFv;
      }
      std::vector<std::vector<double>> vv = {v};
      double direct = eval_form(w, m, vv);
      CHECK(std::abs(pulled - direct) <= 1e-10 * (1 + std::abs(direct)));
    }
  }
}

TEST_CASE("factorize of sigma-derived forms uses the presentation") {
  SigmaPresentedForm s;
  s.space = plane();
  s.base = SmoothMap(2, {});
  s.slots = {{0, 1}, {0, 1}};
  SmoothExpr u11 = SmoothExpr::var(0), u12 = SmoothExpr::var(1);
  SmoothExpr u21 = SmoothExpr::var(2), u22 = SmoothExpr::var(3);
  s.sigma = u11 * u22 - u12 * u21;
  PointForm w = canonicalize(s);
  auto fac = factorize(w);
  Rng rng(1999);
  for (int probe = 0; probe < 10; ++probe) {
    std::vector<double> m = rng.point(2, -1, 1);
    std::vector<double> v1 = rng.point(2, -1, 1), v2 = rng.point(2, -1, 1);
    auto u = eval(fac.map, m);
    auto J = jacobian(fac.map, m);
    double pulled = 0.0;
    for (const auto& t : fac.eta.terms()) {
      double a0 = 0.0, a1 = 0.0, b0 = 0.0, b1 = 0.0;
      for (int c = 0; c < 2; ++c) {
        a0 += J[t.index[0]][c] * v1[c];
        a1 += J[t.index[0]][c] * v2[c];
        b0 += J[t.index[1]][c] * v1[c];
        b1 += J[t.index[1]][c] * v2[c];
      }
      pulled += eval(t.coeff, u) * (a0 * b1 - a1 * b0);
    }
    std::vector<std::vector<double>> vv = {v1, v2};
    double direct = eval_form(w, m, vv);
    CHECK(std::abs(pulled - direct) <= 1e-10 * (1 + std::abs(direct)));
  }
}

TEST_CASE("exterior derivative hand-checks") {
  // d(u1 du2) = du1 ^ du2
  AmbientForm a(2, 1, {{X, {1}}});
  AmbientForm da = exterior_derivative(a);
  REQUIRE(da.terms().size() == 1);
  CHECK(da.terms()[0].index == std::vector<int>{0, 1});
  double u[] = {0.5, 0.5};
  CHECK(eval(da.terms()[0].coeff, u) == 1.0);

  // d(u1 du2 - u2 du1) = 2 du1 ^ du2
  AmbientForm b(2, 1, {{X, {1}}, {SmoothExpr::neg(Y), {0}}});
  AmbientForm db = exterior_derivative(b);
  REQUIRE(db.terms().size() == 1);
  CHECK(db.terms()[0].index == std::vector<int>{0, 1});
  std::vector<std::vector<double>> v = {e1, e2};
  CHECK(eval_form(db, u, v) == 2.0);

  // constant coefficients: d(du1) = 0
  AmbientForm c(2, 1, {{SmoothExpr::constant(1), {0}}});
  CHECK(exterior_derivative(c).is_zero_form());
}

TEST_CASE("dd = 0 on random polynomial forms") {
  Rng rng(60601);
  for (int trial = 0; trial < 25; ++trial) {
    int N = rng.integer(2, 4);
    int k = rng.integer(0, 2);
    std::vector<FormTerm> terms;
    int nterms = rng.integer(1, 3);
    for (int t = 0; t < nterms; ++t) {
      std::vector<int> idx;
      while (static_cast<int>(idx.size()) < k) {
        int c = rng.integer(0, N - 1);
        if (std::find(idx.begin(), idx.end(), c) == idx.end()) idx.push_back(c);
      }
      terms.push_back({random_poly(rng, N, 3, 3), idx});
    }
    AmbientForm w(N, k, terms);
    AmbientForm ddw = exterior_derivative(exterior_derivative(w));
    for (int probe = 0; probe < 25; ++probe) {
      auto u = rng.point(N, -1, 1);
      for (const auto& t : ddw.terms())
        CHECK(std::abs(eval(t.coeff, u)) <= 1e-10);
    }
  }
}

TEST_CASE("restriction through the embedding") {
  // du1 on the real line with generator x: restricts to dx
  AmbientForm du1(1, 1, {{SmoothExpr::constant(1), {0}}});
  PointForm r = restrict_form(du1, line());
  double m[] = {0.4};
  std::vector<std::vector<double>> v = {{1.0}};
  CHECK(eval_form(r, m, v) == 1.0);

  // du1 ^ du2 restricted to the cross evaluates to 1 at the origin on the
  // ambient basis even though the tangent cone is one-dimensional
  AmbientForm du12(2, 2, {{SmoothExpr::constant(1), {0, 1}}});
  PointForm rc = restrict_form(du12, cross());
  double origin[] = {0.0, 0.0};
  std::vector<std::vector<double>> v12 = {e1, e2};
  CHECK(eval_form(rc, origin, v12) == 1.0);

  // zero form restricts to zero
  CHECK(restrict_form(AmbientForm::zero(2, 1), cross()).is_zero_form());

  // restriction needs a bound certificate
  auto unbounded = make_space(1, Membership::all(), {X});
  CHECK_THROWS_AS(restrict_form(du1, unbounded), BoundError);
}

TEST_CASE("pullback along a map commutes with evaluation") {
  // chi = u1 du2, F(t1,t2) = (t1^2, t1 t2)
  AmbientForm chi(2, 1, {{X, {1}}});
  SmoothMap F(2, {X * X, X * Y});
  AmbientForm pulled = pullback_along(chi, F);
  CHECK(pulled.coord_count() == 2);

  Rng rng(11211);
  for (int probe = 0; probe < 20; ++probe) {
    auto t = rng.point(2, 0.05, 0.95);
    auto v = rng.point(2, -1, 1);
    // direct: chi_{F(t)}(TF v)
    auto u = eval(F, t);
    auto J = jacobian(F, t);
    std::vector<double> Jv = {J[0][0] * v[0] + J[0][1] * v[1],
                              J[1][0] * v[0] + J[1][1] * v[1]};
    std::vector<std::vector<double>> vv = {Jv};
    double direct = eval_form(chi, u, vv);
    std::vector<std::vector<double>> tv = {v};
    double via_pull = eval_form(pulled, t, tv);
    CHECK(std::abs(direct - via_pull) <= 1e-10 * (1 + std::abs(direct)));
  }
}
