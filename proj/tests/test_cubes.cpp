// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dspace/cubes.hpp"
#include "test_support.hpp"

using namespace dspace;
using testsupport::Rng;
using testsupport::central_diff_expr;
using testsupport::random_poly;

namespace {

SmoothExpr X = SmoothExpr::var(0);
SmoothExpr Y = SmoothExpr::var(1);

SpacePtr line() {
  static SpacePtr s = make_space(1, Membership::all(), {X}, true);
  return s;
}
SpacePtr plane() {
  static SpacePtr s = make_space(2, Membership::all(), {X, Y}, true);
  return s;
}
SpacePtr rational_line() {
  static SpacePtr s = make_space(1, Membership::rational(), {X});
  return s;
}
SpacePtr sqrt_space() {
  static SpacePtr s = make_space(1, Membership::sqrt_rational(), {X}, true);
  return s;
}

GeneralizedCube identity_square() {
  return make_cube(full_cube_domain(2), SmoothMap::identity(2), plane(), "square");
}

} // namespace

TEST_CASE("cube construction validates the map against domain and space") {
  CHECK_THROWS_AS(make_cube(full_cube_domain(1), SmoothMap::identity(2), plane()),
                  ValidationError);
  CHECK_THROWS_AS(make_cube(full_cube_domain(2), SmoothMap::identity(2), line()),
                  ValidationError);
  auto c = identity_square();
  CHECK(c.dim() == 2);
}

TEST_CASE("membership validation separates constant from moving cubes") {
  // constant cube into the rationals passes
  auto c = make_cube(full_cube_domain(1), SmoothMap(1, {SmoothExpr::constant(0.5)}),
                     rational_line(), "const");
  CHECK(validate_cube(c).ok);

  // the identity lands on irrational probe points and fails
  auto ramp = make_cube(full_cube_domain(1), SmoothMap(1, {X}), rational_line(),
                        "ramp");
  CHECK_FALSE(validate_cube(ramp).ok);

  // an affine map with irrational offset fails too
  auto affine = make_cube(
      full_cube_domain(1),
      SmoothMap(1, {X * (1.0 / 3.0) + 0.25}), rational_line(), "affine");
  CHECK_FALSE(validate_cube(affine).ok);

  // sqrt cube into the sqrt-rational space passes on its rational domain
  auto sq = make_cube(rational_domain(1, true),
                      SmoothMap(1, {SmoothExpr::sqrt_of(X)}), sqrt_space(),
                      "sqrt");
  CHECK(validate_cube(sq).ok);
}

TEST_CASE("faces follow the insertion formula") {
  auto sq = identity_square();
  // (1, 0) face of the identity square: x -> (0, x)
  auto f10 = face(sq, 0, 0);
  CHECK(f10.dim() == 1);
  double t[] = {0.7};
  auto img = eval(f10.map, t);
  CHECK(img[0] == 0.0);
  CHECK(img[1] == 0.7);

  // (2, 1) face: x -> (x, 1)
  auto f21 = face(sq, 1, 1);
  auto img2 = eval(f21.map, t);
  CHECK(img2[0] == 0.7);
  CHECK(img2[1] == 1.0);

  // 1-cube t -> t^2, face (1,1): the 0-cube at 1
  auto curve = make_cube(full_cube_domain(1), SmoothMap(1, {X * X}), line());
  auto endpoint = face(curve, 0, 1);
  CHECK(endpoint.dim() == 0);
  std::vector<double> none;
  CHECK(eval(endpoint.map, none)[0] == 1.0);
}

TEST_CASE("face composition identities on a grid") {
  // I_(i,a)^n o I_(j-1,b)^(n-1) = I_(j,b)^n o I_(i,a)^(n-1) for i < j
  auto cube3 = make_cube(full_cube_domain(3), SmoothMap::identity(3),
                         make_space(3, Membership::all(),
                                    {X, Y, SmoothExpr::var(2)}, true),
                         "cube3");
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      for (int a = 0; a <= 1; ++a)
        for (int b = 0; b <= 1; ++b) {
          auto lhs = face(face(cube3, i, a), j - 1, b);
          auto rhs = face(face(cube3, j, b), i, a);
          for (double t = 0.0; t <= 1.0; t += 0.25) {
            double p[] = {t};
            auto u = eval(lhs.map, p);
            auto v = eval(rhs.map, p);
            for (int c = 0; c < 3; ++c) CHECK(std::abs(u[c] - v[c]) <= 1e-12);
          }
        }
}

TEST_CASE("pullback densities") {
  // identity pullback of dx
  auto seg = make_cube(full_cube_domain(1), SmoothMap::identity(1), line());
  PointForm dx(line(), 1, {{SmoothExpr::constant(1), {0}}});
  auto pb = pullback(seg, dx);
  double t[] = {0.3};
  CHECK(eval(pb.top_coefficient(), t) == 1.0);

  // phi(t) = t^2 against x dx: density 2t^3
  auto curve = make_cube(full_cube_domain(1), SmoothMap(1, {X * X}), line());
  PointForm xdx(line(), 1, {{X, {0}}});
  auto pb2 = pullback(curve, xdx);
  for (double tv : {0.1, 0.5, 0.9}) {
    double p[] = {tv};
    CHECK(eval(pb2.top_coefficient(), p) ==
          doctest::Approx(2 * tv * tv * tv).epsilon(1e-13));
  }

  // identity square against dx ^ dy: unit Jacobian
  auto sq = identity_square();
  PointForm dxdy(plane(), 2, {{SmoothExpr::constant(1), {0, 1}}});
  auto pb3 = pullback(sq, dxdy);
  double q[] = {0.4, 0.6};
  CHECK(eval(pb3.top_coefficient(), q) == 1.0);

  // degree above the cube dimension pulls back to nothing
  auto pb4 = pullback(seg, PointForm(line(), 2, {}));
  CHECK(pb4.coefficients.empty());
}

TEST_CASE("pullback is linear in the form") {
  Rng rng(321321);
  auto sq = identity_square();
  for (int trial = 0; trial < 10; ++trial) {
    PointForm w1(plane(), 2, {{random_poly(rng, 2, 2, 3), {0, 1}}});
    PointForm w2(plane(), 2, {{random_poly(rng, 2, 2, 3), {0, 1}}});
    double a = rng.uniform(-2, 2);
    PointForm comb(plane(), 2,
                   {{SmoothExpr::constant(a) * w1.terms()[0].coeff, {0, 1}},
                    {w2.terms()[0].coeff, {0, 1}}});
    auto pc = pullback(sq, comb);
    auto p1 = pullback(sq, w1);
    auto p2 = pullback(sq, w2);
    for (int probe = 0; probe < 5; ++probe) {
      auto t = rng.point(2, 0, 1);
      double lhs = eval(pc.top_coefficient(), t);
      double rhs = a * eval(p1.top_coefficient(), t) + eval(p2.top_coefficient(), t);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * (1 + std::abs(rhs)));
    }
  }
}

TEST_CASE("pullback of a generator wedge equals the composite Jacobian determinant") {
  // deformed square into the plane
  SmoothMap phi(2, {X * X + 0.5 * Y, Y + 0.25 * X * Y});
  auto cube = make_cube(full_cube_domain(2), phi, plane(), "deformed");
  PointForm dxdy(plane(), 2, {{SmoothExpr::constant(1), {0, 1}}});
  auto pb = pullback(cube, dxdy);
  Rng rng(888);
  for (int probe = 0; probe < 20; ++probe) {
    auto t = rng.point(2, 0, 1);
    auto J = jacobian(phi, t);
    double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    CHECK(std::abs(eval(pb.top_coefficient(), t) - det) <= 1e-10 * (1 + std::abs(det)));
  }
}

TEST_CASE("extension: expression-covered functions evaluate directly") {
  auto dom = rational_domain(1);
  SmoothExpr f = X; // restriction of the identity to the rationals
  auto ext = extend(f, dom);
  REQUIRE(ext.extended());
  double t[] = {1.0 / 3.141592653589793};
  CHECK(ext.evaluate(t) == t[0]);

  // constants extend to themselves
  auto extc = extend(SmoothExpr::constant(2.5), dom);
  REQUIRE(extc.extended());
  CHECK(extc.evaluate(t) == 2.5);
}

TEST_CASE("extension consistency with direct evaluation") {
  Rng rng(5544);
  auto dom = rational_domain(1);
  for (int trial = 0; trial < 10; ++trial) {
    SmoothExpr f = random_poly(rng, 1, 3, 4);
    auto ext = extend(f, dom);
    REQUIRE(ext.extended());
    for (int probe = 0; probe < 10; ++probe) {
      double t[] = {rng.uniform(0, 1)};
      CHECK(std::abs(ext.evaluate(t) - eval(f, t)) <= 1e-9);
    }
  }
}

TEST_CASE("sampler ladder converges for forced-sampler mode") {
  ExtensionConfig cfg;
  cfg.force_sampler = true;
  auto dom = rational_domain(1);
  auto ext = extend(X, dom, cfg);
  REQUIRE(ext.extended());
  double t[] = {1.0 / 3.141592653589793};
  CHECK(std::abs(ext.evaluate(t) - 0.3183098861837907) <= 1e-6);
}

TEST_CASE("extension refuses divergent densities") {
  // 1/(2 sqrt t) on the open rational interval: blows up at 0
  auto dom = rational_domain(1, true);
  SmoothExpr f = SmoothExpr::constant(1.0) /
                 (2.0 * SmoothExpr::sqrt_of(X));
  auto ext = extend(f, dom);
  CHECK_FALSE(ext.extended());
  REQUIRE(ext.witness().has_value());
  CHECK(ext.witness()->reason == "divergence");
  CHECK(ext.witness()->target[0] == 0.0);
  // witness values grow like 2^(k/2)
  const auto& w = *ext.witness();
  REQUIRE(w.values.size() >= 2);
  CHECK(w.values.back() > w.values.front());
}

TEST_CASE("extension accepts bounded removable singularities") {
  // t log t extends by 0 at the origin
  auto dom = rational_domain(1, true);
  SmoothExpr f = X * SmoothExpr::log_of(X);
  auto ext = extend(f, dom);
  REQUIRE(ext.extended());
  double t[] = {0.0};
  CHECK(std::abs(ext.evaluate(t)) <= 1e-5);
}

TEST_CASE("extendability report for the sqrt cube") {
  auto sq = make_cube(rational_domain(1, true),
                      SmoothMap(1, {SmoothExpr::sqrt_of(X)}), sqrt_space(),
                      "sqrt");
  PointForm d_id(sqrt_space(), 1, {{SmoothExpr::constant(1), {0}}});
  std::vector<PointForm> forms = {d_id};
  auto rep = extendability_report(sq, forms);
  CHECK(rep.uniform_pass());
  CHECK_FALSE(rep.tangent_pass());
  CHECK_FALSE(rep.forms_pass());
  // a tangent failure carries a witness at the origin
  bool found = false;
  for (const auto& item : rep.tangent)
    if (!item.pass && item.witness) {
      found = true;
      CHECK(item.witness->target[0] == 0.0);
    }
  CHECK(found);
}

TEST_CASE("extendability report is all-pass for polynomial cubes") {
  auto sq = identity_square();
  PointForm dxdy(plane(), 2, {{SmoothExpr::constant(1), {0, 1}}});
  std::vector<PointForm> forms = {dxdy};
  auto rep = extendability_report(sq, forms);
  CHECK(rep.uniform_pass());
  CHECK(rep.tangent_pass());
  CHECK(rep.forms_pass());
}

TEST_CASE("constant cubes pull every form back to zero") {
  auto c = make_cube(rational_domain(1), SmoothMap(1, {SmoothExpr::constant(0.5)}),
                     rational_line(), "const");
  PointForm dx(rational_line(), 1, {{SmoothExpr::constant(1), {0}}});
  auto pb = pullback(c, dx);
  CHECK(pb.coefficients.empty());
  CHECK(pb.top_coefficient().is_zero());

  auto rep = extendability_report(c, std::vector<PointForm>{dx});
  CHECK(rep.uniform_pass());
  CHECK(rep.tangent_pass());
  CHECK(rep.forms_pass());
}
