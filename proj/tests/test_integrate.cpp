// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dspace/integrate.hpp"
#include "test_support.hpp"

using namespace dspace;
using testsupport::Rng;
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

} // namespace

TEST_CASE("quadrature basics") {
  auto one = [](std::span<const double>) { return 1.0; };
  CHECK(quadrature(one, 2) == doctest::Approx(1.0).epsilon(1e-14));

  auto cubic = [](std::span<const double> t) { return 2 * t[0] * t[0] * t[0]; };
  CHECK(quadrature(cubic, 1) == doctest::Approx(0.5).epsilon(1e-13));

  auto xy = [](std::span<const double> t) { return t[0] * t[1]; };
  CHECK(quadrature(xy, 2) == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("gauss order 8 is exact through total degree 15 on the square") {
  QuadConfig cfg; // order 8
  for (int a = 0; a <= 15; ++a) {
    for (int b = 0; a + b <= 15; ++b) {
      auto mono = [&](std::span<const double> t) {
        return std::pow(t[0], a) * std::pow(t[1], b);
      };
      double exact = 1.0 / ((a + 1) * (b + 1));
      CHECK(std::abs(quadrature(mono, 2, cfg) - exact) <= 1e-12);
    }
  }
}

TEST_CASE("adaptive subdivision handles kinks and reports non-convergence") {
  double c = 0.3183098861837907;
  auto kink = [&](std::span<const double> t) { return std::abs(t[0] - c); };
  // split antiderivative: (c^2 + (1-c)^2) / 2
  double exact = (c * c + (1 - c) * (1 - c)) / 2.0;
  QuadConfig deep;
  deep.max_depth = 16;
  deep.rtol = 1e-6;
  deep.atol = 1e-8;
  CHECK(quadrature(kink, 1, deep) == doctest::Approx(exact).epsilon(1e-5));

  QuadConfig strict;
  strict.max_depth = 0;
  strict.rtol = 1e-14;
  strict.atol = 1e-16;
  auto rough = [&](std::span<const double> t) {
    return t[0] < c ? 0.0 : 1.0;
  };
  CHECK_THROWS_AS(quadrature(rough, 1, strict), NoConvergence);
}

TEST_CASE("integral of x dx over t -> t^2") {
  auto curve = make_cube(full_cube_domain(1), SmoothMap(1, {X * X}), line(), "t2");
  PointForm xdx(line(), 1, {{X, {0}}});
  CHECK(integrate_cube(curve, xdx) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("degree mismatch integrates to exactly zero") {
  auto seg = make_cube(full_cube_domain(1), SmoothMap::identity(1), line());
  PointForm zero2(line(), 0, {{X, {}}});
  CHECK(integrate_cube(seg, zero2) == 0.0);
}

TEST_CASE("constant cubes integrate every form to exactly zero") {
  auto c = make_cube(rational_domain(1),
                     SmoothMap(1, {SmoothExpr::constant(0.5)}), rational_line(),
                     "const");
  PointForm d_id(rational_line(), 1, {{SmoothExpr::constant(1), {0}}});
  PointForm xdx(rational_line(), 1, {{X, {0}}});
  CHECK(integrate_cube(c, d_id) == 0.0);
  CHECK(integrate_cube(c, xdx) == 0.0);
}

TEST_CASE("sqrt cube refuses the identity differential") {
  auto sq = make_cube(rational_domain(1, true),
                      SmoothMap(1, {SmoothExpr::sqrt_of(X)}), sqrt_space(),
                      "sqrt");
  PointForm d_id(sqrt_space(), 1, {{SmoothExpr::constant(1), {0}}});
  CHECK_THROWS_AS(integrate_cube(sq, d_id), NotIntegrable);
  try {
    integrate_cube(sq, d_id);
  } catch (const NotIntegrable& e) {
    CHECK(std::string(e.what()).find("divergence") != std::string::npos);
  }
}

TEST_CASE("chain integrals are linear") {
  auto curve = make_cube(full_cube_domain(1), SmoothMap(1, {X * X}), line(), "t2");
  PointForm xdx(line(), 1, {{X, {0}}});
  Chain twice = scale(2.0, Chain::single(curve));
  CHECK(integrate_chain(twice, xdx) == doctest::Approx(1.0).epsilon(1e-12));

  Chain zero = add(Chain::single(curve), scale(-1.0, Chain::single(curve)));
  CHECK(integrate_chain(zero, xdx) == 0.0);
  CHECK(integrate_chain(Chain::zero(1), xdx) == 0.0);
}

TEST_CASE("green identity on the unit square") {
  auto sq = make_cube(full_cube_domain(2), SmoothMap::identity(2), plane(), "sq");
  PointForm eta(plane(), 1, {{X, {1}}});       // x dy
  AmbientForm eta_ext(2, 1, {{X, {1}}});       // u1 du2
  auto rep = verify_stokes(Chain::single(sq), eta, eta_ext, {}, 1e-8);
  CHECK(rep.pass);
  CHECK(std::abs(rep.lhs - 1.0) <= 1e-8);
  CHECK(std::abs(rep.rhs - 1.0) <= 1e-8);
  CHECK(rep.faces.size() == 4);
}

TEST_CASE("exact ambient one-forms have vanishing boundary integrals") {
  auto sq = make_cube(full_cube_domain(2), SmoothMap::identity(2), plane(), "sq");
  PointForm eta(plane(), 1, {{SmoothExpr::constant(1), {0}}}); // dx
  AmbientForm eta_ext(2, 1, {{SmoothExpr::constant(1), {0}}});
  auto rep = verify_stokes(Chain::single(sq), eta, eta_ext, {}, 1e-8);
  CHECK(rep.pass);
  CHECK(std::abs(rep.lhs) <= 1e-10);
  CHECK(std::abs(rep.rhs) <= 1e-10);
}

TEST_CASE("fundamental theorem on a segment") {
  auto seg = make_cube(full_cube_domain(1), SmoothMap(1, {X * X}), line(), "t2");
  // eta = f with f = u1^2: integral over the boundary is f(1) - f(0) = 1
  PointForm eta(line(), 0, {{X * X, {}}});
  AmbientForm eta_ext(1, 0, {{X * X, {}}});
  auto rep = verify_stokes(Chain::single(seg), eta, eta_ext, {}, 1e-8);
  CHECK(rep.pass);
  CHECK(rep.lhs == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(rep.rhs == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mismatched extensions are rejected") {
  auto sq = make_cube(full_cube_domain(2), SmoothMap::identity(2), plane(), "sq");
  PointForm eta(plane(), 1, {{X, {1}}});
  AmbientForm wrong(2, 1, {{X + 1.0, {1}}});
  CHECK_THROWS_AS(verify_stokes(Chain::single(sq), eta, wrong, {}, 1e-8),
                  ExtensionMismatch);
}

TEST_CASE("pullback commutes with the exterior derivative") {
  AmbientForm chi(2, 1, {{X, {1}}}); // u1 du2
  SmoothMap F(2, {X * X, X * Y});
  auto res = d_commutes_pullback_check(F, chi, 100);
  CHECK(res.pass);
  CHECK(res.max_deviation <= 1e-8);

  auto id = SmoothMap::identity(2);
  auto res_id = d_commutes_pullback_check(id, chi, 50);
  CHECK(res_id.pass);
  CHECK(res_id.max_deviation <= 1e-12);

  // negative control: a sign-corrupted derivative must fail
  AmbientForm pulled = pullback_along(chi, F);
  AmbientForm good = exterior_derivative(pulled);
  AmbientForm bad(good.coord_count(), good.degree(), [&] {
    std::vector<FormTerm> ts;
    for (const auto& t : good.terms())
      ts.push_back({SmoothExpr::neg(t.coeff), t.index});
    return ts;
  }());
  AmbientForm rhs = pullback_along(exterior_derivative(chi), F);
  Rng rng(2345);
  double dev = 0.0;
  for (int s = 0; s < 50; ++s) {
    auto t = rng.point(2, 0.05, 0.95);
    std::vector<std::vector<double>> vecs = {rng.point(2, -1, 1),
                                             rng.point(2, -1, 1)};
    dev = std::max(dev, std::abs(eval_form(bad, t, vecs) -
                                 eval_form(rhs, t, vecs)));
  }
  CHECK(dev > 1e-3);
}

TEST_CASE("random stokes instances agree across both sides") {
  Rng rng(112233);
  for (int inst = 0; inst < 5; ++inst) {
    int N = rng.integer(2, 3);
    std::vector<SmoothExpr> gens;
    for (int i = 0; i < N; ++i) gens.push_back(SmoothExpr::var(i));
    auto space = make_space(N, Membership::all(), gens, true);

    std::vector<SmoothExpr> comps;
    for (int c = 0; c < N; ++c)
      comps.push_back(random_poly(rng, 2, 2, 3, -0.4, 0.4));
    auto cube = make_cube(full_cube_domain(2), SmoothMap(2, comps), space, "rnd");

    std::vector<FormTerm> terms;
    for (int i = 0; i < N; ++i)
      terms.push_back({random_poly(rng, N, 3, 2, -1.0, 1.0), {i}});
    AmbientForm eta_ext(N, 1, terms);
    PointForm eta = restrict_form(eta_ext, space);

    auto rep = verify_stokes(Chain::single(cube), eta, eta_ext, {}, 1e-6);
    CHECK(rep.pass);
    CHECK(rep.abs_diff <= 1e-6);
  }
}
