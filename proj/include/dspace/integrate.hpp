// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "dspace/chains.hpp"

namespace dspace {

/// Tensor-product Gauss-Legendre with adaptive dyadic subdivision.
struct QuadConfig {
  int order = 8;
  int max_depth = 10;
  double atol = 1e-10;
  double rtol = 1e-8;
};

/// Integrates f over [0,1]^n. Subdivides a box when the refined estimate
/// moves by more than atol_box + rtol |I|; throws NoConvergence when the
/// depth budget runs out.
double quadrature(const std::function<double(std::span<const double>)>& f,
                  int n, const QuadConfig& cfg = {});

struct IntegrateConfig {
  QuadConfig quad;
  ExtensionConfig ext;
};

/// Integral of a point n-form over an n-cube: continuous extension of the
/// pullback density, then quadrature. Degree mismatch integrates to exactly
/// zero; a non-extendable density throws NotIntegrable with the witness
/// attached to the message. Dimension 0 returns the extended point value.
double integrate_cube(const GeneralizedCube& cube, const PointForm& omega,
                      const IntegrateConfig& cfg = {});

/// Linear extension over the chain's support; NotIntegrable names the cube.
double integrate_chain(const Chain& chain, const PointForm& omega,
                       const IntegrateConfig& cfg = {});

/// Both sides of the boundary/derivative identity for one chain.
struct StokesReport {
  double lhs = 0.0; // integral of the restricted form over the boundary
  double rhs = 0.0; // integral of the restricted exterior derivative
  struct FaceContribution {
    std::string name;
    double coeff = 0.0;
    double integral = 0.0;
  };
  std::vector<FaceContribution> faces;
  double abs_diff = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  int extension_certificates = 0; // probe points certified across all sides
};

/// Checks restrict(eta_ext) against eta on probe points (ExtensionMismatch
/// beyond 1e-9), then evaluates both sides: the boundary integral of the
/// restricted form and the chain integral of the restricted exterior
/// derivative.
StokesReport verify_stokes(const Chain& chain, const PointForm& eta,
                           const AmbientForm& eta_ext,
                           const IntegrateConfig& cfg = {},
                           double tolerance = 1e-6);

/// Compares d(F* chi) with F*(d chi) at sampled points and tangent tuples.
struct DCommuteResult {
  bool pass = false;
  double max_deviation = 0.0;
  int samples = 0;
};
DCommuteResult d_commutes_pullback_check(const SmoothMap& F,
                                         const AmbientForm& chi, int samples,
                                         std::uint64_t seed = 4242,
                                         double tol = 1e-8);

} // namespace dspace
