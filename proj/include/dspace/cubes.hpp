// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dspace/forms.hpp"

namespace dspace {

/// A generalized n-cube: a smooth map from a dense subset D of [0,1]^n into
/// the carrier of a differential space.
struct GeneralizedCube {
  DomainPtr domain;
  SmoothMap map{0, {}};
  SpacePtr space;
  std::string name;

  int dim() const { return domain ? domain->dim() : 0; }
};

GeneralizedCube make_cube(DomainPtr domain, SmoothMap map, SpacePtr space,
                          std::string name = {});

/// Scenario-grade cube validation: samples the domain near grid, random and
/// irrational probe targets and checks that every image point is evaluable
/// and membership-positive.
struct CubeValidation {
  bool ok = true;
  int checked = 0;
  std::vector<std::string> failures; // human-readable, first few only
};
CubeValidation validate_cube(const GeneralizedCube& cube, int grid_per_axis = 9,
                             int random_probes = 16,
                             std::uint64_t seed = 2024);

/// Controls the continuous-extension ladder. At a query point t the engine
/// evaluates f(sample(t, 2^-k)) for k0 <= k <= kmax and accepts when the
/// trailing residuals obey |v_{k+1} - v_k| <= tol_base 2^-k + atol_floor.
struct ExtensionConfig {
  int k0 = 4;
  int kmax = 24;
  double tol_base = 10.0;
  double atol_floor = 1e-9;
  double divergence_bound = 1e9;
  int probe_points_per_axis = 9; // certification grid, boundary included
  int tail_window = 4;           // rungs that must satisfy the tolerance
  bool force_sampler = false;    // testing: skip the direct-evaluation path
};

struct ExtensionWitness {
  std::vector<double> target;
  std::vector<int> levels;
  std::vector<double> values;
  std::vector<double> residuals;
  std::string reason; // "bound-exceeded" | "divergence" | "cauchy-stall"
};

struct PointCertificate {
  std::vector<double> target;
  bool direct = false;   // direct evaluation (expression covers the point)
  double residual = 0.0; // final ladder residual when sampled
};

/// Outcome of extending a function from the dense set to the closed cube.
/// When extended, evaluate() serves arbitrary points of [0,1]^n (direct
/// evaluation where the expression allows it, the sampler ladder elsewhere)
/// and agrees with f on domain points exactly.
class ExtensionResult {
public:
  bool extended() const { return extended_; }
  const std::vector<PointCertificate>& certificates() const { return certs_; }
  const std::optional<ExtensionWitness>& witness() const { return witness_; }
  double evaluate(std::span<const double> t) const;

private:
  friend ExtensionResult extend(const SmoothExpr&, const DomainPtr&,
                                const ExtensionConfig&);
  bool extended_ = false;
  std::vector<PointCertificate> certs_;
  std::optional<ExtensionWitness> witness_;
  SmoothExpr f_;
  DomainPtr domain_;
  ExtensionConfig cfg_;
};

/// Certifies f's continuous extension on a probe grid over the closed cube.
ExtensionResult extend(const SmoothExpr& f, const DomainPtr& domain,
                       const ExtensionConfig& cfg = {});

/// Pullback of a point form along a cube: coefficients indexed by increasing
/// tuples of cube axes. For top degree (k = n) the single coefficient is the
/// density against dt^1 ^ ... ^ dt^n.
struct PulledBackForm {
  GeneralizedCube cube;
  int degree = 0;
  std::vector<FormTerm> coefficients; // index tuples over cube axes
  SmoothExpr top_coefficient() const; // density for degree == dim
};

/// deg omega may be any k <= n; integration uses k = n.
PulledBackForm pullback(const GeneralizedCube& cube, const PointForm& omega);

/// Face (i, alpha): inserts the constant alpha in axis slot i (0-based) and
/// composes with the extended cube map. Components that the expression
/// covers on the closed slab substitute exactly; otherwise the extension
/// engine supplies values (0-dimensional faces only). Throws
/// ExtensionRequired when the map does not extend to the slab or the
/// extension is not representable.
GeneralizedCube face(const GeneralizedCube& cube, int axis, int alpha,
                     const ExtensionConfig& cfg = {});

/// Extendability certificates for a cube w.r.t. its space's generators:
/// (a) uniform: each g o phi extends; (b) tangent: each d(g o phi)/dt^j
/// extends; (c) per supplied form: the pullback coefficients extend.
struct ExtendabilityReport {
  struct Item {
    std::string what;
    bool pass = false;
    std::optional<ExtensionWitness> witness;
  };
  std::vector<Item> uniform;
  std::vector<Item> tangent;
  std::vector<Item> forms;

  bool uniform_pass() const;
  bool tangent_pass() const;
  bool forms_pass() const;
};

ExtendabilityReport extendability_report(const GeneralizedCube& cube,
                                         std::span<const PointForm> forms = {},
                                         const ExtensionConfig& cfg = {});

} // namespace dspace
