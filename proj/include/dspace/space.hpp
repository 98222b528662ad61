// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dspace/smoothfn.hpp"

namespace dspace {

/// Carriers are decidable on doubles:
///  - All: every point of R^d.
///  - Rational: each coordinate is reconstructible as p/q with q <= 1e6
///    (continued fractions, exact round-trip) or is a dyadic with <= 40
///    fraction bits. Mathematically a subset of Q; random doubles are
///    rejected.
///  - Dyadic: each coordinate is k/2^40 for integer k.
///  - ZeroSet: |h_j(x)| <= tol for every listed expression.
///  - SqrtRational: scalar x in (0,1) whose square is within a few ulps of a
///    rational with denominator <= 1e6.
enum class MembershipKind { All, Rational, Dyadic, ZeroSet, SqrtRational };

struct Membership {
  MembershipKind kind = MembershipKind::All;
  std::vector<SmoothExpr> zero_exprs;
  double zero_tol = 1e-9;

  static Membership all();
  static Membership rational();
  static Membership dyadic();
  static Membership zero_set(std::vector<SmoothExpr> exprs, double tol = 1e-9);
  static Membership sqrt_rational();

  bool contains(std::span<const double> x) const;
  std::string describe() const;
};

/// Best rational approximation p/q of x with q <= max_den, via continued
/// fraction convergents.
struct RationalApprox {
  long long num = 0;
  long long den = 1;
  double value = 0.0;
  double error = 0.0;
};
std::optional<RationalApprox> nearest_rational(double x, long long max_den);

/// True when some p/q with q <= max_den rounds to exactly x.
bool recognizable_rational(double x, long long max_den = 1000000);

/// True when x = k / 2^bits exactly.
bool is_dyadic(double x, int bits = 40);

/// A differential space presented inside an ambient R^d: a membership
/// oracle for the carrier set M and a finite family of generator functions.
class DifferentialSpace {
public:
  DifferentialSpace(int ambient_dim, Membership membership,
                    std::vector<SmoothExpr> generators, bool bounded);

  int ambient_dim() const { return ambient_dim_; }
  const Membership& membership() const { return membership_; }
  const std::vector<SmoothExpr>& generators() const { return generators_; }
  int generator_count() const { return static_cast<int>(generators_.size()); }
  const SmoothExpr& generator(int i) const { return generators_.at(i); }
  /// All |g| <= 1 on M (declared or sample-swept).
  bool bounded() const { return bounded_; }

  /// Deterministic content signature used for cube identity.
  const std::string& signature() const { return signature_; }

private:
  int ambient_dim_;
  Membership membership_;
  std::vector<SmoothExpr> generators_;
  bool bounded_;
  std::string signature_;
};

using SpacePtr = std::shared_ptr<const DifferentialSpace>;

/// Validates generators against the sample sweep (ValidationError if a
/// generator is undefined at a member sample). The bound flag comes from the
/// declared certificate when present, otherwise from sweeping |g| over the
/// member samples (no samples -> unbounded).
SpacePtr make_space(int ambient_dim, Membership membership,
                    std::vector<SmoothExpr> generators,
                    std::optional<bool> declared_bound = {},
                    std::span<const std::vector<double>> samples = {});

/// Coordinates of a member point under the generator embedding into
/// [-1,1]^N; u_i = g_i(m) exactly.
struct EmbeddingImage {
  std::vector<double> source;
  std::vector<double> coords;
};

/// Throws BoundError if |g_i(m)| > 1 + 1e-12; requires a bounded space.
EmbeddingImage embed(const DifferentialSpace& space, std::span<const double> m);

/// A dense subset of [0,1]^n with a deterministic sampler. Samplers return a
/// member point within eps (max-norm) of the target or throw SamplerFailure.
class DenseDomain {
public:
  virtual ~DenseDomain() = default;
  virtual int dim() const = 0;
  virtual bool contains(std::span<const double> p) const = 0;
  virtual std::vector<double> sample(std::span<const double> target,
                                     double eps) const = 0;
  /// The (n-1)-dimensional dense set used by faces. Built-in domains are
  /// coordinate products, so the face set does not depend on the face slot.
  virtual std::shared_ptr<const DenseDomain> face_domain() const = 0;
  virtual std::string signature() const = 0;
};

using DomainPtr = std::shared_ptr<const DenseDomain>;

DomainPtr full_cube_domain(int dim);
/// Rationals in [0,1]^n (or (0,1)^n with exclude_boundary), realized by the
/// Rational carrier above.
DomainPtr rational_domain(int dim, bool exclude_boundary = false);
DomainPtr dyadic_domain(int dim, int bits = 40);
/// The unique point of [0,1]^0; domain of 0-dimensional cubes.
DomainPtr point_domain();

} // namespace dspace
