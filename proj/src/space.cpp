// SPDX-License-Identifier: Apache-2.0
#include "dspace/space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dspace {

// ---------------------------------------------------------------------------
// Rational and dyadic recognition

std::optional<RationalApprox> nearest_rational(double x, long long max_den) {
  if (!std::isfinite(x)) return std::nullopt;
  bool negative = x < 0;
  double ax = std::abs(x);

  // Continued fraction convergents h/k of ax.
  long long h0 = 1, k0 = 0; // h_{-1}, k_{-1}
  long long h1 = static_cast<long long>(std::floor(ax)), k1 = 1;
  double frac = ax - std::floor(ax);
  RationalApprox best;
  best.num = h1;
  best.den = 1;
  best.value = static_cast<double>(h1);
  best.error = std::abs(ax - best.value);

  for (int iter = 0; iter < 64; ++iter) {
    if (frac <= 0) break;
    double inv = 1.0 / frac;
    double fl = std::floor(inv);
    if (fl > 9.0e18) break;
    long long a = static_cast<long long>(fl);
    long long h2 = a * h1 + h0;
    long long k2 = a * k1 + k0;
    if (k2 > max_den || k2 <= 0 || h2 < 0) break;
    double v = static_cast<double>(h2) / static_cast<double>(k2);
    double err = std::abs(ax - v);
    if (err < best.error) {
      best.num = h2;
      best.den = k2;
      best.value = v;
      best.error = err;
    }
    h0 = h1; k0 = k1; h1 = h2; k1 = k2;
    frac = inv - fl;
  }
  if (negative) {
    best.num = -best.num;
    best.value = -best.value;
  }
  best.error = std::abs(x - best.value);
  return best;
}

bool recognizable_rational(double x, long long max_den) {
  auto r = nearest_rational(x, max_den);
  if (!r) return false;
  return r->value == x;
}

bool is_dyadic(double x, int bits) {
  if (!std::isfinite(x)) return false;
  double scaled = std::ldexp(x, bits);
  if (std::abs(scaled) > 9.0e15) return false;
  return scaled == std::floor(scaled);
}

namespace {

// The Rational carrier accepts small-denominator reconstructions and short
// dyadics; both are rationals, and the union keeps samplers total at every
// resolution the extension ladder uses.
bool rational_member(double x) {
  return is_dyadic(x, 40) || recognizable_rational(x, 1000000);
}

bool sqrt_rational_member(double x) {
  if (!(x > 0.0 && x < 1.0)) return false;
  double y = x * x;
  // the square must land on the Rational carrier up to squaring roundoff
  double ulps = 8.0 * 2.220446049250313e-16 * std::max(y, 1e-30);
  if (auto r = nearest_rational(y, 1000000); r && r->error <= ulps) return true;
  double dy = std::ldexp(std::round(std::ldexp(y, 40)), -40);
  return std::abs(y - dy) <= ulps;
}

} // namespace

// ---------------------------------------------------------------------------
// Membership

Membership Membership::all() { return {MembershipKind::All, {}, 0.0}; }
Membership Membership::rational() { return {MembershipKind::Rational, {}, 0.0}; }
Membership Membership::dyadic() { return {MembershipKind::Dyadic, {}, 0.0}; }
Membership Membership::zero_set(std::vector<SmoothExpr> exprs, double tol) {
  return {MembershipKind::ZeroSet, std::move(exprs), tol};
}
Membership Membership::sqrt_rational() {
  return {MembershipKind::SqrtRational, {}, 0.0};
}

bool Membership::contains(std::span<const double> x) const {
  switch (kind) {
    case MembershipKind::All:
      return true;
    case MembershipKind::Rational:
      return std::all_of(x.begin(), x.end(), rational_member);
    case MembershipKind::Dyadic:
      return std::all_of(x.begin(), x.end(),
                         [](double v) { return is_dyadic(v, 40); });
    case MembershipKind::ZeroSet:
      for (const auto& h : zero_exprs) {
        double v;
        try {
          v = eval(h, x);
        } catch (const DomainError&) {
          return false;
        }
        if (std::abs(v) > zero_tol) return false;
      }
      return true;
    case MembershipKind::SqrtRational:
      return x.size() == 1 && sqrt_rational_member(x[0]);
  }
  return false;
}

std::string Membership::describe() const {
  switch (kind) {
    case MembershipKind::All: return "all";
    case MembershipKind::Rational: return "rational";
    case MembershipKind::Dyadic: return "dyadic";
    case MembershipKind::SqrtRational: return "sqrt_rational";
    case MembershipKind::ZeroSet: {
      std::ostringstream os;
      os << "zero_set[";
      for (std::size_t i = 0; i < zero_exprs.size(); ++i) {
        if (i) os << ',';
        os << zero_exprs[i].key();
      }
      os << "]tol=" << zero_tol;
      return os.str();
    }
  }
  return "?";
}

// ---------------------------------------------------------------------------
// DifferentialSpace

DifferentialSpace::DifferentialSpace(int ambient_dim, Membership membership,
                                     std::vector<SmoothExpr> generators,
                                     bool bounded)
    : ambient_dim_(ambient_dim),
      membership_(std::move(membership)),
      generators_(std::move(generators)),
      bounded_(bounded) {
  std::ostringstream os;
  os << "space{d=" << ambient_dim_ << ";m=" << membership_.describe() << ";g=";
  for (std::size_t i = 0; i < generators_.size(); ++i) {
    if (i) os << ',';
    os << generators_[i].key();
  }
  os << (bounded_ ? ";bounded" : ";unbounded") << '}';
  signature_ = os.str();
}

SpacePtr make_space(int ambient_dim, Membership membership,
                    std::vector<SmoothExpr> generators,
                    std::optional<bool> declared_bound,
                    std::span<const std::vector<double>> samples) {
  if (ambient_dim < 1)
    throw ValidationError("make_space: ambient dimension must be >= 1");
  if (generators.empty())
    throw ValidationError("make_space: generator family must be nonempty");
  for (const auto& g : generators)
    if (g.arity() > ambient_dim)
      throw ValidationError("make_space: generator arity exceeds ambient dim");

  bool swept_bound = !samples.empty();
  for (const auto& s : samples) {
    if (static_cast<int>(s.size()) != ambient_dim)
      throw ValidationError("make_space: sample point has wrong dimension");
    if (!membership.contains(s)) continue;
    for (const auto& g : generators) {
      double v;
      try {
        v = eval(g, s);
      } catch (const DomainError& err) {
        throw ValidationError(std::string("make_space: generator undefined at "
                                          "a member sample point: ") +
                              err.what());
      }
      if (std::abs(v) > 1.0 + 1e-12) swept_bound = false;
    }
  }
  bool bounded = declared_bound.value_or(swept_bound);
  if (declared_bound.has_value() && *declared_bound) {
    // the declared certificate must not be contradicted by the samples
    for (const auto& s : samples) {
      if (!membership.contains(s)) continue;
      for (const auto& g : generators)
        if (std::abs(eval(g, s)) > 1.0 + 1e-12)
          throw ValidationError(
              "make_space: declared bound violated at a sample point");
    }
  }
  return std::make_shared<DifferentialSpace>(ambient_dim, std::move(membership),
                                             std::move(generators), bounded);
}

EmbeddingImage embed(const DifferentialSpace& space, std::span<const double> m) {
  if (!space.bounded())
    throw BoundError("embed: space has no bound certificate for its generators");
  EmbeddingImage img;
  img.source.assign(m.begin(), m.end());
  img.coords.reserve(space.generator_count());
  for (const auto& g : space.generators()) {
    double u = eval(g, m);
    if (std::abs(u) > 1.0 + 1e-12)
      throw BoundError("embed: generator exceeds bound at the point");
    img.coords.push_back(u);
  }
  return img;
}

// ---------------------------------------------------------------------------
// Dense domains

namespace {

class FullCubeDomain final : public DenseDomain {
public:
  explicit FullCubeDomain(int dim) : dim_(dim) {}
  int dim() const override { return dim_; }
  bool contains(std::span<const double> p) const override {
    if (static_cast<int>(p.size()) != dim_) return false;
    return std::all_of(p.begin(), p.end(),
                       [](double v) { return v >= 0.0 && v <= 1.0; });
  }
  std::vector<double> sample(std::span<const double> target,
                             double eps) const override {
    if (static_cast<int>(target.size()) != dim_ || eps <= 0)
      throw SamplerFailure("full-cube sampler: bad target or resolution");
    std::vector<double> p(target.begin(), target.end());
    for (auto& v : p) v = std::clamp(v, 0.0, 1.0);
    return p;
  }
  std::shared_ptr<const DenseDomain> face_domain() const override;
  std::string signature() const override {
    return "full(" + std::to_string(dim_) + ")";
  }

private:
  int dim_;
};

double rational_coordinate_sample(double t, double eps, bool exclude_boundary) {
  t = std::clamp(t, 0.0, 1.0);
  double lo = exclude_boundary ? std::ldexp(1.0, -45) : 0.0;
  double hi = exclude_boundary ? 1.0 - std::ldexp(1.0, -45) : 1.0;

  auto admissible = [&](double v) {
    return v >= lo && v <= hi && std::abs(v - t) <= eps && rational_member(v);
  };

  if (admissible(t)) return t;

  // continued-fraction reconstruction first, dyadic rounding as fallback
  if (auto r = nearest_rational(t, 1000000); r && admissible(r->value))
    return r->value;
  for (int bits = 1; bits <= 40; ++bits) {
    double v = std::round(std::ldexp(t, bits));
    double cand = std::ldexp(v, -bits);
    if (admissible(cand)) return cand;
    // nudge inward when the rounding lands on an excluded endpoint
    if (cand <= lo && admissible(std::ldexp(1.0, -bits))) return std::ldexp(1.0, -bits);
    if (cand >= hi && admissible(1.0 - std::ldexp(1.0, -bits)))
      return 1.0 - std::ldexp(1.0, -bits);
  }
  throw SamplerFailure("rational sampler: no admissible point near target");
}

class RationalDomain final : public DenseDomain {
public:
  RationalDomain(int dim, bool exclude_boundary)
      : dim_(dim), exclude_boundary_(exclude_boundary) {}
  int dim() const override { return dim_; }
  bool contains(std::span<const double> p) const override {
    if (static_cast<int>(p.size()) != dim_) return false;
    for (double v : p) {
      if (exclude_boundary_ ? !(v > 0.0 && v < 1.0) : !(v >= 0.0 && v <= 1.0))
        return false;
      if (!rational_member(v)) return false;
    }
    return true;
  }
  std::vector<double> sample(std::span<const double> target,
                             double eps) const override {
    if (static_cast<int>(target.size()) != dim_ || eps <= 0)
      throw SamplerFailure("rational sampler: bad target or resolution");
    std::vector<double> p;
    p.reserve(dim_);
    for (double t : target)
      p.push_back(rational_coordinate_sample(t, eps, exclude_boundary_));
    return p;
  }
  std::shared_ptr<const DenseDomain> face_domain() const override;
  std::string signature() const override {
    return std::string("rational(") + std::to_string(dim_) +
           (exclude_boundary_ ? ",open)" : ")");
  }

private:
  int dim_;
  bool exclude_boundary_;
};

class DyadicDomain final : public DenseDomain {
public:
  DyadicDomain(int dim, int bits) : dim_(dim), bits_(bits) {}
  int dim() const override { return dim_; }
  bool contains(std::span<const double> p) const override {
    if (static_cast<int>(p.size()) != dim_) return false;
    return std::all_of(p.begin(), p.end(), [this](double v) {
      return v >= 0.0 && v <= 1.0 && is_dyadic(v, bits_);
    });
  }
  std::vector<double> sample(std::span<const double> target,
                             double eps) const override {
    if (static_cast<int>(target.size()) != dim_ || eps <= 0)
      throw SamplerFailure("dyadic sampler: bad target or resolution");
    int m = 1;
    while (m < bits_ && std::ldexp(1.0, -m) > eps * 0.5) ++m;
    if (std::ldexp(1.0, -m) > eps)
      throw SamplerFailure("dyadic sampler: resolution finer than the carrier");
    std::vector<double> p;
    p.reserve(dim_);
    for (double t : target) {
      double v = std::ldexp(std::round(std::ldexp(std::clamp(t, 0.0, 1.0), m)), -m);
      p.push_back(std::clamp(v, 0.0, 1.0));
    }
    return p;
  }
  std::shared_ptr<const DenseDomain> face_domain() const override;
  std::string signature() const override {
    return "dyadic(" + std::to_string(dim_) + "," + std::to_string(bits_) + ")";
  }

private:
  int dim_;
  int bits_;
};

class PointDomain final : public DenseDomain {
public:
  int dim() const override { return 0; }
  bool contains(std::span<const double> p) const override { return p.empty(); }
  std::vector<double> sample(std::span<const double> target,
                             double) const override {
    if (!target.empty())
      throw SamplerFailure("point sampler: nonempty target in dimension 0");
    return {};
  }
  std::shared_ptr<const DenseDomain> face_domain() const override {
    throw std::logic_error("0-dimensional domain has no faces");
  }
  std::string signature() const override { return "point"; }
};

std::shared_ptr<const DenseDomain> FullCubeDomain::face_domain() const {
  if (dim_ <= 1) return point_domain();
  return full_cube_domain(dim_ - 1);
}
std::shared_ptr<const DenseDomain> RationalDomain::face_domain() const {
  if (dim_ <= 1) return point_domain();
  return rational_domain(dim_ - 1, exclude_boundary_);
}
std::shared_ptr<const DenseDomain> DyadicDomain::face_domain() const {
  if (dim_ <= 1) return point_domain();
  return dyadic_domain(dim_ - 1, bits_);
}

} // namespace

DomainPtr full_cube_domain(int dim) {
  if (dim < 1) throw std::invalid_argument("full_cube_domain: dim must be >= 1");
  return std::make_shared<FullCubeDomain>(dim);
}

DomainPtr rational_domain(int dim, bool exclude_boundary) {
  if (dim < 1) throw std::invalid_argument("rational_domain: dim must be >= 1");
  return std::make_shared<RationalDomain>(dim, exclude_boundary);
}

DomainPtr dyadic_domain(int dim, int bits) {
  if (dim < 1) throw std::invalid_argument("dyadic_domain: dim must be >= 1");
  if (bits < 1 || bits > 40)
    throw std::invalid_argument("dyadic_domain: bits out of range");
  return std::make_shared<DyadicDomain>(dim, bits);
}

DomainPtr point_domain() { return std::make_shared<PointDomain>(); }

} // namespace dspace
