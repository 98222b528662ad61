// SPDX-License-Identifier: Apache-2.0
#include "dspace/cubes.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace dspace {

namespace {

std::string fmt_point(std::span<const double> t) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) os << ',';
    os << t[i];
  }
  os << ')';
  return os.str();
}

// Probe targets covering the closed cube: a uniform grid (boundary
// included), a few seeded random points, and fixed irrational offsets that
// defeat carrier-aligned accidents.
std::vector<std::vector<double>> probe_targets(int n, int grid_per_axis,
                                               int random_probes,
                                               std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  if (n == 0) {
    out.push_back({});
    return out;
  }
  int g = std::max(grid_per_axis, 2);
  std::vector<int> idx(n, 0);
  while (true) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = static_cast<double>(idx[i]) / (g - 1);
    out.push_back(std::move(t));
    int i = n - 1;
    while (i >= 0 && ++idx[i] == g) idx[i--] = 0;
    if (i < 0) break;
  }
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < random_probes; ++r) {
    std::vector<double> t(n);
    for (auto& x : t) x = unit(gen);
    out.push_back(std::move(t));
  }
  const double irr[3] = {0.31830988618379067, 0.36787944117144233,
                         0.70710678118654752};
  for (int r = 0; r < 3; ++r) {
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) t[i] = irr[(r + i) % 3];
    out.push_back(std::move(t));
  }
  return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Cubes

GeneralizedCube make_cube(DomainPtr domain, SmoothMap map, SpacePtr space,
                          std::string name) {
  if (!domain || !space) throw std::invalid_argument("make_cube: null argument");
  if (map.input_dim() != domain->dim())
    throw ValidationError("make_cube: map input dimension differs from domain");
  if (map.output_dim() != space->ambient_dim())
    throw ValidationError("make_cube: map lands outside the ambient space");
  return {std::move(domain), std::move(map), std::move(space), std::move(name)};
}

CubeValidation validate_cube(const GeneralizedCube& cube, int grid_per_axis,
                             int random_probes, std::uint64_t seed) {
  CubeValidation res;
  auto targets = probe_targets(cube.dim(), grid_per_axis, random_probes, seed);
  for (const auto& t : targets) {
    std::vector<double> p;
    try {
      p = cube.domain->sample(t, 1e-6);
    } catch (const SamplerFailure& e) {
      res.ok = false;
      if (res.failures.size() < 8)
        res.failures.push_back("sampler failed near " + fmt_point(t) + ": " +
                               e.what());
      continue;
    }
    ++res.checked;
    std::vector<double> image;
    try {
      image = eval(cube.map, p);
    } catch (const DomainError& e) {
      res.ok = false;
      if (res.failures.size() < 8)
        res.failures.push_back("map undefined at " + fmt_point(p) + ": " +
                               e.what());
      continue;
    }
    if (!cube.space->membership().contains(image)) {
      res.ok = false;
      if (res.failures.size() < 8)
        res.failures.push_back("image " + fmt_point(image) + " of " +
                               fmt_point(p) + " is not a member point");
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Extension engine

namespace {

struct Resolution {
  bool ok = false;
  double value = 0.0;
  PointCertificate cert;
  ExtensionWitness witness;
};

Resolution resolve_point(const SmoothExpr& f, const DenseDomain& domain,
                         const ExtensionConfig& cfg, std::span<const double> t) {
  Resolution r;
  if (!cfg.force_sampler) {
    // Direct path: the expression itself covers t, and evaluability of the
    // primitives implies continuity there, so this is the extension value.
    try {
      r.value = eval(f, t);
      r.ok = true;
      r.cert = {std::vector<double>(t.begin(), t.end()), true, 0.0};
      return r;
    } catch (const DomainError&) {
      // fall through to the sampler ladder
    }
  }

  r.witness.target.assign(t.begin(), t.end());
  std::vector<double>& vals = r.witness.values;
  std::vector<int>& levels = r.witness.levels;
  for (int k = cfg.k0; k <= cfg.kmax; ++k) {
    std::vector<double> p = domain.sample(t, std::ldexp(1.0, -k));
    double v;
    try {
      v = eval(f, p);
    } catch (const DomainError&) {
      r.witness.reason = "undefined-at-domain-samples";
      return r;
    }
    levels.push_back(k);
    vals.push_back(v);
    if (std::abs(v) > cfg.divergence_bound) {
      r.witness.reason = "bound-exceeded";
      return r;
    }
  }
  auto& resid = r.witness.residuals;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i)
    resid.push_back(std::abs(vals[i + 1] - vals[i]));

  // the trailing rungs must obey the geometric tolerance schedule
  int window = std::min<int>(cfg.tail_window, static_cast<int>(resid.size()));
  bool pass = window > 0;
  for (int i = 0; i < window; ++i) {
    std::size_t r_i = resid.size() - 1 - i;
    double tol = cfg.tol_base * std::ldexp(1.0, -levels[r_i]) + cfg.atol_floor;
    if (resid[r_i] > tol) pass = false;
  }
  if (pass) {
    r.ok = true;
    r.value = vals.back();
    r.cert = {std::vector<double>(t.begin(), t.end()), false, resid.back()};
    return r;
  }
  // classify the failure: growing magnitudes read as divergence
  bool growing = true;
  for (std::size_t i = vals.size() - std::min<std::size_t>(vals.size(), 4);
       i + 1 < vals.size(); ++i)
    if (std::abs(vals[i + 1]) <= std::abs(vals[i])) growing = false;
  r.witness.reason = growing ? "divergence" : "cauchy-stall";
  return r;
}

// Single-point extension value, or nullopt when the ladder refuses.
std::optional<double> extend_value_at(const SmoothExpr& f,
                                      const DomainPtr& domain,
                                      const ExtensionConfig& cfg,
                                      std::span<const double> t) {
  Resolution r = resolve_point(f, *domain, cfg, t);
  if (!r.ok) return std::nullopt;
  return r.value;
}

} // namespace

double ExtensionResult::evaluate(std::span<const double> t) const {
  if (!extended_)
    throw NoConvergence("extension evaluator used on a non-extendable function");
  Resolution r = resolve_point(f_, *domain_, cfg_, t);
  if (!r.ok)
    throw NoConvergence("extension query failed at " + fmt_point(t) + " (" +
                        r.witness.reason + ")");
  return r.value;
}

ExtensionResult extend(const SmoothExpr& f, const DomainPtr& domain,
                       const ExtensionConfig& cfg) {
  if (!domain) throw std::invalid_argument("extend: null domain");
  ExtensionResult res;
  res.f_ = f;
  res.domain_ = domain;
  res.cfg_ = cfg;
  auto targets = probe_targets(domain->dim(), cfg.probe_points_per_axis,
                               /*random_probes=*/4, /*seed=*/99);
  for (const auto& t : targets) {
    Resolution r = resolve_point(f, *domain, cfg, t);
    if (!r.ok) {
      res.extended_ = false;
      res.witness_ = std::move(r.witness);
      return res;
    }
    res.certs_.push_back(std::move(r.cert));
  }
  res.extended_ = true;
  return res;
}

// ---------------------------------------------------------------------------
// Pullback

SmoothExpr PulledBackForm::top_coefficient() const {
  const int n = cube.dim();
  for (const auto& t : coefficients)
    if (static_cast<int>(t.index.size()) == n) {
      bool top = true;
      for (int i = 0; i < n; ++i) top = top && t.index[i] == i;
      if (top) return t.coeff;
    }
  return SmoothExpr::constant(0.0);
}

PulledBackForm pullback(const GeneralizedCube& cube, const PointForm& omega) {
  if (omega.space()->signature() != cube.space->signature())
    throw std::invalid_argument("pullback: form and cube live on different spaces");
  const int n = cube.dim();
  const int k = omega.degree();
  PulledBackForm out;
  out.cube = cube;
  out.degree = k;
  if (k > n) return out; // no increasing tuples: the pullback vanishes

  // increasing k-tuples of cube axes
  std::vector<std::vector<int>> tuples;
  std::vector<int> cur(k);
  auto build = [&](auto&& self, int start, int depth) -> void {
    if (depth == k) {
      tuples.push_back(cur);
      return;
    }
    for (int i = start; i < n; ++i) {
      cur[depth] = i;
      self(self, i + 1, depth + 1);
    }
  };
  build(build, 0, 0);

  std::vector<FormTerm> coeffs;
  for (const auto& term : omega.terms()) {
    SmoothExpr c = term.coeff.arity() == 0
                       ? term.coeff
                       : compose_with_map(term.coeff, cube.map);
    // rows: generator composites g_{i_r} o phi
    std::vector<SmoothExpr> rows;
    rows.reserve(k);
    for (int r = 0; r < k; ++r)
      rows.push_back(
          compose_with_map(omega.space()->generator(term.index[r]), cube.map));
    for (const auto& T : tuples) {
      std::vector<std::vector<SmoothExpr>> m(k, std::vector<SmoothExpr>(k));
      for (int r = 0; r < k; ++r)
        for (int s = 0; s < k; ++s)
          m[r][s] = SmoothExpr::derivative(rows[r], {T[s]});
      SmoothExpr det = det_expr(m);
      if (det.is_zero()) continue;
      coeffs.push_back({c * det, T});
    }
  }
  out.coefficients = canonical_terms(std::move(coeffs), k);
  return out;
}

// ---------------------------------------------------------------------------
// Faces

GeneralizedCube face(const GeneralizedCube& cube, int axis, int alpha,
                     const ExtensionConfig& cfg) {
  const int n = cube.dim();
  if (n < 1) throw std::invalid_argument("face: cube must have dimension >= 1");
  if (axis < 0 || axis >= n) throw std::invalid_argument("face: bad axis");
  if (alpha != 0 && alpha != 1) throw std::invalid_argument("face: alpha is 0 or 1");

  // variable images of the insertion map I_(axis, alpha)
  std::vector<SmoothExpr::VarImage> images(n);
  for (int j = 0; j < n; ++j) {
    if (j < axis) images[j] = SmoothExpr::VarImage::to_var(j);
    else if (j == axis)
      images[j] = SmoothExpr::VarImage::to_const(static_cast<double>(alpha));
    else images[j] = SmoothExpr::VarImage::to_var(j - 1);
  }

  DomainPtr fdom = cube.domain->face_domain();
  auto slab_targets = probe_targets(n - 1, 5, 3, 7);

  std::vector<SmoothExpr> comps;
  comps.reserve(cube.map.output_dim());
  for (int c = 0; c < cube.map.output_dim(); ++c) {
    SmoothExpr sub = cube.map.component(c).substituted(images);
    bool covered = true;
    for (const auto& t : slab_targets) {
      try {
        (void)eval(sub, t);
      } catch (const DomainError&) {
        covered = false;
        break;
      }
    }
    if (covered) {
      comps.push_back(std::move(sub));
      continue;
    }
    // The expression does not cover the slab: take limits of the parent
    // component through the parent domain at the slab point.
    if (n - 1 == 0) {
      std::vector<double> corner = {static_cast<double>(alpha)};
      auto ext = extend_value_at(cube.map.component(c), cube.domain, cfg,
                                 corner);
      if (!ext)
        throw ExtensionRequired(
            "face: cube map does not extend continuously to the face slab");
      comps.push_back(SmoothExpr::constant(*ext));
      continue;
    }
    throw ExtensionRequired(
        "face: the map extends only pointwise on this slab; faces of "
        "dimension >= 1 need expression-evaluable components");
  }

  std::string name = cube.name.empty() ? "cube" : cube.name;
  name += "(" + std::to_string(axis + 1) + "," + std::to_string(alpha) + ")";
  return {std::move(fdom), SmoothMap(n - 1, std::move(comps)), cube.space,
          std::move(name)};
}

// ---------------------------------------------------------------------------
// Extendability report

bool ExtendabilityReport::uniform_pass() const {
  return std::all_of(uniform.begin(), uniform.end(),
                     [](const Item& i) { return i.pass; });
}
bool ExtendabilityReport::tangent_pass() const {
  return std::all_of(tangent.begin(), tangent.end(),
                     [](const Item& i) { return i.pass; });
}
bool ExtendabilityReport::forms_pass() const {
  return std::all_of(forms.begin(), forms.end(),
                     [](const Item& i) { return i.pass; });
}

ExtendabilityReport extendability_report(const GeneralizedCube& cube,
                                         std::span<const PointForm> forms,
                                         const ExtensionConfig& cfg) {
  ExtendabilityReport rep;
  const int n = cube.dim();
  const auto& gens = cube.space->generators();

  auto run = [&](const SmoothExpr& f, std::string what,
                 std::vector<ExtendabilityReport::Item>& bucket) {
    ExtendabilityReport::Item item;
    item.what = std::move(what);
    ExtensionResult ext = extend(f, cube.domain, cfg);
    item.pass = ext.extended();
    if (!item.pass && ext.witness()) item.witness = ext.witness();
    bucket.push_back(std::move(item));
  };

  for (std::size_t i = 0; i < gens.size(); ++i) {
    SmoothExpr comp = compose_with_map(gens[i], cube.map);
    run(comp, "g" + std::to_string(i + 1) + "∘phi", rep.uniform);
    for (int j = 0; j < n; ++j)
      run(SmoothExpr::derivative(comp, {j}),
          "d(g" + std::to_string(i + 1) + "∘phi)/dt" + std::to_string(j + 1),
          rep.tangent);
  }
  for (std::size_t w = 0; w < forms.size(); ++w) {
    PulledBackForm pb = pullback(cube, forms[w]);
    if (pb.coefficients.empty()) {
      // identically zero pullback extends trivially
      ExtendabilityReport::Item item;
      item.what = "form" + std::to_string(w + 1) + " pullback (zero)";
      item.pass = true;
      rep.forms.push_back(std::move(item));
      continue;
    }
    for (const auto& t : pb.coefficients) {
      std::string what = "form" + std::to_string(w + 1) + " coefficient(";
      for (std::size_t s = 0; s < t.index.size(); ++s) {
        if (s) what += ',';
        what += std::to_string(t.index[s] + 1);
      }
      what += ')';
      run(t.coeff, std::move(what), rep.forms);
    }
  }
  return rep;
}

} // namespace dspace
