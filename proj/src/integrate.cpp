// SPDX-License-Identifier: Apache-2.0
#include "dspace/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace dspace {

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes

namespace {

struct GaussRule {
  std::vector<double> nodes;   // on (0,1)
  std::vector<double> weights; // sum to 1
};

// Newton iteration on P_n against the Chebyshev initial guess.
GaussRule gauss_rule(int order) {
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < order; ++i) {
    double x = std::cos(pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_n(x) and P'_n(x)
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[order - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[order - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

const GaussRule& cached_rule(int order) {
  static std::map<int, GaussRule> cache;
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gauss_rule(order)).first;
  return it->second;
}

double gauss_box(const std::function<double(std::span<const double>)>& f,
                 int n, std::span<const double> lo, std::span<const double> size,
                 const GaussRule& rule) {
  const int order = static_cast<int>(rule.nodes.size());
  double vol = 1.0;
  for (int i = 0; i < n; ++i) vol *= size[i];
  std::vector<int> idx(n, 0);
  std::vector<double> t(n);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      t[i] = lo[i] + size[i] * rule.nodes[idx[i]];
      w *= rule.weights[idx[i]];
    }
    acc += w * f(t);
    int i = n - 1;
    while (i >= 0 && ++idx[i] == order) idx[i--] = 0;
    if (i < 0) break;
  }
  return acc * vol;
}

double adaptive_box(const std::function<double(std::span<const double>)>& f,
                    int n, std::vector<double> lo, std::vector<double> size,
                    double atol, const QuadConfig& cfg, const GaussRule& rule,
                    int depth) {
  double coarse = gauss_box(f, n, lo, size, rule);
  // refined estimate: split every axis in half
  const int children = 1 << n;
  double fine = 0.0;
  std::vector<double> clo(n), csize(n);
  for (int c = 0; c < children; ++c) {
    for (int i = 0; i < n; ++i) {
      csize[i] = size[i] * 0.5;
      clo[i] = lo[i] + ((c >> i) & 1 ? csize[i] : 0.0);
    }
    fine += gauss_box(f, n, clo, csize, rule);
  }
  if (std::abs(fine - coarse) <= atol + cfg.rtol * std::abs(fine)) return fine;
  if (depth >= cfg.max_depth)
    throw NoConvergence("quadrature: subdivision depth exhausted");
  double acc = 0.0;
  for (int c = 0; c < children; ++c) {
    for (int i = 0; i < n; ++i) {
      csize[i] = size[i] * 0.5;
      clo[i] = lo[i] + ((c >> i) & 1 ? csize[i] : 0.0);
    }
    acc += adaptive_box(f, n, clo, csize, atol / children, cfg, rule, depth + 1);
  }
  return acc;
}

} // namespace

double quadrature(const std::function<double(std::span<const double>)>& f,
                  int n, const QuadConfig& cfg) {
  if (n < 0) throw std::invalid_argument("quadrature: negative dimension");
  if (cfg.order < 1 || cfg.atol <= 0 || cfg.rtol <= 0)
    throw std::invalid_argument("quadrature: bad configuration");
  if (n == 0) {
    std::vector<double> none;
    return f(none);
  }
  const GaussRule& rule = cached_rule(cfg.order);
  return adaptive_box(f, n, std::vector<double>(n, 0.0),
                      std::vector<double>(n, 1.0), cfg.atol, cfg, rule, 0);
}

// ---------------------------------------------------------------------------
// Integrals of forms on cubes and chains

namespace {

std::string witness_text(const ExtensionWitness& w) {
  std::ostringstream os;
  os << w.reason << " at (";
  for (std::size_t i = 0; i < w.target.size(); ++i) {
    if (i) os << ',';
    os << w.target[i];
  }
  os << ')';
  if (!w.values.empty())
    os << ", values " << w.values.front() << " .. " << w.values.back();
  return os.str();
}

} // namespace

double integrate_cube(const GeneralizedCube& cube, const PointForm& omega,
                      const IntegrateConfig& cfg) {
  const int n = cube.dim();
  if (omega.degree() != n) return 0.0; // k != n integrates to zero
  PulledBackForm pb = pullback(cube, omega);
  SmoothExpr density = pb.top_coefficient();
  if (density.is_zero()) return 0.0;

  ExtensionResult ext = extend(density, cube.domain, cfg.ext);
  if (!ext.extended()) {
    std::string name = cube.name.empty() ? "<cube>" : cube.name;
    throw NotIntegrable("pullback density of " + name +
                        " has no continuous extension: " +
                        witness_text(*ext.witness()));
  }
  if (n == 0) {
    std::vector<double> none;
    return ext.evaluate(none);
  }
  return quadrature([&](std::span<const double> t) { return ext.evaluate(t); },
                    n, cfg.quad);
}

double integrate_chain(const Chain& chain, const PointForm& omega,
                       const IntegrateConfig& cfg) {
  double acc = 0.0;
  for (const auto& [key, e] : chain.entries())
    acc += e.coeff * integrate_cube(e.cube, omega, cfg);
  return acc;
}

// ---------------------------------------------------------------------------
// Stokes

StokesReport verify_stokes(const Chain& chain, const PointForm& eta,
                           const AmbientForm& eta_ext,
                           const IntegrateConfig& cfg, double tolerance) {
  if (chain.is_zero()) {
    StokesReport r;
    r.tolerance = tolerance;
    r.pass = true;
    return r;
  }
  SpacePtr space = chain.entries().begin()->second.cube.space;
  PointForm restricted = restrict_form(eta_ext, space);
  if (restricted.degree() != eta.degree())
    throw ExtensionMismatch("verify_stokes: degree of the extension differs");

  // the restricted extension must reproduce eta at probe points
  {
    std::mt19937_64 gen(20250607);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> dir(-1.0, 1.0);
    const int d = space->ambient_dim();
    for (const auto& [key, e] : chain.entries()) {
      for (int probe = 0; probe < 8; ++probe) {
        std::vector<double> t(e.cube.dim());
        for (auto& x : t) x = unit(gen);
        std::vector<double> m;
        try {
          m = eval(e.cube.map, e.cube.domain->sample(t, 1e-9));
        } catch (const DomainError&) {
          continue;
        } catch (const SamplerFailure&) {
          continue;
        }
        std::vector<std::vector<double>> vecs(eta.degree(),
                                              std::vector<double>(d));
        for (auto& v : vecs)
          for (auto& x : v) x = dir(gen);
        double a = eval_form(eta, m, vecs);
        double b = eval_form(restricted, m, vecs);
        if (std::abs(a - b) > 1e-9 * (1.0 + std::abs(a)))
          throw ExtensionMismatch(
              "verify_stokes: restricted extension disagrees with the point "
              "form at a probe point");
      }
    }
  }

  StokesReport rep;
  rep.tolerance = tolerance;

  // lhs: integral over the boundary chain, face by face
  Chain bd = boundary_chain(chain, cfg.ext);
  for (const auto& [key, e] : bd.entries()) {
    double v = integrate_cube(e.cube, restricted, cfg);
    rep.faces.push_back({e.cube.name, e.coeff, v});
    rep.lhs += e.coeff * v;
  }

  // rhs: integral of the restricted exterior derivative over the chain
  PointForm d_restricted = restrict_form(exterior_derivative(eta_ext), space);
  rep.rhs = integrate_chain(chain, d_restricted, cfg);

  rep.abs_diff = std::abs(rep.lhs - rep.rhs);
  rep.pass = rep.abs_diff <= tolerance;
  rep.extension_certificates = static_cast<int>(bd.size()) + 1;
  return rep;
}

// ---------------------------------------------------------------------------
// d commutes with pullback

DCommuteResult d_commutes_pullback_check(const SmoothMap& F,
                                         const AmbientForm& chi, int samples,
                                         std::uint64_t seed, double tol) {
  const int n = F.input_dim();
  AmbientForm pulled = pullback_along(chi, F);
  AmbientForm lhs = exterior_derivative(pulled);      // d_1 (F* chi)
  AmbientForm rhs = pullback_along(exterior_derivative(chi), F); // F* d chi

  DCommuteResult res;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::uniform_real_distribution<double> dir(-1.0, 1.0);
  const int k1 = chi.degree() + 1;
  for (int s = 0; s < samples; ++s) {
    std::vector<double> t(n);
    for (auto& x : t) x = unit(gen);
    std::vector<std::vector<double>> vecs(k1, std::vector<double>(n));
    for (auto& v : vecs)
      for (auto& x : v) x = dir(gen);
    double a = eval_form(lhs, t, vecs);
    double b = eval_form(rhs, t, vecs);
    res.max_deviation = std::max(res.max_deviation, std::abs(a - b));
    ++res.samples;
  }
  res.pass = res.max_deviation <= tol;
  return res;
}

} // namespace dspace
