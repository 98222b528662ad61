// SPDX-License-Identifier: Apache-2.0
#include "dspace/forms.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace dspace {

namespace {

// Sorts an index tuple in place; returns the permutation sign, or nullopt
// when the tuple has a repeated entry.
std::optional<int> sort_index_sign(std::vector<int>& idx) {
  int sign = 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    std::size_t j = i;
    while (j > 0 && idx[j] < idx[j - 1]) {
      std::swap(idx[j], idx[j - 1]);
      sign = -sign;
      --j;
    }
  }
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (idx[i] == idx[i - 1]) return std::nullopt;
  return sign;
}

int permutation_sign(std::span<const int> perm) {
  int sign = 1;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j]) sign = -sign;
  return sign;
}

double det_values(std::vector<std::vector<double>> m) {
  const int k = static_cast<int>(m.size());
  if (k == 0) return 1.0;
  if (k == 1) return m[0][0];
  if (k == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  if (k == 3)
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  // partial-pivot elimination for larger blocks
  double det = 1.0;
  for (int c = 0; c < k; ++c) {
    int piv = c;
    for (int r = c + 1; r < k; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (m[piv][c] == 0.0) return 0.0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (int r = c + 1; r < k; ++r) {
      double f = m[r][c] / m[c][c];
      for (int cc = c; cc < k; ++cc) m[r][cc] -= f * m[c][cc];
    }
  }
  return det;
}

} // namespace

SmoothExpr det_expr(const std::vector<std::vector<SmoothExpr>>& m) {
  const int k = static_cast<int>(m.size());
  if (k == 0) return SmoothExpr::constant(1.0);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<SmoothExpr> summands;
  do {
    bool zero = false;
    for (int r = 0; r < k && !zero; ++r)
      if (m[r][perm[r]].is_zero()) zero = true;
    if (zero) continue;
    std::vector<SmoothExpr> factors;
    factors.reserve(k + 1);
    int sign = permutation_sign(perm);
    if (sign < 0) factors.push_back(SmoothExpr::constant(-1.0));
    for (int r = 0; r < k; ++r) factors.push_back(m[r][perm[r]]);
    summands.push_back(SmoothExpr::product(std::move(factors)));
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (summands.empty()) return SmoothExpr::constant(0.0);
  return SmoothExpr::sum(std::move(summands));
}

namespace {

void check_degree(int degree, int coord_limit, const std::vector<FormTerm>& terms) {
  for (const auto& t : terms) {
    if (static_cast<int>(t.index.size()) != degree)
      throw std::invalid_argument("form term index length != degree");
    for (int i : t.index)
      if (i < 0 || (coord_limit >= 0 && i >= coord_limit))
        throw std::invalid_argument("form term index out of range");
  }
}

} // namespace

std::vector<FormTerm> canonical_terms(std::vector<FormTerm> terms, int degree) {
  std::map<std::vector<int>, std::vector<SmoothExpr>> buckets;
  for (auto& t : terms) {
    if (static_cast<int>(t.index.size()) != degree)
      throw std::invalid_argument("form term index length != degree");
    std::vector<int> idx = t.index;
    auto sign = sort_index_sign(idx);
    if (!sign) continue; // repeated index
    SmoothExpr c = *sign < 0 ? SmoothExpr::neg(t.coeff) : t.coeff;
    buckets[idx].push_back(std::move(c));
  }
  std::vector<FormTerm> out;
  for (auto& [idx, coeffs] : buckets) {
    SmoothExpr c = SmoothExpr::sum(std::move(coeffs));
    if (c.is_zero()) continue;
    out.push_back({std::move(c), idx});
  }
  return out;
}

// ---------------------------------------------------------------------------
// PointForm / AmbientForm

PointForm::PointForm(SpacePtr space, int degree, std::vector<FormTerm> terms)
    : space_(std::move(space)), degree_(degree) {
  if (!space_) throw std::invalid_argument("PointForm: null space");
  if (degree < 0) throw std::invalid_argument("PointForm: negative degree");
  check_degree(degree, space_->generator_count(), terms);
  terms_ = canonical_terms(std::move(terms), degree);
  for (const auto& t : terms_)
    if (t.coeff.arity() > space_->ambient_dim())
      throw std::invalid_argument(
          "PointForm: coefficient arity exceeds ambient dimension");
}

PointForm PointForm::zero(SpacePtr space, int degree) {
  return PointForm(std::move(space), degree, {});
}

void PointForm::attach_provenance(SigmaPresentedForm s) {
  provenance_ = std::move(s);
}

AmbientForm::AmbientForm(int coord_count, int degree, std::vector<FormTerm> terms)
    : coord_count_(coord_count), degree_(degree) {
  if (coord_count < 0) throw std::invalid_argument("AmbientForm: bad coords");
  if (degree < 0) throw std::invalid_argument("AmbientForm: negative degree");
  check_degree(degree, coord_count, terms);
  terms_ = canonical_terms(std::move(terms), degree);
  for (const auto& t : terms_)
    if (t.coeff.arity() > coord_count)
      throw std::invalid_argument(
          "AmbientForm: coefficient arity exceeds coordinate count");
}

AmbientForm AmbientForm::zero(int coord_count, int degree) {
  return AmbientForm(coord_count, degree, {});
}

// ---------------------------------------------------------------------------
// Wedge

namespace {

std::vector<FormTerm> wedge_terms(const std::vector<FormTerm>& a,
                                  const std::vector<FormTerm>& b) {
  std::vector<FormTerm> out;
  for (const auto& ta : a) {
    for (const auto& tb : b) {
      std::vector<int> idx = ta.index;
      idx.insert(idx.end(), tb.index.begin(), tb.index.end());
      out.push_back({ta.coeff * tb.coeff, std::move(idx)});
    }
  }
  return out;
}

} // namespace

PointForm wedge(const PointForm& a, const PointForm& b) {
  if (a.space() != b.space() &&
      a.space()->signature() != b.space()->signature())
    throw std::invalid_argument("wedge: forms live on different spaces");
  return PointForm(a.space(), a.degree() + b.degree(),
                   wedge_terms(a.terms(), b.terms()));
}

AmbientForm wedge(const AmbientForm& a, const AmbientForm& b) {
  if (a.coord_count() != b.coord_count())
    throw std::invalid_argument("wedge: coordinate counts differ");
  return AmbientForm(a.coord_count(), a.degree() + b.degree(),
                     wedge_terms(a.terms(), b.terms()));
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Sorts the argument tuple by a deterministic key and returns the sign of
// that permutation, so transpositions negate the result exactly.
int canonicalize_arguments(std::vector<std::vector<double>>& vecs) {
  const int k = static_cast<int>(vecs.size());
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return std::lexicographical_compare(vecs[i].begin(), vecs[i].end(),
                                        vecs[j].begin(), vecs[j].end());
  });
  int sign = permutation_sign(order);
  std::vector<std::vector<double>> sorted;
  sorted.reserve(k);
  for (int i : order) sorted.push_back(std::move(vecs[i]));
  vecs = std::move(sorted);
  return sign;
}

double eval_terms(const std::vector<FormTerm>& terms, int degree,
                  std::span<const double> coeff_point,
                  // differential of coordinate i applied to vector s
                  const std::function<double(int, int)>& dcoord,
                  int nvecs) {
  if (nvecs != degree)
    throw std::invalid_argument("eval_form: wrong number of tangent vectors");
  double total = 0.0;
  for (const auto& t : terms) {
    double c = eval(t.coeff, coeff_point);
    if (degree == 0) {
      total += c;
      continue;
    }
    std::vector<std::vector<double>> m(degree, std::vector<double>(degree));
    for (int r = 0; r < degree; ++r)
      for (int s = 0; s < degree; ++s) m[r][s] = dcoord(t.index[r], s);
    total += c * det_values(std::move(m));
  }
  return total;
}

} // namespace

double eval_form(const PointForm& w, std::span<const double> m,
                 std::span<const std::vector<double>> vectors) {
  const int d = w.space()->ambient_dim();
  if (static_cast<int>(m.size()) != d)
    throw std::invalid_argument("eval_form: point dimension mismatch");
  std::vector<std::vector<double>> vecs(vectors.begin(), vectors.end());
  for (const auto& v : vecs)
    if (static_cast<int>(v.size()) != d)
      throw std::invalid_argument("eval_form: tangent vector dimension mismatch");
  int sign = canonicalize_arguments(vecs);

  // gradient rows of every generator named by some term
  std::vector<std::vector<double>> grads(w.space()->generator_count());
  std::vector<bool> have(w.space()->generator_count(), false);
  for (const auto& t : w.terms())
    for (int i : t.index)
      if (!have[i]) {
        grads[i].resize(d);
        for (int c = 0; c < d; ++c)
          grads[i][c] = partial(w.space()->generator(i), m, c);
        have[i] = true;
      }
  auto dcoord = [&](int gen, int s) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += grads[gen][c] * vecs[s][c];
    return acc;
  };
  return sign * eval_terms(w.terms(), w.degree(), m, dcoord,
                           static_cast<int>(vecs.size()));
}

double eval_form(const AmbientForm& w, std::span<const double> u,
                 std::span<const std::vector<double>> vectors) {
  if (static_cast<int>(u.size()) < w.coord_count())
    throw std::invalid_argument("eval_form: point dimension mismatch");
  std::vector<std::vector<double>> vecs(vectors.begin(), vectors.end());
  for (const auto& v : vecs)
    if (static_cast<int>(v.size()) != w.coord_count())
      throw std::invalid_argument("eval_form: tangent vector dimension mismatch");
  int sign = canonicalize_arguments(vecs);
  auto dcoord = [&](int coord, int s) { return vecs[s][coord]; };
  return sign * eval_terms(w.terms(), w.degree(), u, dcoord,
                           static_cast<int>(vecs.size()));
}

// ---------------------------------------------------------------------------
// Homogeneity and canonicalization

namespace {

struct SigmaLayout {
  int n0 = 0;
  std::vector<int> offsets; // start of block j inside sigma's arguments
  std::vector<int> sizes;
  int total = 0;
};

SigmaLayout layout_of(const SigmaPresentedForm& s) {
  SigmaLayout L;
  L.n0 = s.base.output_dim();
  int pos = L.n0;
  for (const auto& slot : s.slots) {
    L.offsets.push_back(pos);
    L.sizes.push_back(static_cast<int>(slot.size()));
    pos += static_cast<int>(slot.size());
  }
  L.total = pos;
  if (s.sigma.arity() > L.total)
    throw std::invalid_argument("sigma arity exceeds base+slot layout");
  return L;
}

std::optional<double> try_eval(const SmoothExpr& e, std::span<const double> p) {
  try {
    return eval(e, p);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

} // namespace

HomogeneityResult homogeneity_check(const SigmaPresentedForm& s, int samples,
                                    std::uint64_t seed) {
  SigmaLayout L = layout_of(s);
  const int k = static_cast<int>(s.slots.size());
  HomogeneityResult res;
  if (k == 0) { // no blocks: nothing to scale
    res.pass = true;
    return res;
  }

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> trange(-0.5, 1.5);

  auto check_one = [&](const std::vector<double>& w,
                       const std::vector<std::vector<double>>& blocks,
                       const std::vector<double>& t) -> bool {
    std::vector<double> p(L.total, 0.0);
    std::copy(w.begin(), w.end(), p.begin());
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < L.sizes[j]; ++i) p[L.offsets[j] + i] = blocks[j][i];
    auto base_val = try_eval(s.sigma, p);
    if (!base_val) return true; // outside sigma's domain: skip the sample
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < L.sizes[j]; ++i)
        p[L.offsets[j] + i] = t[j] * blocks[j][i];
    auto scaled = try_eval(s.sigma, p);
    if (!scaled) return true;
    double tprod = 1.0;
    for (double tv : t) tprod *= tv;
    double expected = tprod * *base_val;
    double dev = std::abs(*scaled - expected);
    ++res.samples_checked;
    if (dev <= 1e-9 * (1.0 + std::abs(*base_val))) return true;
    HomogeneityWitness wit;
    wit.base_point = w;
    wit.blocks = blocks;
    wit.scales = t;
    wit.scaled_value = *scaled;
    wit.expected = expected;
    wit.deviation = dev;
    res.witness = std::move(wit);
    return false;
  };

  auto random_w = [&] {
    std::vector<double> w(L.n0);
    for (auto& x : w) x = unit(gen);
    return w;
  };
  auto random_blocks = [&] {
    std::vector<std::vector<double>> b(k);
    for (int j = 0; j < k; ++j) {
      b[j].resize(L.sizes[j]);
      for (auto& x : b[j]) x = unit(gen);
    }
    return b;
  };

  // fixed probes: scale one block at a time by 0, 2, 1/2, -1/4
  for (int j = 0; j < k; ++j) {
    for (double c : {0.0, 2.0, 0.5, -0.25}) {
      std::vector<double> t(k, 1.0);
      t[j] = c;
      if (!check_one(random_w(), random_blocks(), t)) {
        res.pass = false;
        return res;
      }
    }
  }
  for (int trial = 0; trial < samples; ++trial) {
    std::vector<double> t(k);
    for (auto& tv : t) tv = trange(gen);
    if (!check_one(random_w(), random_blocks(), t)) {
      res.pass = false;
      return res;
    }
  }
  res.pass = true;
  return res;
}

PointForm canonicalize(const SigmaPresentedForm& s, int check_samples,
                       std::uint64_t seed) {
  auto hom = homogeneity_check(s, check_samples, seed);
  if (!hom.pass)
    throw HomogeneityError(
        "canonicalize: sigma is not multi-homogeneous across its slot blocks");

  SigmaLayout L = layout_of(s);
  const int k = static_cast<int>(s.slots.size());
  const int d = s.space->ambient_dim();
  double kfact = 1.0;
  for (int j = 2; j <= k; ++j) kfact *= j;

  // arguments that freeze sigma at (base(q), 0, ..., 0)
  std::vector<SmoothExpr> frozen_args;
  frozen_args.reserve(L.total);
  for (const auto& c : s.base.components()) frozen_args.push_back(c);
  for (int i = L.n0; i < L.total; ++i)
    frozen_args.push_back(SmoothExpr::constant(0.0));

  std::map<std::vector<int>, std::vector<SmoothExpr>> coeffs;

  // iterate every slot assignment (j_1, ..., j_k); an empty slot means the
  // presented tensor has no terms at all
  bool any_empty =
      std::any_of(L.sizes.begin(), L.sizes.end(), [](int s) { return s == 0; });
  std::vector<int> assign(k, 0);
  bool done = any_empty;
  while (!done) {
    std::vector<int> gens(k);
    std::vector<int> dvars(k);
    for (int r = 0; r < k; ++r) {
      gens[r] = s.slots[r][assign[r]];
      dvars[r] = L.offsets[r] + assign[r];
    }
    std::vector<int> sorted = gens;
    if (auto sign = sort_index_sign(sorted)) {
      SmoothExpr cexpr = SmoothExpr::compose(
          SmoothExpr::derivative(s.sigma, dvars), frozen_args);
      double f = *sign / kfact;
      coeffs[sorted].push_back(f == 1.0 ? cexpr
                                        : SmoothExpr::constant(f) * cexpr);
    }
    // advance the mixed-radix counter; k == 0 has the single empty assignment
    int r = k - 1;
    while (r >= 0) {
      if (++assign[r] < L.sizes[r]) break;
      assign[r] = 0;
      --r;
    }
    if (r < 0) done = true;
  }

  std::vector<FormTerm> terms;
  for (auto& [idx, parts] : coeffs)
    terms.push_back({SmoothExpr::sum(std::move(parts)), idx});
  (void)d;
  PointForm out(s.space, k, std::move(terms));
  out.attach_provenance(s);
  return out;
}

SigmaPresentedForm present_as_sigma(const PointForm& w) {
  const int k = w.degree();
  const auto& terms = w.terms();

  // union of generator indices used, in sorted order
  std::vector<int> gens;
  for (const auto& t : terms)
    for (int i : t.index) gens.push_back(i);
  std::sort(gens.begin(), gens.end());
  gens.erase(std::unique(gens.begin(), gens.end()), gens.end());
  if (gens.empty() && k > 0) gens.push_back(0);
  const int L = static_cast<int>(gens.size());
  const int T = static_cast<int>(terms.size());

  // base map carries the coefficient values; sigma rebuilds the determinant
  std::vector<SmoothExpr> base_comps;
  for (const auto& t : terms) base_comps.push_back(t.coeff);

  std::vector<SmoothExpr> summands;
  for (int t = 0; t < T; ++t) {
    std::vector<std::vector<SmoothExpr>> m(k, std::vector<SmoothExpr>(k));
    for (int r = 0; r < k; ++r)
      for (int s = 0; s < k; ++s) {
        int pos = static_cast<int>(
            std::lower_bound(gens.begin(), gens.end(), terms[t].index[s]) -
            gens.begin());
        m[r][s] = SmoothExpr::var(T + r * L + pos);
      }
    // det over rows r (block index) and columns s (tuple position)
    summands.push_back(SmoothExpr::var(t) * det_expr(m));
  }
  SigmaPresentedForm s;
  s.space = w.space();
  s.base = SmoothMap(w.space()->ambient_dim(), std::move(base_comps));
  s.slots.assign(k, gens);
  s.sigma = summands.empty() ? SmoothExpr::constant(0.0)
                             : SmoothExpr::sum(std::move(summands));
  return s;
}

// ---------------------------------------------------------------------------
// Factorization

namespace {

// Recognizes a*x_j + b (after normalization) and returns the inverse
// expression (u - b)/a in terms of the single variable `uvar`.
std::optional<std::pair<int, SmoothExpr>> affine_inverse(const SmoothExpr& gen,
                                                         int uvar) {
  SmoothExpr g = gen.normalized();
  double a = 1.0, b = 0.0;
  SmoothExpr core = g;
  if (core.kind() == ExprKind::Sum && core.children().size() == 2 &&
      core.children()[0].kind() == ExprKind::Constant) {
    b = core.children()[0].constant_value();
    core = core.children()[1];
  }
  if (core.kind() == ExprKind::Product && core.children().size() == 2 &&
      core.children()[0].kind() == ExprKind::Constant) {
    a = core.children()[0].constant_value();
    core = core.children()[1];
  }
  if (core.kind() == ExprKind::Quot &&
      core.children()[1].kind() == ExprKind::Constant &&
      core.children()[1].constant_value() != 0.0) {
    a /= core.children()[1].constant_value();
    core = core.children()[0];
  }
  if (core.kind() != ExprKind::Var || a == 0.0) return std::nullopt;
  SmoothExpr u = SmoothExpr::var(uvar);
  SmoothExpr inv = (b == 0.0) ? u : u - b;
  if (a != 1.0) inv = inv / a;
  return std::make_pair(core.var_index(), inv);
}

Factorization factorize_from_provenance(const PointForm& w) {
  const SigmaPresentedForm& s = *w.provenance();
  SigmaLayout L = layout_of(s);
  const int k = static_cast<int>(s.slots.size());
  double kfact = 1.0;
  for (int j = 2; j <= k; ++j) kfact *= j;

  // F = (base components, slot generators in layout order)
  std::vector<SmoothExpr> comps = s.base.components();
  for (int j = 0; j < k; ++j)
    for (int g : s.slots[j]) comps.push_back(s.space->generator(g));
  SmoothMap F(s.space->ambient_dim(), comps);

  // eta coefficients live on R^{L.total}: sigma's derivative at
  // (u_1..u_{n0}, 0, ..., 0)
  std::vector<SmoothExpr> frozen;
  frozen.reserve(L.total);
  for (int i = 0; i < L.n0; ++i) frozen.push_back(SmoothExpr::var(i));
  for (int i = L.n0; i < L.total; ++i)
    frozen.push_back(SmoothExpr::constant(0.0));

  std::vector<FormTerm> terms;
  std::vector<int> assign(k, 0);
  bool done = false;
  while (!done && k > 0) {
    std::vector<int> fidx(k);
    std::vector<int> dvars(k);
    for (int r = 0; r < k; ++r) {
      fidx[r] = L.offsets[r] + assign[r];
      dvars[r] = L.offsets[r] + assign[r];
    }
    SmoothExpr cexpr =
        SmoothExpr::compose(SmoothExpr::derivative(s.sigma, dvars), frozen);
    terms.push_back({SmoothExpr::constant(1.0 / kfact) * cexpr, fidx});
    int r = k - 1;
    while (r >= 0) {
      if (++assign[r] < L.sizes[r]) break;
      assign[r] = 0;
      --r;
    }
    if (r < 0) done = true;
  }
  if (k == 0)
    terms.push_back({SmoothExpr::compose(s.sigma, frozen), {}});

  return {std::move(F), AmbientForm(L.total, k, std::move(terms))};
}

} // namespace

Factorization factorize(const PointForm& w) {
  if (w.provenance()) return factorize_from_provenance(w);

  const auto& space = *w.space();
  const int N = space.generator_count();
  const int d = space.ambient_dim();

  // invert ambient coordinates through affine generators
  std::vector<std::optional<SmoothExpr>> coord_expr(d);
  for (int i = 0; i < N; ++i)
    if (auto inv = affine_inverse(space.generator(i), i))
      if (!coord_expr[inv->first]) coord_expr[inv->first] = inv->second;

  std::vector<FormTerm> terms;
  for (const auto& t : w.terms()) {
    std::vector<SmoothExpr> args;
    args.reserve(d);
    for (int j = 0; j < d; ++j)
      args.push_back(coord_expr[j] ? *coord_expr[j] : SmoothExpr::constant(0.0));
    for (int v : t.coeff.free_vars())
      if (!coord_expr[v])
        throw std::invalid_argument(
            "factorize: coefficient depends on an ambient coordinate that no "
            "affine generator recovers");
    terms.push_back({SmoothExpr::compose(t.coeff, std::move(args)), t.index});
  }
  return {SmoothMap(d, space.generators()),
          AmbientForm(N, w.degree(), std::move(terms))};
}

// ---------------------------------------------------------------------------
// Exterior derivative, restriction, pullback

AmbientForm exterior_derivative(const AmbientForm& w) {
  const int N = w.coord_count();
  std::vector<FormTerm> terms;
  for (const auto& t : w.terms()) {
    auto fv = t.coeff.free_vars();
    for (int j : fv) {
      if (j >= N) continue;
      if (std::find(t.index.begin(), t.index.end(), j) != t.index.end())
        continue; // du_j ^ du_I vanishes
      std::vector<int> idx;
      idx.reserve(t.index.size() + 1);
      idx.push_back(j);
      idx.insert(idx.end(), t.index.begin(), t.index.end());
      terms.push_back({SmoothExpr::derivative(t.coeff, {j}), std::move(idx)});
    }
  }
  return AmbientForm(N, w.degree() + 1, std::move(terms));
}

PointForm restrict_form(const AmbientForm& w, SpacePtr space) {
  if (!space) throw std::invalid_argument("restrict_form: null space");
  if (!space->bounded())
    throw BoundError("restrict_form: space generators carry no bound certificate");
  if (space->generator_count() != w.coord_count())
    throw std::invalid_argument(
        "restrict_form: coordinate count differs from the generator family");
  std::vector<FormTerm> terms;
  for (const auto& t : w.terms()) {
    SmoothExpr c = t.coeff.arity() == 0
                       ? t.coeff
                       : SmoothExpr::compose(t.coeff, space->generators());
    terms.push_back({std::move(c), t.index});
  }
  return PointForm(std::move(space), w.degree(), std::move(terms));
}

AmbientForm pullback_along(const AmbientForm& w, const SmoothMap& F) {
  if (F.output_dim() < w.coord_count())
    throw std::invalid_argument("pullback_along: map output too small");
  const int n = F.input_dim();
  const int k = w.degree();
  if (k > n) return AmbientForm::zero(n, k);

  // increasing k-tuples of [0, n)
  std::vector<std::vector<int>> tuples;
  std::vector<int> cur(k);
  std::function<void(int, int)> build = [&](int start, int depth) {
    if (depth == k) {
      tuples.push_back(cur);
      return;
    }
    for (int i = start; i < n; ++i) {
      cur[depth] = i;
      build(i + 1, depth + 1);
    }
  };
  build(0, 0);

  std::vector<FormTerm> terms;
  for (const auto& t : w.terms()) {
    SmoothExpr c = t.coeff.arity() == 0 ? t.coeff
                                        : compose_with_map(t.coeff, F);
    for (const auto& T : tuples) {
      std::vector<std::vector<SmoothExpr>> m(k, std::vector<SmoothExpr>(k));
      for (int r = 0; r < k; ++r)
        for (int s = 0; s < k; ++s)
          m[r][s] = SmoothExpr::derivative(F.component(t.index[r]), {T[s]});
      SmoothExpr det = det_expr(m);
      if (det.is_zero()) continue;
      terms.push_back({c * det, T});
    }
  }
  return AmbientForm(n, k, std::move(terms));
}

} // namespace dspace
