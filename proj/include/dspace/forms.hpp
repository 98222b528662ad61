// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dspace/space.hpp"

namespace dspace {

/// One summand of a form: coefficient expression times the wedge of the
/// basis covectors named by the strictly increasing index tuple (0-based
/// generator/coordinate indices).
struct FormTerm {
  SmoothExpr coeff;
  std::vector<int> index;
};

/// Merges a raw term list into canonical shape: indices sorted with sign
/// bookkeeping, repeated indices dropped, equal tuples combined, structural
/// zeros removed, terms ordered by tuple.
std::vector<FormTerm> canonical_terms(std::vector<FormTerm> terms, int degree);

/// Leibniz determinant of an expression matrix; products containing a
/// structural zero factor are dropped, so constant rows collapse exactly.
SmoothExpr det_expr(const std::vector<std::vector<SmoothExpr>>& m);

/// A form given through an outer function: value on (v_1..v_k) is
/// sigma(base(pi(v)), d(slot_1 generators)(v_1), ..., d(slot_k gens)(v_k)).
/// sigma must be multi-homogeneous across the slot blocks.
struct SigmaPresentedForm {
  SpacePtr space;
  SmoothMap base{0, {}};                // R^d -> R^{n0}
  std::vector<std::vector<int>> slots;  // generator indices per tangent slot
  SmoothExpr sigma;                     // arity n0 + sum of slot sizes
};

/// A skew-symmetric point k-form on a differential space: sum of
/// coefficient * d(g_{i_1}) ^ ... ^ d(g_{i_k}) with coefficients as
/// expressions on the ambient R^d. Evaluation on k tangent vectors is
/// det-based, so the wedge of k generator differentials on k vectors carries
/// no extra factorial.
class PointForm {
public:
  PointForm(SpacePtr space, int degree, std::vector<FormTerm> terms);
  static PointForm zero(SpacePtr space, int degree);

  const SpacePtr& space() const { return space_; }
  int degree() const { return degree_; }
  const std::vector<FormTerm>& terms() const { return terms_; }
  bool is_zero_form() const { return terms_.empty(); }

  const std::optional<SigmaPresentedForm>& provenance() const {
    return provenance_;
  }
  void attach_provenance(SigmaPresentedForm s);

private:
  SpacePtr space_;
  int degree_;
  std::vector<FormTerm> terms_;
  std::optional<SigmaPresentedForm> provenance_;
};

/// A k-form over the coordinate box with coefficients as expressions in the
/// box coordinates u_1..u_N. Also reused for forms on [0,1]^n (coefficients
/// in the cube parameters).
class AmbientForm {
public:
  AmbientForm(int coord_count, int degree, std::vector<FormTerm> terms);
  static AmbientForm zero(int coord_count, int degree);

  int coord_count() const { return coord_count_; }
  int degree() const { return degree_; }
  const std::vector<FormTerm>& terms() const { return terms_; }
  bool is_zero_form() const { return terms_.empty(); }

private:
  int coord_count_;
  int degree_;
  std::vector<FormTerm> terms_;
};

PointForm wedge(const PointForm& a, const PointForm& b);
AmbientForm wedge(const AmbientForm& a, const AmbientForm& b);

/// Value at m on `degree` ambient tangent vectors:
/// sum of coeff(m) * det[ grad g_{i_r}(m) . v_s ].
/// Arguments are order-canonicalized internally so any transposition negates
/// the result exactly.
double eval_form(const PointForm& w, std::span<const double> m,
                 std::span<const std::vector<double>> vectors);
double eval_form(const AmbientForm& w, std::span<const double> u,
                 std::span<const std::vector<double>> vectors);

struct HomogeneityWitness {
  std::vector<double> base_point;
  std::vector<std::vector<double>> blocks;
  std::vector<double> scales;
  double scaled_value = 0.0;
  double expected = 0.0;
  double deviation = 0.0;
};

struct HomogeneityResult {
  bool pass = false;
  int samples_checked = 0;
  std::optional<HomogeneityWitness> witness;
};

/// Samples block scalings t_i in (-0.5, 1.5) (plus a few fixed probes) and
/// compares sigma(w, t_1 u^1, ...) against t_1...t_k sigma(w, u^1, ...);
/// tolerance 1e-9 * (1 + |sigma|).
HomogeneityResult homogeneity_check(const SigmaPresentedForm& s, int samples,
                                    std::uint64_t seed = 1234);

/// Local canonical representation: coefficients are the mixed partials of
/// sigma at (base(q), 0, ..., 0), skew-symmetrized into the sorted wedge
/// basis. Throws HomogeneityError when the check fails.
PointForm canonicalize(const SigmaPresentedForm& s, int check_samples = 64,
                       std::uint64_t seed = 1234);

/// Re-presents a canonical form through an outer function (determinant
/// expansion); canonicalize of the result reproduces the original values.
SigmaPresentedForm present_as_sigma(const PointForm& w);

struct Factorization {
  SmoothMap map;    // F: R^d -> R^n, tuple of functions named by the form
  AmbientForm eta;  // form on R^n with F* eta = omega
};

/// Writes omega as F* eta. Uses the sigma provenance when present; otherwise
/// transports coefficients through coordinate-recoverable generators
/// (generators that read a * x_j + b for some ambient coordinate x_j).
Factorization factorize(const PointForm& w);

/// Coefficient-wise exterior derivative sum_j d(coeff)/du_j du_j ^ du_I with
/// derivative nodes as coefficients; degree k -> k+1.
AmbientForm exterior_derivative(const AmbientForm& w);

/// Pullback of omega under the embedding u_i = g_i(m): coefficients compose
/// with the generator tuple, du_i becomes d(g_i). Requires a bounded space
/// whose generator count matches the form's coordinate count.
PointForm restrict_form(const AmbientForm& w, SpacePtr space);

/// Pullback of a box form along an arbitrary smooth map F (coefficients
/// compose with F; basis covectors pull back through Jacobian minors as
/// derivative-node determinants). The result lives on F's input box.
AmbientForm pullback_along(const AmbientForm& w, const SmoothMap& F);

} // namespace dspace
