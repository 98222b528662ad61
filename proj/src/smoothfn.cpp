// SPDX-License-Identifier: Apache-2.0
#include "dspace/smoothfn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace dspace {

namespace {

constexpr int kMaxDerivTags = 12;

// Square-free nilpotent multi-dual number: coefficients indexed by subsets of
// k infinitesimal tags e_1..e_k with e_i^2 = 0. The coefficient of the full
// product e_1...e_k after seeding tag i on variable v_i is the exact mixed
// partial over those variables.
class MultiDual {
public:
  explicit MultiDual(int tags)
      : tags_(tags), c_(std::size_t{1} << tags, 0.0) {}
  static MultiDual constant(int tags, double v) {
    MultiDual m(tags);
    m.c_[0] = v;
    return m;
  }

  int tags() const { return tags_; }
  std::size_t size() const { return c_.size(); }
  double value() const { return c_[0]; }
  double& coeff(std::size_t subset) { return c_[subset]; }
  double coeff(std::size_t subset) const { return c_[subset]; }

  bool nilpotent_part_zero() const {
    for (std::size_t s = 1; s < c_.size(); ++s)
      if (c_[s] != 0.0) return false;
    return true;
  }

  MultiDual& operator+=(const MultiDual& o) {
    for (std::size_t s = 0; s < c_.size(); ++s) c_[s] += o.c_[s];
    return *this;
  }
  MultiDual& operator-=(const MultiDual& o) {
    for (std::size_t s = 0; s < c_.size(); ++s) c_[s] -= o.c_[s];
    return *this;
  }
  MultiDual& negate() {
    for (double& x : c_) x = -x;
    return *this;
  }
  MultiDual& scale(double a) {
    for (double& x : c_) x *= a;
    return *this;
  }

  friend MultiDual operator*(const MultiDual& a, const MultiDual& b) {
    MultiDual r(a.tags_);
    const std::size_t n = r.c_.size();
    for (std::size_t s = 0; s < n; ++s) {
      double acc = 0.0;
      std::size_t t = s;
      while (true) {
        acc += a.c_[t] * b.c_[s ^ t];
        if (t == 0) break;
        t = (t - 1) & s;
      }
      r.c_[s] = acc;
    }
    return r;
  }

  // f applied through the truncated Taylor series: given f(x0), f'(x0), ...,
  // f^(k)(x0), returns sum_j f^(j)(x0)/j! * N^j where N is the nilpotent part.
  MultiDual compose_series(std::span<const double> derivs) const {
    MultiDual nil = *this;
    nil.c_[0] = 0.0;
    MultiDual r = MultiDual::constant(tags_, derivs[0]);
    MultiDual pw = MultiDual::constant(tags_, 1.0);
    double fact = 1.0;
    for (int j = 1; j <= tags_ && j < static_cast<int>(derivs.size()); ++j) {
      pw = pw * nil;
      bool all_zero = true;
      for (std::size_t s = 0; s < pw.size(); ++s)
        if (pw.c_[s] != 0.0) { all_zero = false; break; }
      if (all_zero) break;
      fact *= j;
      MultiDual term = pw;
      term.scale(derivs[j] / fact);
      r += term;
    }
    return r;
  }

private:
  int tags_;
  std::vector<double> c_;
};

} // namespace

struct SmoothExpr::Node {
  ExprKind kind = ExprKind::Constant;
  double cval = 0.0;
  int var = -1;
  int ipow = 0;
  std::vector<SmoothExpr> kids;   // Compose: kids[0]=outer, rest=args
  std::vector<int> dvars;         // Deriv only, kept sorted
  int arity = 0;
};

SmoothExpr::SmoothExpr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

SmoothExpr::SmoothExpr() {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Constant;
  node_ = std::move(n);
}

namespace {

int max_arity(const std::vector<SmoothExpr>& kids, std::size_t from = 0) {
  int a = 0;
  for (std::size_t i = from; i < kids.size(); ++i)
    a = std::max(a, kids[i].arity());
  return a;
}

} // namespace

SmoothExpr SmoothExpr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Constant;
  n->cval = value;
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::var(int index) {
  if (index < 0) throw std::invalid_argument("variable index must be >= 0");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Var;
  n->var = index;
  n->arity = index + 1;
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::sum(std::vector<SmoothExpr> kids) {
  if (kids.empty()) return constant(0.0);
  if (kids.size() == 1) return kids[0];
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Sum;
  n->arity = max_arity(kids);
  n->kids = std::move(kids);
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::product(std::vector<SmoothExpr> kids) {
  if (kids.empty()) return constant(1.0);
  if (kids.size() == 1) return kids[0];
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Product;
  n->arity = max_arity(kids);
  n->kids = std::move(kids);
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::unary(ExprKind kind, SmoothExpr e) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->kids = {std::move(e)};
  n->arity = n->kids[0].arity();
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::neg(SmoothExpr e) { return unary(ExprKind::Neg, std::move(e)); }
SmoothExpr SmoothExpr::exp_of(SmoothExpr e) { return unary(ExprKind::Exp, std::move(e)); }
SmoothExpr SmoothExpr::log_of(SmoothExpr e) { return unary(ExprKind::Log, std::move(e)); }
SmoothExpr SmoothExpr::sin_of(SmoothExpr e) { return unary(ExprKind::Sin, std::move(e)); }
SmoothExpr SmoothExpr::cos_of(SmoothExpr e) { return unary(ExprKind::Cos, std::move(e)); }
SmoothExpr SmoothExpr::sqrt_of(SmoothExpr e) { return unary(ExprKind::Sqrt, std::move(e)); }

SmoothExpr SmoothExpr::quot(SmoothExpr num, SmoothExpr den) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Quot;
  n->kids = {std::move(num), std::move(den)};
  n->arity = max_arity(n->kids);
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::pow_int(SmoothExpr base, int exponent) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::PowInt;
  n->ipow = exponent;
  n->kids = {std::move(base)};
  n->arity = n->kids[0].arity();
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::compose(SmoothExpr outer, std::vector<SmoothExpr> args) {
  if (outer.arity() > static_cast<int>(args.size()))
    throw std::invalid_argument("compose: outer arity exceeds argument count");
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Compose;
  n->kids.reserve(args.size() + 1);
  n->kids.push_back(std::move(outer));
  for (auto& a : args) n->kids.push_back(std::move(a));
  n->arity = max_arity(n->kids, 1);
  return SmoothExpr(std::move(n));
}

SmoothExpr SmoothExpr::derivative(SmoothExpr inner, std::vector<int> vars) {
  std::sort(vars.begin(), vars.end());
  if (std::adjacent_find(vars.begin(), vars.end()) != vars.end())
    throw std::invalid_argument("derivative: variable indices must be distinct");
  if (!vars.empty() && vars.front() < 0)
    throw std::invalid_argument("derivative: variable indices must be >= 0");
  if (static_cast<int>(vars.size()) > kMaxDerivTags)
    throw std::invalid_argument("derivative: order too high");
  if (vars.empty()) return inner;
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Deriv;
  n->arity = std::max(inner.arity(), vars.back() + 1);
  n->kids = {std::move(inner)};
  n->dvars = std::move(vars);
  return SmoothExpr(std::move(n));
}

ExprKind SmoothExpr::kind() const { return node_->kind; }
int SmoothExpr::arity() const { return node_->arity; }
double SmoothExpr::constant_value() const { return node_->cval; }
int SmoothExpr::var_index() const { return node_->var; }
int SmoothExpr::exponent() const { return node_->ipow; }
const std::vector<SmoothExpr>& SmoothExpr::children() const { return node_->kids; }
const std::vector<int>& SmoothExpr::deriv_vars() const { return node_->dvars; }

bool SmoothExpr::is_zero() const {
  SmoothExpr n = normalized();
  return n.kind() == ExprKind::Constant && n.constant_value() == 0.0;
}

namespace {

void collect_free_vars(const SmoothExpr& e, std::vector<bool>& seen) {
  switch (e.kind()) {
    case ExprKind::Constant:
      return;
    case ExprKind::Var: {
      int v = e.var_index();
      if (v >= static_cast<int>(seen.size())) seen.resize(v + 1, false);
      seen[v] = true;
      return;
    }
    case ExprKind::Compose: {
      const auto& kids = e.children();
      for (std::size_t i = 1; i < kids.size(); ++i) collect_free_vars(kids[i], seen);
      return;
    }
    default:
      for (const auto& k : e.children()) collect_free_vars(k, seen);
      return;
  }
}

} // namespace

std::vector<int> SmoothExpr::free_vars() const {
  std::vector<bool> seen;
  collect_free_vars(*this, seen);
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(seen.size()); ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

void univariate_domain_check(ExprKind kind, double x, bool has_nil) {
  switch (kind) {
    case ExprKind::Log:
      if (!(x > 0.0)) throw DomainError("log of non-positive argument");
      break;
    case ExprKind::Sqrt:
      if (x < 0.0) throw DomainError("sqrt of negative argument");
      if (x == 0.0 && has_nil)
        throw DomainError("derivative of sqrt at zero");
      break;
    default:
      break;
  }
}

// Derivatives f^(0..k)(x) of the univariate primitives.
void fill_derivs(ExprKind kind, int ipow, double x, int k,
                 std::vector<double>& d) {
  d.assign(k + 1, 0.0);
  switch (kind) {
    case ExprKind::Exp: {
      double e = std::exp(x);
      for (int j = 0; j <= k; ++j) d[j] = e;
      break;
    }
    case ExprKind::Log: {
      d[0] = std::log(x);
      double p = 1.0; // (j-1)! * x^-j accumulated
      for (int j = 1; j <= k; ++j) {
        p = (j == 1) ? 1.0 / x : p * (-(j - 1)) / x;
        d[j] = p;
      }
      break;
    }
    case ExprKind::Sin: {
      double s = std::sin(x), c = std::cos(x);
      const double cyc[4] = {s, c, -s, -c};
      for (int j = 0; j <= k; ++j) d[j] = cyc[j % 4];
      break;
    }
    case ExprKind::Cos: {
      double s = std::sin(x), c = std::cos(x);
      const double cyc[4] = {c, -s, -c, s};
      for (int j = 0; j <= k; ++j) d[j] = cyc[j % 4];
      break;
    }
    case ExprKind::Sqrt: {
      // f^(j) = prod_{i<j}(1/2 - i) * x^(1/2 - j)
      d[0] = std::sqrt(x);
      double val = d[0];
      for (int j = 1; j <= k; ++j) {
        val = val * (0.5 - (j - 1)) / x;
        d[j] = val;
      }
      break;
    }
    case ExprKind::PowInt: {
      // d^j/dx^j x^m = m (m-1) ... (m-j+1) x^(m-j)
      const int m = ipow;
      if (m >= 0) {
        double fall = 1.0;
        for (int j = 0; j <= k; ++j) {
          if (j > m) { d[j] = 0.0; continue; }
          if (j > 0) fall *= (m - j + 1);
          d[j] = fall * std::pow(x, m - j);
        }
      } else {
        if (x == 0.0) throw DomainError("negative power of zero");
        double fall = 1.0;
        for (int j = 0; j <= k; ++j) {
          if (j > 0) fall *= (m - j + 1);
          d[j] = fall * std::pow(x, m - j);
        }
      }
      break;
    }
    default:
      throw std::logic_error("fill_derivs: not a univariate primitive");
  }
}

MultiDual md_inverse(const MultiDual& a) {
  double x = a.value();
  if (x == 0.0) throw DomainError("division by zero");
  int k = a.tags();
  // d[j] = (-1)^j j! x^-(j+1)
  std::vector<double> d(k + 1);
  d[0] = 1.0 / x;
  for (int j = 1; j <= k; ++j) d[j] = d[j - 1] * (-static_cast<double>(j)) / x;
  return a.compose_series(d);
}

MultiDual eval_md(const SmoothExpr& e, std::span<const MultiDual> point, int tags);

MultiDual eval_univariate(const SmoothExpr& e, std::span<const MultiDual> point,
                          int tags) {
  MultiDual a = eval_md(e.children()[0], point, tags);
  bool nil = !a.nilpotent_part_zero();
  univariate_domain_check(e.kind(), a.value(), nil);
  if (e.kind() == ExprKind::PowInt && e.exponent() >= 0 && !nil) {
    return MultiDual::constant(tags, std::pow(a.value(), e.exponent()));
  }
  std::vector<double> d;
  fill_derivs(e.kind(), e.exponent(), a.value(), nil ? tags : 0, d);
  return a.compose_series(d);
}

MultiDual eval_md(const SmoothExpr& e, std::span<const MultiDual> point, int tags) {
  switch (e.kind()) {
    case ExprKind::Constant:
      return MultiDual::constant(tags, e.constant_value());
    case ExprKind::Var: {
      int v = e.var_index();
      if (v >= static_cast<int>(point.size()))
        throw std::invalid_argument("evaluation point has too few coordinates");
      return point[v];
    }
    case ExprKind::Sum: {
      MultiDual r(tags);
      for (const auto& k : e.children()) r += eval_md(k, point, tags);
      return r;
    }
    case ExprKind::Product: {
      MultiDual r = MultiDual::constant(tags, 1.0);
      for (const auto& k : e.children()) r = r * eval_md(k, point, tags);
      return r;
    }
    case ExprKind::Neg: {
      MultiDual r = eval_md(e.children()[0], point, tags);
      return r.negate();
    }
    case ExprKind::Quot: {
      MultiDual num = eval_md(e.children()[0], point, tags);
      MultiDual den = eval_md(e.children()[1], point, tags);
      if (den.nilpotent_part_zero()) {
        if (den.value() == 0.0) throw DomainError("division by zero");
        num.scale(1.0 / den.value());
        return num;
      }
      return num * md_inverse(den);
    }
    case ExprKind::PowInt:
    case ExprKind::Exp:
    case ExprKind::Log:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Sqrt:
      return eval_univariate(e, point, tags);
    case ExprKind::Compose: {
      const auto& kids = e.children();
      std::vector<MultiDual> inner;
      inner.reserve(kids.size() - 1);
      for (std::size_t i = 1; i < kids.size(); ++i)
        inner.push_back(eval_md(kids[i], point, tags));
      return eval_md(kids[0], inner, tags);
    }
    case ExprKind::Deriv: {
      const auto& dv = e.deriv_vars();
      const int r = static_cast<int>(dv.size());
      if (tags + r > kMaxDerivTags)
        throw std::invalid_argument("nested derivative order too high");
      const int up = tags + r;
      // Lift the point into the larger algebra; new tags occupy high bits.
      int need = e.children()[0].arity();
      for (int v : dv) need = std::max(need, v + 1);
      std::vector<MultiDual> lifted;
      lifted.reserve(need);
      const std::size_t low = std::size_t{1} << tags;
      for (int i = 0; i < need; ++i) {
        MultiDual m(up);
        if (i < static_cast<int>(point.size())) {
          for (std::size_t s = 0; s < low; ++s) m.coeff(s) = point[i].coeff(s);
        }
        lifted.push_back(std::move(m));
      }
      for (int l = 0; l < r; ++l)
        lifted[dv[l]].coeff(std::size_t{1} << (tags + l)) += 1.0;
      MultiDual res = eval_md(e.children()[0], lifted, up);
      // Extract the block containing every new tag.
      std::size_t high = 0;
      for (int l = 0; l < r; ++l) high |= std::size_t{1} << (tags + l);
      MultiDual out(tags);
      for (std::size_t s = 0; s < low; ++s) out.coeff(s) = res.coeff(s | high);
      return out;
    }
  }
  throw std::logic_error("eval_md: unhandled node kind");
}

// Plain-double fast path; drops into the multi-dual evaluator only at
// Deriv nodes.
double eval_d(const SmoothExpr& e, std::span<const double> p) {
  switch (e.kind()) {
    case ExprKind::Constant:
      return e.constant_value();
    case ExprKind::Var: {
      int v = e.var_index();
      if (v >= static_cast<int>(p.size()))
        throw std::invalid_argument("evaluation point has too few coordinates");
      return p[v];
    }
    case ExprKind::Sum: {
      double r = 0.0;
      for (const auto& k : e.children()) r += eval_d(k, p);
      return r;
    }
    case ExprKind::Product: {
      double r = 1.0;
      for (const auto& k : e.children()) r *= eval_d(k, p);
      return r;
    }
    case ExprKind::Neg:
      return -eval_d(e.children()[0], p);
    case ExprKind::Quot: {
      double num = eval_d(e.children()[0], p);
      double den = eval_d(e.children()[1], p);
      if (den == 0.0) throw DomainError("division by zero");
      return num / den;
    }
    case ExprKind::PowInt: {
      double b = eval_d(e.children()[0], p);
      int m = e.exponent();
      if (m < 0 && b == 0.0) throw DomainError("negative power of zero");
      return std::pow(b, m);
    }
    case ExprKind::Exp:
      return std::exp(eval_d(e.children()[0], p));
    case ExprKind::Log: {
      double x = eval_d(e.children()[0], p);
      if (!(x > 0.0)) throw DomainError("log of non-positive argument");
      return std::log(x);
    }
    case ExprKind::Sin:
      return std::sin(eval_d(e.children()[0], p));
    case ExprKind::Cos:
      return std::cos(eval_d(e.children()[0], p));
    case ExprKind::Sqrt: {
      double x = eval_d(e.children()[0], p);
      if (x < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(x);
    }
    case ExprKind::Compose: {
      const auto& kids = e.children();
      std::vector<double> inner;
      inner.reserve(kids.size() - 1);
      for (std::size_t i = 1; i < kids.size(); ++i)
        inner.push_back(eval_d(kids[i], p));
      return eval_d(kids[0], inner);
    }
    case ExprKind::Deriv: {
      std::vector<MultiDual> md;
      md.reserve(p.size());
      for (double x : p) md.push_back(MultiDual::constant(0, x));
      MultiDual r = eval_md(e, md, 0);
      return r.value();
    }
  }
  throw std::logic_error("eval_d: unhandled node kind");
}

} // namespace

double eval(const SmoothExpr& e, std::span<const double> p) {
  if (static_cast<int>(p.size()) < e.arity())
    throw std::invalid_argument("evaluation point has too few coordinates");
  return eval_d(e, p);
}

double partial(const SmoothExpr& e, std::span<const double> p, int i) {
  if (i < 0) throw std::invalid_argument("partial: negative variable index");
  std::size_t need = std::max<std::size_t>(p.size(), i + 1);
  if (static_cast<int>(p.size()) < e.arity())
    throw std::invalid_argument("evaluation point has too few coordinates");
  std::vector<MultiDual> md;
  md.reserve(need);
  for (std::size_t j = 0; j < need; ++j)
    md.push_back(MultiDual::constant(1, j < p.size() ? p[j] : 0.0));
  md[i].coeff(1) = 1.0;
  return eval_md(e, md, 1).coeff(1);
}

double mixed_partial(const SmoothExpr& e, std::span<const double> p,
                     std::span<const int> indices) {
  std::vector<int> idx(indices.begin(), indices.end());
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end())
    throw std::invalid_argument("mixed_partial: indices must be distinct");
  if (idx.empty()) return eval(e, p);
  if (static_cast<int>(idx.size()) > kMaxDerivTags)
    throw std::invalid_argument("mixed_partial: order too high");
  const int k = static_cast<int>(idx.size());
  std::size_t need = std::max<std::size_t>(p.size(), idx.back() + 1);
  if (static_cast<int>(p.size()) < e.arity())
    throw std::invalid_argument("evaluation point has too few coordinates");
  std::vector<MultiDual> md;
  md.reserve(need);
  for (std::size_t j = 0; j < need; ++j)
    md.push_back(MultiDual::constant(k, j < p.size() ? p[j] : 0.0));
  for (int l = 0; l < k; ++l)
    md[idx[l]].coeff(std::size_t{1} << l) = 1.0;
  return eval_md(e, md, k).coeff((std::size_t{1} << k) - 1);
}

// ---------------------------------------------------------------------------
// Normalization, substitution, serialization

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void serialize_rec(const SmoothExpr& e, std::string& out) {
  switch (e.kind()) {
    case ExprKind::Constant:
      out += "(const ";
      out += fmt_double(e.constant_value());
      out += ')';
      return;
    case ExprKind::Var:
      out += "(var ";
      out += std::to_string(e.var_index() + 1);
      out += ')';
      return;
    case ExprKind::Sum:
    case ExprKind::Product: {
      out += e.kind() == ExprKind::Sum ? "(add" : "(mul";
      for (const auto& k : e.children()) {
        out += ' ';
        serialize_rec(k, out);
      }
      out += ')';
      return;
    }
    case ExprKind::Neg:
    case ExprKind::Exp:
    case ExprKind::Log:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Sqrt: {
      const char* nm = nullptr;
      switch (e.kind()) {
        case ExprKind::Neg: nm = "neg"; break;
        case ExprKind::Exp: nm = "exp"; break;
        case ExprKind::Log: nm = "log"; break;
        case ExprKind::Sin: nm = "sin"; break;
        case ExprKind::Cos: nm = "cos"; break;
        default: nm = "sqrt"; break;
      }
      out += '(';
      out += nm;
      out += ' ';
      serialize_rec(e.children()[0], out);
      out += ')';
      return;
    }
    case ExprKind::Quot:
      out += "(div ";
      serialize_rec(e.children()[0], out);
      out += ' ';
      serialize_rec(e.children()[1], out);
      out += ')';
      return;
    case ExprKind::PowInt:
      out += "(pow ";
      serialize_rec(e.children()[0], out);
      out += ' ';
      out += std::to_string(e.exponent());
      out += ')';
      return;
    case ExprKind::Compose: {
      out += "(compose";
      for (const auto& k : e.children()) {
        out += ' ';
        serialize_rec(k, out);
      }
      out += ')';
      return;
    }
    case ExprKind::Deriv: {
      out += "(deriv ";
      serialize_rec(e.children()[0], out);
      for (int v : e.deriv_vars()) {
        out += ' ';
        out += std::to_string(v + 1);
      }
      out += ')';
      return;
    }
  }
}

} // namespace

std::string SmoothExpr::serialize() const {
  std::string out;
  serialize_rec(*this, out);
  return out;
}

SmoothExpr SmoothExpr::normalized() const {
  switch (kind()) {
    case ExprKind::Constant:
    case ExprKind::Var:
      return *this;
    case ExprKind::Sum: {
      std::vector<SmoothExpr> flat;
      double cacc = 0.0;
      bool have_const = false;
      // queue-based flatten of nested sums
      std::vector<SmoothExpr> work(children().rbegin(), children().rend());
      while (!work.empty()) {
        SmoothExpr k = work.back().normalized();
        work.pop_back();
        if (k.kind() == ExprKind::Sum) {
          for (auto it = k.children().rbegin(); it != k.children().rend(); ++it)
            work.push_back(*it);
        } else if (k.kind() == ExprKind::Constant) {
          cacc += k.constant_value();
          have_const = true;
        } else {
          flat.push_back(std::move(k));
        }
      }
      std::sort(flat.begin(), flat.end(), [](const SmoothExpr& a, const SmoothExpr& b) {
        return a.serialize() < b.serialize();
      });
      if (have_const && cacc != 0.0) flat.insert(flat.begin(), constant(cacc));
      if (flat.empty()) return constant(0.0);
      return sum(std::move(flat));
    }
    case ExprKind::Product: {
      std::vector<SmoothExpr> flat;
      double cacc = 1.0;
      bool have_const = false;
      std::vector<SmoothExpr> work(children().rbegin(), children().rend());
      while (!work.empty()) {
        SmoothExpr k = work.back().normalized();
        work.pop_back();
        if (k.kind() == ExprKind::Product) {
          for (auto it = k.children().rbegin(); it != k.children().rend(); ++it)
            work.push_back(*it);
        } else if (k.kind() == ExprKind::Constant) {
          cacc *= k.constant_value();
          have_const = true;
        } else {
          flat.push_back(std::move(k));
        }
      }
      if (have_const && cacc == 0.0) return constant(0.0);
      std::sort(flat.begin(), flat.end(), [](const SmoothExpr& a, const SmoothExpr& b) {
        return a.serialize() < b.serialize();
      });
      if (have_const && cacc != 1.0) flat.insert(flat.begin(), constant(cacc));
      if (flat.empty()) return constant(have_const ? cacc : 1.0);
      return product(std::move(flat));
    }
    case ExprKind::Neg: {
      SmoothExpr k = children()[0].normalized();
      if (k.kind() == ExprKind::Constant) return constant(-k.constant_value());
      if (k.kind() == ExprKind::Neg) return k.children()[0];
      return neg(std::move(k));
    }
    case ExprKind::Quot: {
      SmoothExpr num = children()[0].normalized();
      SmoothExpr den = children()[1].normalized();
      if (num.kind() == ExprKind::Constant && den.kind() == ExprKind::Constant &&
          den.constant_value() != 0.0)
        return constant(num.constant_value() / den.constant_value());
      if (den.kind() == ExprKind::Constant && den.constant_value() == 1.0)
        return num;
      return quot(std::move(num), std::move(den));
    }
    case ExprKind::PowInt: {
      SmoothExpr b = children()[0].normalized();
      int m = exponent();
      if (m == 0) return constant(1.0);
      if (m == 1) return b;
      if (b.kind() == ExprKind::Constant && (m > 0 || b.constant_value() != 0.0))
        return constant(std::pow(b.constant_value(), m));
      return pow_int(std::move(b), m);
    }
    default:
      break;
  }
  switch (kind()) {
    case ExprKind::Exp:
    case ExprKind::Log:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Sqrt:
      return unary(kind(), children()[0].normalized());
    case ExprKind::Compose: {
      SmoothExpr outer = children()[0].normalized();
      if (outer.kind() == ExprKind::Constant) return outer;
      std::vector<SmoothExpr> args;
      for (std::size_t i = 1; i < children().size(); ++i)
        args.push_back(children()[i].normalized());
      if (outer.kind() == ExprKind::Var)
        return args[outer.var_index()];
      return compose(std::move(outer), std::move(args));
    }
    case ExprKind::Deriv: {
      SmoothExpr inner = children()[0].normalized();
      // derivative w.r.t. a variable the child never mentions is zero
      auto fv = inner.free_vars();
      for (int v : deriv_vars())
        if (std::find(fv.begin(), fv.end(), v) == fv.end())
          return constant(0.0);
      if (inner.kind() == ExprKind::Constant) return constant(0.0);
      return derivative(std::move(inner), deriv_vars());
    }
    default:
      return *this;
  }
}

std::string SmoothExpr::key() const { return normalized().serialize(); }

bool SmoothExpr::same_as(const SmoothExpr& other) const {
  return key() == other.key();
}

SmoothExpr SmoothExpr::substituted(const std::vector<VarImage>& images) const {
  switch (kind()) {
    case ExprKind::Constant:
      return *this;
    case ExprKind::Var: {
      int v = var_index();
      if (v >= static_cast<int>(images.size())) return *this;
      const VarImage& im = images[v];
      return im.frozen ? constant(im.value) : var(im.var);
    }
    case ExprKind::Compose: {
      std::vector<SmoothExpr> args;
      for (std::size_t i = 1; i < children().size(); ++i)
        args.push_back(children()[i].substituted(images));
      return compose(children()[0], std::move(args));
    }
    case ExprKind::Deriv: {
      // Differentiate first, substitute after: wrap as a composition so the
      // Deriv still sees its own variables.
      int m = arity();
      std::vector<SmoothExpr> args;
      args.reserve(m);
      for (int v = 0; v < m; ++v) {
        if (v < static_cast<int>(images.size())) {
          const VarImage& im = images[v];
          args.push_back(im.frozen ? constant(im.value) : var(im.var));
        } else {
          args.push_back(var(v));
        }
      }
      return compose(*this, std::move(args));
    }
    case ExprKind::Sum: {
      std::vector<SmoothExpr> kids;
      for (const auto& k : children()) kids.push_back(k.substituted(images));
      return sum(std::move(kids));
    }
    case ExprKind::Product: {
      std::vector<SmoothExpr> kids;
      for (const auto& k : children()) kids.push_back(k.substituted(images));
      return product(std::move(kids));
    }
    case ExprKind::Neg:
      return neg(children()[0].substituted(images));
    case ExprKind::Quot:
      return quot(children()[0].substituted(images), children()[1].substituted(images));
    case ExprKind::PowInt:
      return pow_int(children()[0].substituted(images), exponent());
    case ExprKind::Exp:
      return exp_of(children()[0].substituted(images));
    case ExprKind::Log:
      return log_of(children()[0].substituted(images));
    case ExprKind::Sin:
      return sin_of(children()[0].substituted(images));
    case ExprKind::Cos:
      return cos_of(children()[0].substituted(images));
    case ExprKind::Sqrt:
      return sqrt_of(children()[0].substituted(images));
  }
  throw std::logic_error("substituted: unhandled node kind");
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;

  explicit Parser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError("expression parse error at offset " + std::to_string(pos) +
                     ": " + msg);
  }

  std::string atom() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
      ++pos;
    if (start == pos) fail("expected atom");
    return text.substr(start, pos - start);
  }

  bool peek_close() {
    skip_ws();
    return pos < text.size() && text[pos] == ')';
  }

  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c)
      fail(std::string("expected '") + c + "'");
    ++pos;
  }

  double number(const std::string& a) {
    char* end = nullptr;
    double v = std::strtod(a.c_str(), &end);
    if (end != a.c_str() + a.size()) fail("bad number '" + a + "'");
    return v;
  }

  int integer(const std::string& a) {
    char* end = nullptr;
    long v = std::strtol(a.c_str(), &end, 10);
    if (end != a.c_str() + a.size()) fail("bad integer '" + a + "'");
    return static_cast<int>(v);
  }

  SmoothExpr expr() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input");
    if (text[pos] != '(') {
      // bare number literal
      return SmoothExpr::constant(number(atom()));
    }
    ++pos; // consume '('
    std::string head = atom();
    SmoothExpr result;
    if (head == "const") {
      result = SmoothExpr::constant(number(atom()));
    } else if (head == "var") {
      int i = integer(atom());
      if (i < 1) fail("variable indices are 1-based");
      result = SmoothExpr::var(i - 1);
    } else if (head == "add" || head == "mul") {
      std::vector<SmoothExpr> kids;
      while (!peek_close()) kids.push_back(expr());
      result = head == "add" ? SmoothExpr::sum(std::move(kids))
                             : SmoothExpr::product(std::move(kids));
    } else if (head == "neg" || head == "exp" || head == "log" || head == "sin" ||
               head == "cos" || head == "sqrt") {
      SmoothExpr k = expr();
      if (head == "neg") result = SmoothExpr::neg(std::move(k));
      else if (head == "exp") result = SmoothExpr::exp_of(std::move(k));
      else if (head == "log") result = SmoothExpr::log_of(std::move(k));
      else if (head == "sin") result = SmoothExpr::sin_of(std::move(k));
      else if (head == "cos") result = SmoothExpr::cos_of(std::move(k));
      else result = SmoothExpr::sqrt_of(std::move(k));
    } else if (head == "div") {
      SmoothExpr num = expr();
      SmoothExpr den = expr();
      result = SmoothExpr::quot(std::move(num), std::move(den));
    } else if (head == "pow") {
      SmoothExpr base = expr();
      int m = integer(atom());
      result = SmoothExpr::pow_int(std::move(base), m);
    } else if (head == "compose") {
      SmoothExpr outer = expr();
      std::vector<SmoothExpr> args;
      while (!peek_close()) args.push_back(expr());
      result = SmoothExpr::compose(std::move(outer), std::move(args));
    } else if (head == "deriv") {
      SmoothExpr inner = expr();
      std::vector<int> vars;
      while (!peek_close()) {
        int i = integer(atom());
        if (i < 1) fail("derivative variable indices are 1-based");
        vars.push_back(i - 1);
      }
      if (vars.empty()) fail("deriv needs at least one variable index");
      result = SmoothExpr::derivative(std::move(inner), std::move(vars));
    } else {
      fail("unknown operator '" + head + "'");
    }
    expect(')');
    return result;
  }
};

} // namespace

SmoothExpr SmoothExpr::parse(const std::string& text) {
  Parser p(text);
  SmoothExpr e = p.expr();
  p.skip_ws();
  if (p.pos != text.size())
    throw ParseError("trailing characters after expression");
  return e;
}

// ---------------------------------------------------------------------------
// Operators

SmoothExpr operator+(const SmoothExpr& a, const SmoothExpr& b) {
  return SmoothExpr::sum({a, b});
}
SmoothExpr operator-(const SmoothExpr& a, const SmoothExpr& b) {
  return SmoothExpr::sum({a, SmoothExpr::neg(b)});
}
SmoothExpr operator*(const SmoothExpr& a, const SmoothExpr& b) {
  return SmoothExpr::product({a, b});
}
SmoothExpr operator/(const SmoothExpr& a, const SmoothExpr& b) {
  return SmoothExpr::quot(a, b);
}
SmoothExpr operator-(const SmoothExpr& a) { return SmoothExpr::neg(a); }
SmoothExpr operator+(double a, const SmoothExpr& b) {
  return SmoothExpr::constant(a) + b;
}
SmoothExpr operator+(const SmoothExpr& a, double b) {
  return a + SmoothExpr::constant(b);
}
SmoothExpr operator*(double a, const SmoothExpr& b) {
  return SmoothExpr::constant(a) * b;
}
SmoothExpr operator*(const SmoothExpr& a, double b) {
  return a * SmoothExpr::constant(b);
}
SmoothExpr operator-(double a, const SmoothExpr& b) {
  return SmoothExpr::constant(a) - b;
}
SmoothExpr operator-(const SmoothExpr& a, double b) {
  return a - SmoothExpr::constant(b);
}
SmoothExpr operator/(const SmoothExpr& a, double b) {
  return SmoothExpr::quot(a, SmoothExpr::constant(b));
}

// ---------------------------------------------------------------------------
// SmoothMap

SmoothMap::SmoothMap(int input_dim, std::vector<SmoothExpr> components)
    : input_dim_(input_dim), components_(std::move(components)) {
  if (input_dim < 0) throw std::invalid_argument("SmoothMap: negative input dim");
  for (const auto& c : components_)
    if (c.arity() > input_dim)
      throw std::invalid_argument("SmoothMap: component arity exceeds input dim");
}

SmoothMap SmoothMap::identity(int n) {
  std::vector<SmoothExpr> comps;
  comps.reserve(n);
  for (int i = 0; i < n; ++i) comps.push_back(SmoothExpr::var(i));
  return SmoothMap(n, std::move(comps));
}

std::vector<double> eval(const SmoothMap& m, std::span<const double> p) {
  if (static_cast<int>(p.size()) < m.input_dim())
    throw std::invalid_argument("evaluation point has too few coordinates");
  std::vector<double> out;
  out.reserve(m.output_dim());
  for (const auto& c : m.components()) out.push_back(eval(c, p));
  return out;
}

std::vector<std::vector<double>> jacobian(const SmoothMap& m,
                                          std::span<const double> p) {
  std::vector<std::vector<double>> J(m.output_dim(),
                                     std::vector<double>(m.input_dim(), 0.0));
  for (int r = 0; r < m.output_dim(); ++r)
    for (int c = 0; c < m.input_dim(); ++c)
      J[r][c] = partial(m.component(r), p, c);
  return J;
}

SmoothExpr compose_with_map(const SmoothExpr& outer, const SmoothMap& inner) {
  if (outer.arity() > inner.output_dim())
    throw std::invalid_argument("compose_with_map: arity exceeds map output dim");
  return SmoothExpr::compose(outer, inner.components());
}

SmoothMap compose_maps(const SmoothMap& outer, const SmoothMap& inner) {
  std::vector<SmoothExpr> comps;
  comps.reserve(outer.output_dim());
  for (const auto& c : outer.components())
    comps.push_back(compose_with_map(c, inner));
  return SmoothMap(inner.input_dim(), std::move(comps));
}

} // namespace dspace
