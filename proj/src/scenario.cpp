// SPDX-License-Identifier: Apache-2.0
#include "dspace/scenario.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace dspace {

// ---------------------------------------------------------------------------
// Parsing

namespace {

[[noreturn]] void bad(const std::string& msg) { throw ParseError(msg); }

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

std::vector<FormTermDecl> parse_terms(const json& j) {
  std::vector<FormTermDecl> out;
  for (const auto& t : j) {
    FormTermDecl d;
    d.coeff = t.at("coeff").get<std::string>();
    d.index = t.at("index").get<std::vector<int>>();
    out.push_back(std::move(d));
  }
  return out;
}

json terms_json(const std::vector<FormTermDecl>& terms) {
  json out = json::array();
  for (const auto& t : terms) out.push_back({{"coeff", t.coeff}, {"index", t.index}});
  return out;
}

} // namespace

Scenario parse_scenario(const json& j) {
  try {
    Scenario s;
    s.name = field_or<std::string>(j, "name", "");
    s.description = field_or<std::string>(j, "description", "");

    const json& sp = j.at("space");
    s.space.ambient_dim = sp.at("ambient_dim").get<int>();
    const json& mem = sp.at("membership");
    s.space.membership = mem.at("kind").get<std::string>();
    if (s.space.membership == "zero_set") {
      s.space.zero_exprs = mem.at("exprs").get<std::vector<std::string>>();
      s.space.zero_tol = field_or<double>(mem, "tol", 1e-9);
    }
    s.space.generators = sp.at("generators").get<std::vector<std::string>>();
    if (sp.contains("bounded")) s.space.bounded = sp.at("bounded").get<bool>();
    if (sp.contains("samples"))
      s.space.samples = sp.at("samples").get<std::vector<std::vector<double>>>();

    for (const auto& d : field_or<json>(j, "domains", json::array())) {
      DomainDecl dd;
      dd.name = d.at("name").get<std::string>();
      dd.kind = d.at("kind").get<std::string>();
      dd.dim = d.at("dim").get<int>();
      dd.exclude_boundary = field_or<bool>(d, "exclude_boundary", false);
      dd.bits = field_or<int>(d, "bits", 40);
      s.domains.push_back(std::move(dd));
    }
    for (const auto& c : field_or<json>(j, "cubes", json::array())) {
      CubeDecl cd;
      cd.name = c.at("name").get<std::string>();
      cd.domain = c.at("domain").get<std::string>();
      cd.map = c.at("map").get<std::vector<std::string>>();
      s.cubes.push_back(std::move(cd));
    }
    for (const auto& f : field_or<json>(j, "point_forms", json::array())) {
      PointFormDecl fd;
      fd.name = f.at("name").get<std::string>();
      fd.degree = f.at("degree").get<int>();
      fd.terms = parse_terms(field_or<json>(f, "terms", json::array()));
      s.point_forms.push_back(std::move(fd));
    }
    for (const auto& f : field_or<json>(j, "ambient_forms", json::array())) {
      AmbientFormDecl fd;
      fd.name = f.at("name").get<std::string>();
      fd.coords = f.at("coords").get<int>();
      fd.degree = f.at("degree").get<int>();
      fd.terms = parse_terms(field_or<json>(f, "terms", json::array()));
      s.ambient_forms.push_back(std::move(fd));
    }
    for (const auto& c : field_or<json>(j, "chains", json::array())) {
      ChainDecl cd;
      cd.name = c.at("name").get<std::string>();
      cd.dim = c.at("dim").get<int>();
      for (const auto& e : c.at("entries"))
        cd.entries.push_back(
            {e.at("coeff").get<double>(), e.at("cube").get<std::string>()});
      s.chains.push_back(std::move(cd));
    }
    if (j.contains("config")) {
      const json& cfg = j.at("config");
      if (cfg.contains("quad")) {
        const json& q = cfg.at("quad");
        s.config.quad.order = field_or<int>(q, "order", 8);
        s.config.quad.max_depth = field_or<int>(q, "max_depth", 10);
        s.config.quad.atol = field_or<double>(q, "atol", 1e-10);
        s.config.quad.rtol = field_or<double>(q, "rtol", 1e-8);
      }
      if (cfg.contains("extension")) {
        const json& e = cfg.at("extension");
        s.config.ext.k0 = field_or<int>(e, "k0", 4);
        s.config.ext.kmax = field_or<int>(e, "kmax", 24);
        s.config.ext.tol_base = field_or<double>(e, "tol_base", 10.0);
        s.config.ext.atol_floor = field_or<double>(e, "atol_floor", 1e-9);
        s.config.ext.divergence_bound =
            field_or<double>(e, "divergence_bound", 1e9);
        s.config.ext.probe_points_per_axis =
            field_or<int>(e, "probe_points_per_axis", 9);
        s.config.ext.tail_window = field_or<int>(e, "tail_window", 4);
      }
    }
    for (const auto& t : field_or<json>(j, "tasks", json::array())) {
      TaskDecl td;
      td.type = t.at("type").get<std::string>();
      td.params = t;
      s.tasks.push_back(std::move(td));
    }
    return s;
  } catch (const json::exception& e) {
    bad(std::string("scenario parse error: ") + e.what());
  }
}

Scenario parse_scenario_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

ojson serialize_scenario(const Scenario& s) {
  ojson out;
  out["name"] = s.name;
  out["description"] = s.description;
  ojson sp;
  sp["ambient_dim"] = s.space.ambient_dim;
  ojson mem;
  mem["kind"] = s.space.membership;
  if (s.space.membership == "zero_set") {
    mem["exprs"] = s.space.zero_exprs;
    mem["tol"] = s.space.zero_tol;
  }
  sp["membership"] = mem;
  sp["generators"] = s.space.generators;
  if (s.space.bounded) sp["bounded"] = *s.space.bounded;
  if (!s.space.samples.empty()) sp["samples"] = s.space.samples;
  out["space"] = sp;

  ojson doms = ojson::array();
  for (const auto& d : s.domains) {
    ojson dd;
    dd["name"] = d.name;
    dd["kind"] = d.kind;
    dd["dim"] = d.dim;
    if (d.exclude_boundary) dd["exclude_boundary"] = true;
    if (d.kind == "dyadic" && d.bits != 40) dd["bits"] = d.bits;
    doms.push_back(dd);
  }
  out["domains"] = doms;

  ojson cubes = ojson::array();
  for (const auto& c : s.cubes) {
    ojson cd;
    cd["name"] = c.name;
    cd["domain"] = c.domain;
    cd["map"] = c.map;
    cubes.push_back(cd);
  }
  out["cubes"] = cubes;

  auto form_json = [](const auto& f, bool ambient) {
    ojson fd;
    fd["name"] = f.name;
    if constexpr (std::is_same_v<std::decay_t<decltype(f)>, AmbientFormDecl>) {
      fd["coords"] = f.coords;
    }
    (void)ambient;
    fd["degree"] = f.degree;
    fd["terms"] = terms_json(f.terms);
    return fd;
  };
  ojson pfs = ojson::array();
  for (const auto& f : s.point_forms) pfs.push_back(form_json(f, false));
  out["point_forms"] = pfs;
  ojson afs = ojson::array();
  for (const auto& f : s.ambient_forms) afs.push_back(form_json(f, true));
  out["ambient_forms"] = afs;

  ojson chains = ojson::array();
  for (const auto& c : s.chains) {
    ojson cd;
    cd["name"] = c.name;
    cd["dim"] = c.dim;
    ojson entries = ojson::array();
    for (const auto& e : c.entries)
      entries.push_back(ojson{{"coeff", e.coeff}, {"cube", e.cube}});
    cd["entries"] = entries;
    chains.push_back(cd);
  }
  out["chains"] = chains;

  ojson cfg;
  cfg["quad"] = ojson{{"order", s.config.quad.order},
                      {"max_depth", s.config.quad.max_depth},
                      {"atol", s.config.quad.atol},
                      {"rtol", s.config.quad.rtol}};
  cfg["extension"] = ojson{
      {"k0", s.config.ext.k0},
      {"kmax", s.config.ext.kmax},
      {"tol_base", s.config.ext.tol_base},
      {"atol_floor", s.config.ext.atol_floor},
      {"divergence_bound", s.config.ext.divergence_bound},
      {"probe_points_per_axis", s.config.ext.probe_points_per_axis},
      {"tail_window", s.config.ext.tail_window}};
  out["config"] = cfg;

  ojson tasks = ojson::array();
  for (const auto& t : s.tasks) tasks.push_back(ojson(t.params));
  out["tasks"] = tasks;
  return out;
}

// ---------------------------------------------------------------------------
// Runtime objects

namespace {

struct Runtime {
  SpacePtr space;
  std::map<std::string, DomainPtr> domains;
  std::map<std::string, GeneralizedCube> cubes;
  std::map<std::string, PointForm> point_forms;
  std::map<std::string, AmbientForm> ambient_forms;
  std::map<std::string, Chain> chains;
  IntegrateConfig cfg;
};

std::vector<int> to_zero_based(const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) {
    if (i < 1) throw ValidationError("form index entries are 1-based");
    out.push_back(i - 1);
  }
  return out;
}

Runtime build_runtime(const Scenario& s) {
  Runtime rt;
  rt.cfg = s.config;

  Membership mem;
  if (s.space.membership == "all") mem = Membership::all();
  else if (s.space.membership == "rational") mem = Membership::rational();
  else if (s.space.membership == "dyadic") mem = Membership::dyadic();
  else if (s.space.membership == "sqrt_rational") mem = Membership::sqrt_rational();
  else if (s.space.membership == "zero_set") {
    std::vector<SmoothExpr> exprs;
    for (const auto& e : s.space.zero_exprs) exprs.push_back(SmoothExpr::parse(e));
    mem = Membership::zero_set(std::move(exprs), s.space.zero_tol);
  } else {
    throw ValidationError("unknown membership kind: " + s.space.membership);
  }
  std::vector<SmoothExpr> gens;
  for (const auto& g : s.space.generators) gens.push_back(SmoothExpr::parse(g));
  rt.space = make_space(s.space.ambient_dim, std::move(mem), std::move(gens),
                        s.space.bounded, s.space.samples);

  for (const auto& d : s.domains) {
    DomainPtr dom;
    if (d.kind == "full") dom = full_cube_domain(d.dim);
    else if (d.kind == "rational") dom = rational_domain(d.dim, d.exclude_boundary);
    else if (d.kind == "dyadic") dom = dyadic_domain(d.dim, d.bits);
    else throw ValidationError("unknown domain kind: " + d.kind);
    if (!rt.domains.emplace(d.name, std::move(dom)).second)
      throw ValidationError("duplicate domain name: " + d.name);
  }

  for (const auto& c : s.cubes) {
    auto dom = rt.domains.find(c.domain);
    if (dom == rt.domains.end())
      throw ValidationError("cube " + c.name + " references unknown domain " +
                            c.domain);
    std::vector<SmoothExpr> comps;
    for (const auto& m : c.map) comps.push_back(SmoothExpr::parse(m));
    auto cube = make_cube(dom->second,
                          SmoothMap(dom->second->dim(), std::move(comps)),
                          rt.space, c.name);
    if (!rt.cubes.emplace(c.name, std::move(cube)).second)
      throw ValidationError("duplicate cube name: " + c.name);
  }

  for (const auto& f : s.point_forms) {
    std::vector<FormTerm> terms;
    for (const auto& t : f.terms)
      terms.push_back({SmoothExpr::parse(t.coeff), to_zero_based(t.index)});
    PointForm form(rt.space, f.degree, std::move(terms));
    if (!rt.point_forms.emplace(f.name, std::move(form)).second)
      throw ValidationError("duplicate point form name: " + f.name);
  }

  for (const auto& f : s.ambient_forms) {
    std::vector<FormTerm> terms;
    for (const auto& t : f.terms)
      terms.push_back({SmoothExpr::parse(t.coeff), to_zero_based(t.index)});
    AmbientForm form(f.coords, f.degree, std::move(terms));
    if (!rt.ambient_forms.emplace(f.name, std::move(form)).second)
      throw ValidationError("duplicate ambient form name: " + f.name);
  }

  for (const auto& c : s.chains) {
    Chain chain = Chain::zero(c.dim);
    for (const auto& e : c.entries) {
      auto cube = rt.cubes.find(e.cube);
      if (cube == rt.cubes.end())
        throw ValidationError("chain " + c.name + " references unknown cube " +
                              e.cube);
      chain = add(chain, Chain::single(cube->second, e.coeff));
    }
    if (!rt.chains.emplace(c.name, std::move(chain)).second)
      throw ValidationError("duplicate chain name: " + c.name);
  }
  return rt;
}

template <typename Map>
const typename Map::mapped_type& lookup(const Map& m, const std::string& name,
                                        const char* what) {
  auto it = m.find(name);
  if (it == m.end())
    throw ValidationError(std::string("unknown ") + what + ": " + name);
  return it->second;
}

// ---------------------------------------------------------------------------
// Task execution

ojson witness_json(const ExtensionWitness& w) {
  ojson out;
  out["reason"] = w.reason;
  out["target"] = w.target;
  if (!w.values.empty()) {
    out["first_value"] = w.values.front();
    out["last_value"] = w.values.back();
    out["levels"] = ojson{{"k0", w.levels.front()}, {"kmax", w.levels.back()}};
  }
  return out;
}

ojson run_validate(Runtime& rt, const json& p) {
  const auto& cube = lookup(rt.cubes, p.at("cube"), "cube");
  std::string expect = field_or<std::string>(p, "expect", "pass");
  auto v = validate_cube(cube);
  ojson out;
  out["cube"] = cube.name;
  out["checked"] = v.checked;
  out["valid"] = v.ok;
  if (!v.failures.empty()) out["failures"] = v.failures;
  out["expected"] = expect;
  out["pass"] = (expect == "pass") == v.ok;
  return out;
}

ojson run_integrate(Runtime& rt, const json& p, const RunOptions&) {
  // the form is either a declared point form or the restricted exterior
  // derivative of a declared ambient form
  std::optional<PointForm> form;
  ojson out;
  if (p.contains("form")) {
    form = lookup(rt.point_forms, p.at("form"), "point form");
    out["form"] = p.at("form").get<std::string>();
  } else if (p.contains("d_of_ambient")) {
    const auto& amb = lookup(rt.ambient_forms, p.at("d_of_ambient"), "ambient form");
    form = restrict_form(exterior_derivative(amb), rt.space);
    out["form"] = "restrict(d " + p.at("d_of_ambient").get<std::string>() + ")";
  } else {
    bad("integrate task needs 'form' or 'd_of_ambient'");
  }

  std::string target = p.at("target").get<std::string>();
  out["target"] = target;
  auto run = [&]() -> double {
    auto colon = target.find(':');
    if (colon == std::string::npos)
      bad("integrate target must be cube:<name> or chain:<name>");
    std::string kind = target.substr(0, colon), name = target.substr(colon + 1);
    if (kind == "cube")
      return integrate_cube(lookup(rt.cubes, name, "cube"), *form, rt.cfg);
    if (kind == "chain")
      return integrate_chain(lookup(rt.chains, name, "chain"), *form, rt.cfg);
    bad("integrate target must be cube:<name> or chain:<name>");
  };

  const json& expect = p.at("expect");
  if (field_or<bool>(expect, "not_integrable", false)) {
    try {
      double v = run();
      out["value"] = v;
      out["pass"] = false;
    } catch (const NotIntegrable& e) {
      out["not_integrable"] = true;
      out["witness"] = e.what();
      out["pass"] = true;
    }
    return out;
  }
  double expected = expect.at("value").get<double>();
  double tol = field_or<double>(expect, "tol", 1e-10);
  try {
    double v = run();
    out["value"] = v;
    out["expected"] = expected;
    out["tol"] = tol;
    out["pass"] = std::abs(v - expected) <= tol;
  } catch (const NotIntegrable& e) {
    out["not_integrable"] = true;
    out["witness"] = e.what();
    out["pass"] = false;
  }
  return out;
}

ojson run_extendability(Runtime& rt, const json& p) {
  const auto& cube = lookup(rt.cubes, p.at("cube"), "cube");
  std::vector<PointForm> forms;
  for (const auto& f : field_or<json>(p, "forms", json::array()))
    forms.push_back(lookup(rt.point_forms, f.get<std::string>(), "point form"));
  auto rep = extendability_report(cube, forms, rt.cfg.ext);

  auto bucket_json = [](const auto& items) {
    ojson arr = ojson::array();
    for (const auto& i : items) {
      ojson it;
      it["what"] = i.what;
      it["pass"] = i.pass;
      if (i.witness) it["witness"] = witness_json(*i.witness);
      arr.push_back(it);
    }
    return arr;
  };
  ojson out;
  out["cube"] = cube.name;
  out["uniform"] = ojson{{"pass", rep.uniform_pass()},
                         {"items", bucket_json(rep.uniform)}};
  out["tangent"] = ojson{{"pass", rep.tangent_pass()},
                         {"items", bucket_json(rep.tangent)}};
  if (!forms.empty())
    out["forms"] = ojson{{"pass", rep.forms_pass()},
                         {"items", bucket_json(rep.forms)}};

  bool pass = true;
  if (p.contains("expect")) {
    const json& e = p.at("expect");
    auto match = [&](const char* key, bool actual) {
      if (!e.contains(key)) return true;
      return (e.at(key).get<std::string>() == "pass") == actual;
    };
    pass = match("uniform", rep.uniform_pass()) &&
           match("tangent", rep.tangent_pass()) &&
           match("forms", rep.forms_pass());
  } else {
    pass = rep.uniform_pass() && rep.tangent_pass() && rep.forms_pass();
  }
  out["pass"] = pass;
  return out;
}

ojson run_stokes(Runtime& rt, const json& p, const RunOptions& opts) {
  const auto& chain = lookup(rt.chains, p.at("chain"), "chain");
  const auto& eta = lookup(rt.point_forms, p.at("point_form"), "point form");
  const auto& ext = lookup(rt.ambient_forms, p.at("ambient_form"), "ambient form");
  double tol = opts.tol.value_or(field_or<double>(p, "tol", 1e-6));
  auto rep = verify_stokes(chain, eta, ext, rt.cfg, tol);

  ojson out;
  out["chain"] = p.at("chain").get<std::string>();
  out["lhs"] = rep.lhs;
  out["rhs"] = rep.rhs;
  out["abs_diff"] = rep.abs_diff;
  out["tolerance"] = rep.tolerance;
  ojson faces = ojson::array();
  for (const auto& f : rep.faces)
    faces.push_back(
        ojson{{"face", f.name}, {"coeff", f.coeff}, {"integral", f.integral}});
  out["faces"] = faces;
  bool pass = rep.pass;
  if (p.contains("expect")) {
    const json& e = p.at("expect");
    double vtol = field_or<double>(e, "value_tol", 1e-8);
    if (e.contains("lhs")) pass = pass && std::abs(rep.lhs - e.at("lhs").get<double>()) <= vtol;
    if (e.contains("rhs")) pass = pass && std::abs(rep.rhs - e.at("rhs").get<double>()) <= vtol;
  }
  out["pass"] = pass;
  return out;
}

ojson run_d_value(Runtime& rt, const json& p) {
  const auto& amb = lookup(rt.ambient_forms, p.at("ambient_form"), "ambient form");
  AmbientForm d = exterior_derivative(amb);
  ojson out;
  out["ambient_form"] = p.at("ambient_form").get<std::string>();
  out["degree"] = d.degree();

  // report the canonical terms with coefficients sampled at probe points
  std::mt19937_64 gen(31415);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> u(d.coord_count());
    for (auto& x : u) x = unit(gen);
    probes.push_back(std::move(u));
  }

  ojson terms = ojson::array();
  for (const auto& t : d.terms()) {
    std::vector<int> one_based;
    for (int i : t.index) one_based.push_back(i + 1);
    double v0 = probes.empty() ? 0.0 : eval(t.coeff, probes.front());
    double spread = 0.0;
    for (const auto& u : probes)
      spread = std::max(spread, std::abs(eval(t.coeff, u) - v0));
    terms.push_back(ojson{{"index", one_based},
                          {"value_at_probe", v0},
                          {"constant_within", spread}});
  }
  out["terms"] = terms;

  bool pass = true;
  const json& e = p.at("expect");
  double tol = field_or<double>(e, "tol", 1e-12);
  if (field_or<bool>(e, "zero", false)) {
    pass = d.is_zero_form();
    for (const auto& t : d.terms())
      for (const auto& u : probes)
        pass = pass && std::abs(eval(t.coeff, u)) <= tol;
  } else {
    const json& expected = e.at("terms");
    pass = expected.size() == d.terms().size();
    if (pass) {
      std::size_t i = 0;
      for (const auto& et : expected) {
        auto idx = to_zero_based(et.at("index").get<std::vector<int>>());
        double c = et.at("coeff_const").get<double>();
        const auto& t = d.terms()[i++];
        if (t.index != idx) {
          pass = false;
          break;
        }
        for (const auto& u : probes)
          if (std::abs(eval(t.coeff, u) - c) > tol) pass = false;
      }
    }
  }
  out["pass"] = pass;
  return out;
}

ojson run_restrict_eval(Runtime& rt, const json& p) {
  std::optional<AmbientForm> amb;
  ojson out;
  if (p.contains("ambient_form")) {
    amb = lookup(rt.ambient_forms, p.at("ambient_form"), "ambient form");
    out["ambient_form"] = p.at("ambient_form").get<std::string>();
  } else {
    amb = exterior_derivative(
        lookup(rt.ambient_forms, p.at("d_of_ambient"), "ambient form"));
    out["ambient_form"] = "d " + p.at("d_of_ambient").get<std::string>();
  }
  PointForm r = restrict_form(*amb, rt.space);
  auto point = p.at("point").get<std::vector<double>>();
  auto vecs = p.at("vectors").get<std::vector<std::vector<double>>>();
  double v = eval_form(r, point, vecs);
  out["point"] = point;
  out["value"] = v;
  const json& e = p.at("expect");
  double expected = e.at("value").get<double>();
  double tol = field_or<double>(e, "tol", 1e-12);
  out["expected"] = expected;
  out["pass"] = std::abs(v - expected) <= tol;
  return out;
}

ojson run_d_commute(Runtime& rt, const json& p, const RunOptions& opts) {
  const auto& amb = lookup(rt.ambient_forms, p.at("ambient_form"), "ambient form");
  auto map_exprs = p.at("map").get<std::vector<std::string>>();
  int map_dim = p.at("map_dim").get<int>();
  std::vector<SmoothExpr> comps;
  for (const auto& m : map_exprs) comps.push_back(SmoothExpr::parse(m));
  SmoothMap F(map_dim, std::move(comps));
  int samples = field_or<int>(p, "samples", 100);
  double tol = field_or<double>(p, "tol", 1e-8);
  std::uint64_t seed = opts.seed.value_or(field_or<std::uint64_t>(p, "seed", 4242));
  auto res = d_commutes_pullback_check(F, amb, samples, seed, tol);
  ojson out;
  out["samples"] = res.samples;
  out["max_deviation"] = res.max_deviation;
  out["tol"] = tol;
  std::string expect = field_or<std::string>(p, "expect", "pass");
  out["pass"] = (expect == "pass") == res.pass;
  return out;
}

ojson run_suite_task(Runtime& rt, const json& p, const RunOptions& opts) {
  json params = p;
  if (opts.seed) params["seed"] = *opts.seed;
  if (opts.tol) params["tol"] = *opts.tol;
  auto res = run_property_suite(p.at("suite").get<std::string>(), params, rt.cfg);
  ojson out;
  out["suite"] = res.suite;
  out["count"] = res.count;
  out["worst"] = res.worst;
  out["details"] = res.details;
  out["pass"] = res.pass;
  return out;
}

} // namespace

ojson run_scenario(const Scenario& s, const RunOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  Runtime rt = build_runtime(s);

  ojson report;
  report["scenario"] = s.name;
  report["description"] = s.description;
  ojson tasks = ojson::array();
  ojson timings = ojson::array();
  int passed = 0;

  for (const auto& task : s.tasks) {
    auto tt0 = std::chrono::steady_clock::now();
    ojson result;
    result["type"] = task.type;
    try {
      ojson body;
      if (task.type == "validate") body = run_validate(rt, task.params);
      else if (task.type == "integrate") body = run_integrate(rt, task.params, opts);
      else if (task.type == "extendability") body = run_extendability(rt, task.params);
      else if (task.type == "stokes") body = run_stokes(rt, task.params, opts);
      else if (task.type == "d_value") body = run_d_value(rt, task.params);
      else if (task.type == "restrict_eval") body = run_restrict_eval(rt, task.params);
      else if (task.type == "d_commute") body = run_d_commute(rt, task.params, opts);
      else if (task.type == "property_suite") body = run_suite_task(rt, task.params, opts);
      else bad("unknown task type: " + task.type);
      for (auto& [k, v] : body.items()) result[k] = v;
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      result["error"] = e.what();
      result["pass"] = false;
    }
    if (result.value("pass", false)) ++passed;
    tasks.push_back(result);
    auto tt1 = std::chrono::steady_clock::now();
    timings.push_back(
        std::chrono::duration<double, std::milli>(tt1 - tt0).count());
  }

  report["tasks"] = tasks;
  int total = static_cast<int>(s.tasks.size());
  report["summary"] = ojson{{"total", total},
                            {"passed", passed},
                            {"failed", total - passed},
                            {"pass", passed == total}};
  auto t1 = std::chrono::steady_clock::now();
  report["timings"] =
      ojson{{"total_ms", std::chrono::duration<double, std::milli>(t1 - t0).count()},
            {"tasks_ms", timings}};
  return report;
}

int report_exit_code(const ojson& report) {
  return report.at("summary").at("pass").get<bool>() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

namespace {

Scenario builtin_rationals() {
  Scenario s;
  s.name = "rationals";
  s.description =
      "Cubes into the rational line: only constant maps validate, and every "
      "integral over them vanishes exactly.";
  s.space = {1, "rational", {}, 1e-9, {"(var 1)"}, std::nullopt, {}};
  s.domains = {{"full1", "full", 1, false, 40}};
  s.cubes = {{"const_half", "full1", {"(const 0.5)"}},
             {"ramp", "full1", {"(var 1)"}},
             {"affine_third", "full1",
              {"(add (mul (const 0.3333333333333333) (var 1)) (const 0.25))"}}};
  s.point_forms = {{"d_id", 1, {{"(const 1)", {1}}}},
                   {"x_dx", 1, {{"(var 1)", {1}}}}};
  auto task = [](const char* text) {
    return TaskDecl{json::parse(text).at("type").get<std::string>(),
                    json::parse(text)};
  };
  s.tasks = {
      task(R"({"type":"validate","cube":"const_half","expect":"pass"})"),
      task(R"({"type":"validate","cube":"ramp","expect":"fail"})"),
      task(R"({"type":"validate","cube":"affine_third","expect":"fail"})"),
      task(R"({"type":"integrate","target":"cube:const_half","form":"d_id","expect":{"value":0.0,"tol":0.0}})"),
      task(R"({"type":"integrate","target":"cube:const_half","form":"x_dx","expect":{"value":0.0,"tol":0.0}})"),
  };
  return s;
}

Scenario builtin_sqrt_rationals() {
  Scenario s;
  s.name = "sqrt-rationals";
  s.description =
      "The square-root curve on rational parameters: the map extends "
      "uniformly but its tangent data blows up at zero, so the identity "
      "differential is not integrable.";
  s.space = {1, "sqrt_rational", {}, 1e-9, {"(var 1)"}, true, {}};
  s.domains = {{"rat_open", "rational", 1, true, 40}};
  s.cubes = {{"sqrt_cube", "rat_open", {"(sqrt (var 1))"}}};
  s.point_forms = {{"d_id", 1, {{"(const 1)", {1}}}}};
  s.config.ext.probe_points_per_axis = 101;
  auto task = [](const char* text) {
    return TaskDecl{json::parse(text).at("type").get<std::string>(),
                    json::parse(text)};
  };
  s.tasks = {
      task(R"({"type":"validate","cube":"sqrt_cube","expect":"pass"})"),
      task(R"({"type":"extendability","cube":"sqrt_cube","forms":["d_id"],"expect":{"uniform":"pass","tangent":"fail","forms":"fail"}})"),
      task(R"({"type":"integrate","target":"cube:sqrt_cube","form":"d_id","expect":{"not_integrable":true}})"),
  };
  return s;
}

Scenario builtin_cross() {
  Scenario s;
  s.name = "cross-nonunique-d";
  s.description =
      "The coordinate cross: two ambient extensions of the zero 1-form with "
      "different exterior derivatives, and the nonzero restriction of "
      "du1^du2 at the origin.";
  s.space = {2, "zero_set", {"(mul (var 1) (var 2))"}, 1e-9,
             {"(var 1)", "(var 2)"}, true, {}};
  s.domains = {{"full2", "full", 2, false, 40}};
  s.cubes = {{"arm_square", "full2",
              {"(mul (const 0.5) (add (var 1) (var 2)))", "(const 0)"}}};
  s.ambient_forms = {
      {"zero1", 2, 1, {}},
      {"ext_antisym", 2, 1, {{"(var 1)", {2}}, {"(neg (var 2))", {1}}}},
      {"ext_literal", 2, 1, {{"(var 1)", {2}}, {"(neg (var 2))", {2}}}},
      {"du12", 2, 2, {{"(const 1)", {1, 2}}}}};
  auto task = [](const char* text) {
    return TaskDecl{json::parse(text).at("type").get<std::string>(),
                    json::parse(text)};
  };
  s.tasks = {
      task(R"({"type":"validate","cube":"arm_square","expect":"pass"})"),
      task(R"({"type":"d_value","ambient_form":"zero1","expect":{"zero":true}})"),
      task(R"({"type":"d_value","ambient_form":"ext_antisym","expect":{"terms":[{"coeff_const":2.0,"index":[1,2]}]}})"),
      task(R"({"type":"d_value","ambient_form":"ext_literal","expect":{"terms":[{"coeff_const":1.0,"index":[1,2]}]}})"),
      task(R"({"type":"restrict_eval","d_of_ambient":"ext_antisym","point":[0.0,0.0],"vectors":[[1.0,0.0],[0.0,1.0]],"expect":{"value":2.0,"tol":1e-12}})"),
      task(R"({"type":"restrict_eval","ambient_form":"du12","point":[0.0,0.0],"vectors":[[1.0,0.0],[0.0,1.0]],"expect":{"value":1.0,"tol":1e-12}})"),
      task(R"({"type":"integrate","target":"cube:arm_square","d_of_ambient":"zero1","expect":{"value":0.0,"tol":1e-10}})"),
      task(R"({"type":"integrate","target":"cube:arm_square","d_of_ambient":"ext_antisym","expect":{"value":0.0,"tol":1e-10}})"),
  };
  return s;
}

Scenario builtin_green_square() {
  Scenario s;
  s.name = "green-square";
  s.description =
      "The area form via the boundary of the identity square: integrating "
      "x dy around the boundary equals integrating du1^du2 inside.";
  s.space = {2, "all", {}, 1e-9, {"(var 1)", "(var 2)"}, true, {}};
  s.domains = {{"full2", "full", 2, false, 40}};
  s.cubes = {{"square", "full2", {"(var 1)", "(var 2)"}}};
  s.point_forms = {{"eta", 1, {{"(var 1)", {2}}}}};
  s.ambient_forms = {{"eta_ext", 2, 1, {{"(var 1)", {2}}}}};
  s.chains = {{"Phi", 2, {{1.0, "square"}}}};
  auto task = [](const char* text) {
    return TaskDecl{json::parse(text).at("type").get<std::string>(),
                    json::parse(text)};
  };
  s.tasks = {
      task(R"({"type":"stokes","chain":"Phi","point_form":"eta","ambient_form":"eta_ext","tol":1e-6,"expect":{"lhs":1.0,"rhs":1.0,"value_tol":1e-8}})"),
  };
  return s;
}

Scenario builtin_stokes_random() {
  Scenario s;
  s.name = "stokes-random";
  s.description =
      "Seeded random polynomial chains and ambient 1-forms; both sides of "
      "the boundary identity must agree within 1e-6.";
  s.space = {2, "all", {}, 1e-9, {"(var 1)", "(var 2)"}, true, {}};
  auto task = [](const char* text) {
    return TaskDecl{json::parse(text).at("type").get<std::string>(),
                    json::parse(text)};
  };
  s.tasks = {
      task(R"({"type":"property_suite","suite":"stokes_random","count":20,"seed":20240811,"tol":1e-6})"),
  };
  return s;
}

} // namespace

std::vector<std::pair<std::string, std::string>> list_builtins() {
  return {
      {"rationals", builtin_rationals().description},
      {"sqrt-rationals", builtin_sqrt_rationals().description},
      {"cross-nonunique-d", builtin_cross().description},
      {"green-square", builtin_green_square().description},
      {"stokes-random", builtin_stokes_random().description},
  };
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "rationals") return builtin_rationals();
  if (name == "sqrt-rationals") return builtin_sqrt_rationals();
  if (name == "cross-nonunique-d") return builtin_cross();
  if (name == "green-square") return builtin_green_square();
  if (name == "stokes-random") return builtin_stokes_random();
  throw ValidationError("unknown built-in scenario: " + name);
}

// ---------------------------------------------------------------------------
// Property suites

namespace {

SmoothExpr suite_poly(std::mt19937_64& gen, int dim, int max_degree, int terms,
                      double lo, double hi) {
  std::uniform_real_distribution<double> coeff(lo, hi);
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_int_distribution<int> pick(0, std::max(dim - 1, 0));
  std::vector<SmoothExpr> parts;
  for (int t = 0; t < terms; ++t) {
    std::vector<SmoothExpr> factors = {SmoothExpr::constant(coeff(gen))};
    int budget = deg(gen);
    for (int j = 0; j < budget; ++j)
      factors.push_back(SmoothExpr::var(pick(gen)));
    parts.push_back(SmoothExpr::product(std::move(factors)));
  }
  return SmoothExpr::sum(std::move(parts));
}

SuiteOutcome suite_stokes_random(const json& params, const IntegrateConfig& cfg) {
  SuiteOutcome out;
  out.suite = "stokes_random";
  int count = field_or<int>(params, "count", 20);
  std::uint64_t seed = field_or<std::uint64_t>(params, "seed", 20240811);
  double tol = field_or<double>(params, "tol", 1e-6);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> ncoords(2, 3);
  std::uniform_real_distribution<double> cdist(0.5, 2.0);
  std::uniform_int_distribution<int> signd(0, 1);
  std::uniform_int_distribution<int> ncubes(1, 2);

  ojson rows = ojson::array();
  out.pass = true;
  for (int inst = 0; inst < count; ++inst) {
    int N = ncoords(gen);
    std::vector<SmoothExpr> gens;
    for (int i = 0; i < N; ++i) gens.push_back(SmoothExpr::var(i));
    auto space = make_space(N, Membership::all(), std::move(gens), true);

    Chain chain = Chain::zero(2);
    int m = ncubes(gen);
    for (int c = 0; c < m; ++c) {
      std::vector<SmoothExpr> comps;
      for (int i = 0; i < N; ++i)
        comps.push_back(suite_poly(gen, 2, 2, 3, -0.4, 0.4));
      auto cube = make_cube(full_cube_domain(2), SmoothMap(2, std::move(comps)),
                            space, "rnd" + std::to_string(inst) + "_" +
                                       std::to_string(c));
      double coeff = (signd(gen) ? 1.0 : -1.0) * cdist(gen);
      chain = add(chain, Chain::single(cube, coeff));
    }

    std::vector<FormTerm> terms;
    for (int i = 0; i < N; ++i)
      terms.push_back({suite_poly(gen, N, 3, 2, -1.0, 1.0), {i}});
    AmbientForm eta_ext(N, 1, std::move(terms));
    PointForm eta = restrict_form(eta_ext, space);

    auto rep = verify_stokes(chain, eta, eta_ext, cfg, tol);
    out.worst = std::max(out.worst, rep.abs_diff);
    out.pass = out.pass && rep.pass;
    rows.push_back(ojson{{"instance", inst},
                         {"coords", N},
                         {"lhs", rep.lhs},
                         {"rhs", rep.rhs},
                         {"abs_diff", rep.abs_diff},
                         {"pass", rep.pass}});
    ++out.count;
  }
  out.details = rows;
  return out;
}

SuiteOutcome suite_dd_random(const json& params, const IntegrateConfig&) {
  SuiteOutcome out;
  out.suite = "dd_random";
  int count = field_or<int>(params, "count", 100);
  int points = field_or<int>(params, "points", 100);
  double tol = field_or<double>(params, "tol", 1e-10);
  std::uint64_t seed = field_or<std::uint64_t>(params, "seed", 606060);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> ncoords(2, 4);
  std::uniform_int_distribution<int> kdeg(0, 2);
  std::uniform_int_distribution<int> nterms(1, 3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  out.pass = true;
  for (int inst = 0; inst < count; ++inst) {
    int N = ncoords(gen);
    int k = std::min(kdeg(gen), N - 1);
    std::vector<FormTerm> terms;
    int m = nterms(gen);
    std::uniform_int_distribution<int> coord(0, N - 1);
    for (int t = 0; t < m; ++t) {
      std::vector<int> idx;
      while (static_cast<int>(idx.size()) < k) {
        int c = coord(gen);
        if (std::find(idx.begin(), idx.end(), c) == idx.end()) idx.push_back(c);
      }
      terms.push_back({suite_poly(gen, N, 3, 3, -1.0, 1.0), idx});
    }
    AmbientForm w(N, k, std::move(terms));
    AmbientForm dd = exterior_derivative(exterior_derivative(w));
    for (int probe = 0; probe < points; ++probe) {
      std::vector<double> u(N);
      for (auto& x : u) x = unit(gen);
      for (const auto& t : dd.terms()) {
        double v = std::abs(eval(t.coeff, u));
        out.worst = std::max(out.worst, v);
        if (v > tol) out.pass = false;
      }
    }
    ++out.count;
  }
  out.details = ojson{{"tol", tol}, {"points_per_form", points}};
  return out;
}

SuiteOutcome suite_d_commute_random(const json& params, const IntegrateConfig&) {
  SuiteOutcome out;
  out.suite = "d_commute_random";
  int count = field_or<int>(params, "count", 50);
  int points = field_or<int>(params, "points", 100);
  double tol = field_or<double>(params, "tol", 1e-8);
  std::uint64_t seed = field_or<std::uint64_t>(params, "seed", 515151);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> ncoords(2, 3);
  std::uniform_int_distribution<int> kdeg(0, 1);
  std::uniform_int_distribution<int> coordpick(0, 2);

  out.pass = true;
  for (int inst = 0; inst < count; ++inst) {
    int N = ncoords(gen);
    std::vector<SmoothExpr> comps;
    for (int i = 0; i < N; ++i)
      comps.push_back(suite_poly(gen, 2, 2, 3, -0.4, 0.4));
    SmoothMap F(2, std::move(comps));

    int k = kdeg(gen);
    std::vector<FormTerm> terms;
    std::uniform_int_distribution<int> coord(0, N - 1);
    for (int t = 0; t < 2; ++t) {
      std::vector<int> idx;
      while (static_cast<int>(idx.size()) < k) {
        int c = coord(gen);
        if (std::find(idx.begin(), idx.end(), c) == idx.end()) idx.push_back(c);
      }
      terms.push_back({suite_poly(gen, N, 3, 2, -1.0, 1.0), idx});
    }
    AmbientForm chi(N, k, std::move(terms));
    auto res = d_commutes_pullback_check(F, chi, points, seed + inst, tol);
    out.worst = std::max(out.worst, res.max_deviation);
    out.pass = out.pass && res.pass;
    ++out.count;
  }
  out.details = ojson{{"tol", tol}, {"points_per_pair", points}};
  return out;
}

SuiteOutcome suite_canonicalize_random(const json& params,
                                       const IntegrateConfig&) {
  SuiteOutcome out;
  out.suite = "canonicalize_random";
  int count = field_or<int>(params, "count", 50);
  int rejects = field_or<int>(params, "rejects", 20);
  double tol = field_or<double>(params, "tol", 1e-10);
  std::uint64_t seed = field_or<std::uint64_t>(params, "seed", 424213);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dims(2, 3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  out.pass = true;
  // accepted multi-homogeneous presentations reproduce direct evaluation
  for (int inst = 0; inst < count; ++inst) {
    int d = dims(gen);
    std::vector<SmoothExpr> gens;
    for (int i = 0; i < d; ++i) gens.push_back(SmoothExpr::var(i));
    auto space = make_space(d, Membership::all(), std::move(gens), true);

    SigmaPresentedForm s;
    s.space = space;
    s.base = SmoothMap(d, {suite_poly(gen, d, 2, 2, -1.0, 1.0)});
    std::vector<int> all;
    for (int i = 0; i < d; ++i) all.push_back(i);
    s.slots = {all, all};
    // sigma = sum over sorted pairs P_I(w) (u^1_a u^2_b - u^1_b u^2_a)
    std::vector<SmoothExpr> parts;
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) {
        SmoothExpr p = suite_poly(gen, 1, 2, 2, -1.0, 1.0);
        SmoothExpr u1a = SmoothExpr::var(1 + a), u1b = SmoothExpr::var(1 + b);
        SmoothExpr u2a = SmoothExpr::var(1 + d + a), u2b = SmoothExpr::var(1 + d + b);
        parts.push_back(SmoothExpr::compose(p, {SmoothExpr::var(0)}) *
                        (u1a * u2b - u1b * u2a));
      }
    s.sigma = SmoothExpr::sum(std::move(parts));

    PointForm canon = canonicalize(s, 32, seed + inst);
    for (int probe = 0; probe < 10; ++probe) {
      std::vector<double> m(d), v1(d), v2(d);
      for (auto& x : m) x = unit(gen);
      for (auto& x : v1) x = unit(gen);
      for (auto& x : v2) x = unit(gen);
      double w = eval(s.base.component(0), m);
      std::vector<double> args;
      args.push_back(w);
      for (double x : v1) args.push_back(x);
      for (double x : v2) args.push_back(x);
      double direct = eval(s.sigma, args);
      std::vector<std::vector<double>> vv = {v1, v2};
      double canonical = eval_form(canon, m, vv);
      double dev = std::abs(direct - canonical) / (1.0 + std::abs(direct));
      out.worst = std::max(out.worst, dev);
      if (dev > tol) out.pass = false;
    }
    ++out.count;
  }
  // broken presentations must be rejected with a witness
  int rejected = 0;
  for (int inst = 0; inst < rejects; ++inst) {
    int d = dims(gen);
    std::vector<SmoothExpr> gens;
    for (int i = 0; i < d; ++i) gens.push_back(SmoothExpr::var(i));
    auto space = make_space(d, Membership::all(), std::move(gens), true);
    SigmaPresentedForm s;
    s.space = space;
    s.base = SmoothMap(d, {SmoothExpr::var(0)});
    std::vector<int> all;
    for (int i = 0; i < d; ++i) all.push_back(i);
    s.slots = {all, all};
    SmoothExpr u1a = SmoothExpr::var(1), u2b = SmoothExpr::var(1 + d + 1 % d);
    // multilinear part plus a block-degree violation
    s.sigma = u1a * u2b + SmoothExpr::constant(unit(gen) + 2.0) * u1a;
    auto res = homogeneity_check(s, 64, seed + inst);
    if (!res.pass && res.witness.has_value()) ++rejected;
  }
  if (rejected != rejects) out.pass = false;
  out.details = ojson{{"accepted", count}, {"rejected", rejected}};
  return out;
}

SuiteOutcome suite_boundary_squared(const json& params, const IntegrateConfig& cfg) {
  SuiteOutcome out;
  out.suite = "boundary_squared";
  double tol = field_or<double>(params, "tol", 1e-12);
  int grid = field_or<int>(params, "grid", 5);

  SmoothExpr X = SmoothExpr::var(0), Y = SmoothExpr::var(1), Z = SmoothExpr::var(2);
  auto plane = make_space(2, Membership::all(), {X, Y}, true);
  auto sp3 = make_space(3, Membership::all(), {X, Y, Z}, true);

  std::vector<GeneralizedCube> set;
  set.push_back(make_cube(full_cube_domain(2), SmoothMap::identity(2), plane, "id2"));
  set.push_back(make_cube(full_cube_domain(2),
                          SmoothMap(2, {X * X + 0.5 * Y, Y + 0.25 * X * Y}),
                          plane, "poly2"));
  set.push_back(make_cube(full_cube_domain(3), SmoothMap::identity(3), sp3, "id3"));
  set.push_back(make_cube(full_cube_domain(3),
                          SmoothMap(3, {X + 0.1 * Y * Z, Y * Y, Z + 0.5 * X}),
                          sp3, "poly3"));

  out.pass = true;
  ojson rows = ojson::array();
  for (const auto& c : set) {
    Chain bb = boundary_chain(boundary(c, cfg.ext), cfg.ext);
    Chain merged = identify_equal(bb, grid, tol);
    bool zero = merged.is_zero();
    out.pass = out.pass && zero;
    double resid = 0.0;
    for (const auto& [key, e] : merged.entries())
      resid = std::max(resid, std::abs(e.coeff));
    out.worst = std::max(out.worst, resid);
    rows.push_back(ojson{{"cube", c.name},
                         {"dim", c.dim()},
                         {"raw_faces", bb.size()},
                         {"after_identification", merged.size()},
                         {"pass", zero}});
    ++out.count;
  }
  out.details = rows;
  return out;
}

} // namespace

SuiteOutcome run_property_suite(const std::string& suite, const json& params,
                                const IntegrateConfig& cfg) {
  if (suite == "stokes_random") return suite_stokes_random(params, cfg);
  if (suite == "dd_random") return suite_dd_random(params, cfg);
  if (suite == "d_commute_random") return suite_d_commute_random(params, cfg);
  if (suite == "canonicalize_random") return suite_canonicalize_random(params, cfg);
  if (suite == "boundary_squared") return suite_boundary_squared(params, cfg);
  throw ValidationError("unknown property suite: " + suite);
}

} // namespace dspace
