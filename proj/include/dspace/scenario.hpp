// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>

#include "dspace/integrate.hpp"

namespace dspace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

/// Declarative scenario: a space, dense domains, cubes, forms, chains and a
/// task list. Names are file-local; expressions use the prefix text form.
struct SpaceDecl {
  int ambient_dim = 1;
  std::string membership = "all"; // all|rational|dyadic|zero_set|sqrt_rational
  std::vector<std::string> zero_exprs;
  double zero_tol = 1e-9;
  std::vector<std::string> generators;
  std::optional<bool> bounded;
  std::vector<std::vector<double>> samples;
};

struct DomainDecl {
  std::string name;
  std::string kind = "full"; // full|rational|dyadic
  int dim = 1;
  bool exclude_boundary = false;
  int bits = 40; // dyadic carrier precision
};

struct CubeDecl {
  std::string name;
  std::string domain;
  std::vector<std::string> map;
};

struct FormTermDecl {
  std::string coeff;
  std::vector<int> index; // 1-based in files
};

struct PointFormDecl {
  std::string name;
  int degree = 0;
  std::vector<FormTermDecl> terms;
};

struct AmbientFormDecl {
  std::string name;
  int coords = 0;
  int degree = 0;
  std::vector<FormTermDecl> terms;
};

struct ChainEntryDecl {
  double coeff = 0.0;
  std::string cube;
};

struct ChainDecl {
  std::string name;
  int dim = 0;
  std::vector<ChainEntryDecl> entries;
};

struct TaskDecl {
  std::string type;
  json params;
};

struct Scenario {
  std::string name;
  std::string description;
  SpaceDecl space;
  std::vector<DomainDecl> domains;
  std::vector<CubeDecl> cubes;
  std::vector<PointFormDecl> point_forms;
  std::vector<AmbientFormDecl> ambient_forms;
  std::vector<ChainDecl> chains;
  IntegrateConfig config;
  std::vector<TaskDecl> tasks;
};

/// Throws ParseError on malformed input.
Scenario parse_scenario(const json& j);
Scenario parse_scenario_text(const std::string& text);
ojson serialize_scenario(const Scenario& s);

struct RunOptions {
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
};

/// Executes every task in declaration order and returns the report (tasks,
/// summary, timings). Construction problems throw ValidationError; malformed
/// task parameters throw ParseError.
ojson run_scenario(const Scenario& s, const RunOptions& opts = {});

/// 0 when every task passed, 1 otherwise.
int report_exit_code(const ojson& report);

/// Built-in scenarios: rationals, sqrt-rationals, cross-nonunique-d,
/// green-square, stokes-random.
std::vector<std::pair<std::string, std::string>> list_builtins();
Scenario builtin_scenario(const std::string& name);

/// Seeded property suites, shared between scenario tasks and the acceptance
/// runner: stokes_random, dd_random, d_commute_random, canonicalize_random,
/// boundary_squared.
struct SuiteOutcome {
  std::string suite;
  bool pass = false;
  int count = 0;
  double worst = 0.0; // suite-specific deviation metric
  ojson details;
};
SuiteOutcome run_property_suite(const std::string& suite, const json& params,
                                const IntegrateConfig& cfg);

} // namespace dspace
