#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "gamma_elliptic/errors.hpp"
#include "gamma_elliptic/expression.hpp"

namespace gamma_elliptic::cli {

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& message) {
  const auto mark = node.Mark();
  throw ParseError(message, mark.is_null() ? 0 : static_cast<std::size_t>(mark.pos));
}

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) fail_at(node, where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail_at(kv.first, where + ": unknown key '" + key + "'");
  }
}

double read_double(const YAML::Node& node, const std::string& what) {
  double v = 0.0;
  try {
    v = node.as<double>();
  } catch (const YAML::Exception&) {
    fail_at(node, what + ": expected a number");
  }
  if (!std::isfinite(v)) fail_at(node, what + ": must be finite");
  return v;
}

int read_int(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<int>();
  } catch (const YAML::Exception&) {
    fail_at(node, what + ": expected an integer");
  }
}

bool read_bool(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<bool>();
  } catch (const YAML::Exception&) {
    fail_at(node, what + ": expected true or false");
  }
}

std::string read_string(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail_at(node, what + ": expected a scalar");
  return node.as<std::string>();
}

// Parses the expression now so that errors point into the config file.
std::string read_expression(const YAML::Node& node, const std::string& what) {
  const std::string text = read_string(node, what);
  try {
    (void)Expression::parse(text);
  } catch (const ParseError& e) {
    const auto mark = node.Mark();
    throw ParseError(what + ": " + e.what(), (mark.is_null() ? 0 : static_cast<std::size_t>(mark.pos)) + e.position());
  }
  return text;
}

Parameters read_params(const YAML::Node& node, const std::string& what) {
  Parameters params;
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (key == "builtin") continue;
    params[key] = read_double(kv.second, what + "." + key);
  }
  return params;
}

double param(const Parameters& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  // Keep negative literals parenthesized inside generated expressions.
  return v < 0 ? "(" + s + ")" : s;
}

std::string plain_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

int axis_param(const Parameters& p, const std::string& what) {
  const double a = param(p, "axis", 2.0);
  if (a != 0.0 && a != 1.0 && a != 2.0) throw ParseError(what + ": axis must be 0, 1 or 2", 0);
  return static_cast<int>(a);
}

const std::set<std::string> kScalarBuiltins{"constant", "cap"};
const std::set<std::string> kVectorBuiltins{"constant", "rotation"};
const std::set<std::string> kMatrixBuiltins{"scaled-identity", "tangential-diagonal"};

ScalarSpec read_scalar(const YAML::Node& node, const std::string& what) {
  ScalarSpec spec;
  if (node.IsMap()) {
    if (!node["builtin"]) fail_at(node, what + ": mapping form needs 'builtin'");
    spec.builtin = read_string(node["builtin"], what + ".builtin");
    if (!kScalarBuiltins.count(spec.builtin)) fail_at(node["builtin"], what + ": unknown builtin '" + spec.builtin + "'");
    spec.params = read_params(node, what);
    spec.expression.clear();
    (void)scalar_expression(spec);
    return spec;
  }
  spec.expression = read_expression(node, what);
  return spec;
}

VectorSpec read_vector(const YAML::Node& node, const std::string& what) {
  VectorSpec spec;
  if (node.IsMap()) {
    if (!node["builtin"]) fail_at(node, what + ": mapping form needs 'builtin'");
    spec.builtin = read_string(node["builtin"], what + ".builtin");
    if (!kVectorBuiltins.count(spec.builtin)) fail_at(node["builtin"], what + ": unknown builtin '" + spec.builtin + "'");
    spec.params = read_params(node, what);
    spec.components = {"", "", ""};
    (void)vector_expressions(spec);
    return spec;
  }
  if (node.IsScalar() && node.as<std::string>() == "zero") return spec;
  if (!node.IsSequence() || node.size() != 3) fail_at(node, what + ": expected three component expressions");
  for (std::size_t i = 0; i < 3; ++i) {
    spec.components[i] = read_expression(node[i], what + "[" + std::to_string(i) + "]");
  }
  return spec;
}

MatrixEntries read_entries(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() != 3) fail_at(node, what + ": expected a 3x3 list");
  MatrixEntries e;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!node[i].IsSequence() || node[i].size() != 3) fail_at(node[i], what + ": expected a 3x3 list");
    for (std::size_t j = 0; j < 3; ++j) {
      e[i][j] = read_expression(node[i][j], what + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      if (Expression::parse(e[i][j]).to_string() != Expression::parse(e[j][i]).to_string()) {
        fail_at(node, what + ": matrix entries must be symmetric");
      }
    }
  }
  return e;
}

MatrixSpec read_matrix(const YAML::Node& node, const std::string& what) {
  MatrixSpec spec;
  if (node.IsScalar()) {
    const std::string text = node.as<std::string>();
    if (text == "identity") return spec;
    spec.form = "scalar";
    spec.scalar = read_expression(node, what);
    return spec;
  }
  if (!node.IsMap()) fail_at(node, what + ": expected 'identity', an expression or a mapping");
  if (node["builtin"]) {
    spec.form = "builtin";
    spec.builtin = read_string(node["builtin"], what + ".builtin");
    if (!kMatrixBuiltins.count(spec.builtin)) fail_at(node["builtin"], what + ": unknown builtin '" + spec.builtin + "'");
    spec.params = read_params(node, what);
    (void)matrix_expressions(spec);
    return spec;
  }
  check_keys(node, what, {"identity_plus", "matrix"});
  if (node.size() != 1) fail_at(node, what + ": give exactly one of identity_plus, matrix");
  if (node["identity_plus"]) {
    spec.form = "identity-plus";
    spec.entries = read_entries(node["identity_plus"], what + ".identity_plus");
  } else {
    spec.form = "full";
    spec.entries = read_entries(node["matrix"], what + ".matrix");
  }
  return spec;
}

void emit_params(YAML::Emitter& out, const std::string& builtin, const Parameters& params) {
  out << YAML::BeginMap << YAML::Key << "builtin" << YAML::Value << builtin;
  for (const auto& [k, v] : params) out << YAML::Key << k << YAML::Value << plain_number(v);
  out << YAML::EndMap;
}

void emit_expression(YAML::Emitter& out, const std::string& e) { out << YAML::DoubleQuoted << e; }

void emit_entries(YAML::Emitter& out, const MatrixEntries& e) {
  out << YAML::BeginSeq;
  for (const auto& row : e) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& x : row) emit_expression(out, x);
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::Solve: return "solve";
    case Task::Study: return "study";
    case Task::Check: return "check";
    case Task::Mesh: return "mesh";
    case Task::Export: return "export";
  }
  return "solve";
}

Task parse_task(const std::string& name) {
  for (auto t : {Task::Solve, Task::Study, Task::Check, Task::Mesh, Task::Export}) {
    if (to_string(t) == name) return t;
  }
  throw ParseError("unknown task '" + name + "'", 0);
}

std::string scalar_expression(const ScalarSpec& spec) {
  if (spec.builtin.empty()) return spec.expression;
  const auto& p = spec.params;
  if (spec.builtin == "constant") return number(param(p, "value", 0.0));
  if (spec.builtin == "cap") {
    const int axis = axis_param(p, "cap");
    return "max(x" + std::to_string(axis + 1) + " - " + number(param(p, "level", 0.0)) + ", 0)";
  }
  throw ParseError("unknown scalar builtin '" + spec.builtin + "'", 0);
}

std::array<std::string, 3> vector_expressions(const VectorSpec& spec) {
  if (spec.builtin.empty()) return spec.components;
  const auto& p = spec.params;
  if (spec.builtin == "constant") {
    return {number(param(p, "x", 0.0)), number(param(p, "y", 0.0)), number(param(p, "z", 0.0))};
  }
  if (spec.builtin == "rotation") {
    // omega * (e_axis x x)
    const int a = axis_param(p, "rotation");
    const std::string w = number(param(p, "omega", 1.0));
    const int i = (a + 1) % 3;
    const int j = (a + 2) % 3;
    std::array<std::string, 3> out{"0", "0", "0"};
    out[i] = "-" + w + "*x" + std::to_string(j + 1);
    out[j] = w + "*x" + std::to_string(i + 1);
    return out;
  }
  throw ParseError("unknown vector builtin '" + spec.builtin + "'", 0);
}

MatrixEntries matrix_expressions(const MatrixSpec& spec) {
  MatrixEntries e{{{"0", "0", "0"}, {"0", "0", "0"}, {"0", "0", "0"}}};
  const auto diag = [&](const std::string& s) {
    for (int i = 0; i < 3; ++i) e[i][i] = s;
  };
  if (spec.form == "identity") {
    diag("1");
  } else if (spec.form == "scalar") {
    diag(spec.scalar);
  } else if (spec.form == "full") {
    e = spec.entries;
  } else if (spec.form == "identity-plus") {
    e = spec.entries;
    for (int i = 0; i < 3; ++i) e[i][i] = "1 + (" + spec.entries[i][i] + ")";
  } else if (spec.form == "builtin" && spec.builtin == "scaled-identity") {
    diag(number(param(spec.params, "scale", 1.0)));
  } else if (spec.form == "builtin" && spec.builtin == "tangential-diagonal") {
    // P diag(a) P + (I - P) with P = I - x x' / |x|^2, the radial projection.
    const std::array<double, 3> a{param(spec.params, "a1", 1.0), param(spec.params, "a2", 1.0),
                                  param(spec.params, "a3", 1.0)};
    const std::string r2 = "(x1^2 + x2^2 + x3^2)";
    const auto P = [&](int i, int j) {
      const std::string xx = "x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1) + "/" + r2;
      return i == j ? "(1 - " + xx + ")" : "(-" + xx + ")";
    };
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        std::string s;
        for (int k = 0; k < 3; ++k) s += (k ? " + " : "") + number(a[k]) + "*" + P(i, k) + "*" + P(k, j);
        s += " + " + std::string(i == j ? "1" : "0") + " - " + P(i, j);
        e[i][j] = s;
      }
    }
  } else {
    throw ParseError("unknown matrix form '" + spec.form + (spec.builtin.empty() ? "" : "/" + spec.builtin) + "'", 0);
  }
  return e;
}

AmbientScalarField build_scalar(const ScalarSpec& spec) {
  return make_scalar_field(Expression::parse(scalar_expression(spec)));
}

AmbientVectorField build_vector(const VectorSpec& spec) {
  const auto c = vector_expressions(spec);
  return make_vector_field({Expression::parse(c[0]), Expression::parse(c[1]), Expression::parse(c[2])});
}

AmbientMatrixField build_matrix(const MatrixSpec& spec) {
  const auto text = matrix_expressions(spec);
  std::array<std::array<Expression, 3>, 3> e;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) e[i][j] = Expression::parse(text[i][j]);
  }
  return make_matrix_field(e);
}

CoefficientSet build_coefficients(const CoefficientSpec& spec) {
  CoefficientSet c;
  c.A = build_matrix(spec.A);
  c.b = build_vector(spec.b);
  c.c = build_vector(spec.c);
  c.d = build_scalar(spec.d);
  c.ellipticity = spec.ellipticity;
  return c;
}

SurfaceSpec surface_spec(const SurfaceConfig& surface) {
  SurfaceSpec s;
  s.preset = surface.preset;
  s.radius = surface.radius;
  s.major_radius = surface.major_radius;
  s.minor_radius = surface.minor_radius;
  return s;
}

RunConfig parse_run_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.what(), e.mark.is_null() ? 0 : static_cast<std::size_t>(e.mark.pos));
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  try {
    check_keys(root, "config",
               {"task", "surface", "problem", "case", "coefficients", "load", "exact", "solver", "study", "output",
                "seed", "override_conditions", "deterministic"});
    if (root["task"]) cfg.task = parse_task(read_string(root["task"], "task"));
    if (const auto s = root["surface"]) {
      check_keys(s, "surface", {"preset", "radius", "major_radius", "minor_radius", "resolution"});
      if (s["preset"]) {
        try {
          cfg.surface.preset = parse_mesh_preset(read_string(s["preset"], "surface.preset"));
        } catch (const ContractError& e) {
          fail_at(s["preset"], e.what());
        }
      }
      if (s["radius"]) cfg.surface.radius = read_double(s["radius"], "surface.radius");
      if (s["major_radius"]) cfg.surface.major_radius = read_double(s["major_radius"], "surface.major_radius");
      if (s["minor_radius"]) cfg.surface.minor_radius = read_double(s["minor_radius"], "surface.minor_radius");
      if (s["resolution"]) cfg.surface.resolution = read_int(s["resolution"], "surface.resolution");
    }
    if (root["problem"]) {
      try {
        cfg.problem = parse_problem_kind(read_string(root["problem"], "problem"));
      } catch (const ContractError& e) {
        fail_at(root["problem"], e.what());
      }
    }
    if (root["case"]) {
      cfg.builtin_case = read_string(root["case"], "case");
      const auto names = builtin_case_names();
      if (std::find(names.begin(), names.end(), *cfg.builtin_case) == names.end()) {
        fail_at(root["case"], "unknown case '" + *cfg.builtin_case + "'");
      }
    }
    if (const auto c = root["coefficients"]) {
      check_keys(c, "coefficients", {"A", "b", "c", "d", "ellipticity"});
      if (c["A"]) cfg.coefficients.A = read_matrix(c["A"], "coefficients.A");
      if (c["b"]) cfg.coefficients.b = read_vector(c["b"], "coefficients.b");
      if (c["c"]) cfg.coefficients.c = read_vector(c["c"], "coefficients.c");
      if (c["d"]) cfg.coefficients.d = read_scalar(c["d"], "coefficients.d");
      if (c["ellipticity"]) cfg.coefficients.ellipticity = read_double(c["ellipticity"], "coefficients.ellipticity");
    }
    if (root["load"]) cfg.load = read_expression(root["load"], "load");
    if (root["exact"]) cfg.exact = read_expression(root["exact"], "exact");
    if (const auto s = root["solver"]) {
      check_keys(s, "solver", {"tolerance", "max_iterations", "threads", "divfree_threshold"});
      if (s["tolerance"]) cfg.solver.tolerance = read_double(s["tolerance"], "solver.tolerance");
      if (s["max_iterations"]) cfg.solver.max_iterations = read_int(s["max_iterations"], "solver.max_iterations");
      if (s["threads"]) cfg.solver.threads = read_int(s["threads"], "solver.threads");
      if (s["divfree_threshold"]) {
        cfg.solver.divfree_threshold = read_double(s["divfree_threshold"], "solver.divfree_threshold");
      }
    }
    if (const auto s = root["study"]) {
      check_keys(s, "study", {"levels", "start_resolution", "p_values"});
      if (s["levels"]) cfg.study.levels = read_int(s["levels"], "study.levels");
      if (s["start_resolution"]) cfg.study.start_resolution = read_int(s["start_resolution"], "study.start_resolution");
      if (const auto p = s["p_values"]) {
        if (!p.IsSequence()) fail_at(p, "study.p_values: expected a list");
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double v = read_double(p[i], "study.p_values");
          if (!(v > 1.0)) fail_at(p[i], "study.p_values: entries must exceed 1");
          cfg.study.p_values.push_back(v);
        }
      }
    }
    if (root["output"]) cfg.output = read_string(root["output"], "output");
    if (root["seed"]) {
      try {
        cfg.seed = root["seed"].as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        fail_at(root["seed"], "seed: expected a non-negative integer");
      }
    }
    if (root["override_conditions"]) cfg.override_conditions = read_bool(root["override_conditions"], "override_conditions");
    if (root["deterministic"]) cfg.deterministic = read_bool(root["deterministic"], "deterministic");
  } catch (const YAML::Exception& e) {
    throw ParseError(e.what(), e.mark.is_null() ? 0 : static_cast<std::size_t>(e.mark.pos));
  }

  const auto& s = cfg.surface;
  if (s.preset == MeshPreset::SphereIcosahedral && !(s.radius > 0.0)) {
    throw ParseError("surface.radius must be positive", 0);
  }
  if (s.preset == MeshPreset::TorusGrid && !(s.major_radius > s.minor_radius && s.minor_radius > 0.0)) {
    throw ParseError("torus needs major_radius > minor_radius > 0", 0);
  }
  if (s.resolution < (s.preset == MeshPreset::TorusGrid ? 1 : 0)) throw ParseError("surface.resolution too small", 0);
  if (!(cfg.solver.tolerance > 0.0)) throw ParseError("solver.tolerance must be positive", 0);
  if (cfg.solver.max_iterations < 0 || cfg.solver.threads < 0) {
    throw ParseError("solver.max_iterations and solver.threads must be non-negative", 0);
  }
  if (cfg.study.levels < 3) throw ParseError("study.levels must be at least 3", 0);
  if (!(cfg.coefficients.ellipticity > 0.0)) throw ParseError("coefficients.ellipticity must be positive", 0);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string emit_run_config(const RunConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "task" << YAML::Value << to_string(cfg.task);
  out << YAML::Key << "surface" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << to_string(cfg.surface.preset);
  out << YAML::Key << "radius" << YAML::Value << plain_number(cfg.surface.radius);
  out << YAML::Key << "major_radius" << YAML::Value << plain_number(cfg.surface.major_radius);
  out << YAML::Key << "minor_radius" << YAML::Value << plain_number(cfg.surface.minor_radius);
  out << YAML::Key << "resolution" << YAML::Value << cfg.surface.resolution;
  out << YAML::EndMap;
  out << YAML::Key << "problem" << YAML::Value << to_string(cfg.problem);
  if (cfg.builtin_case) out << YAML::Key << "case" << YAML::Value << *cfg.builtin_case;

  const auto& c = cfg.coefficients;
  out << YAML::Key << "coefficients" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "A" << YAML::Value;
  if (c.A.form == "identity") {
    out << "identity";
  } else if (c.A.form == "scalar") {
    emit_expression(out, c.A.scalar);
  } else if (c.A.form == "builtin") {
    emit_params(out, c.A.builtin, c.A.params);
  } else {
    out << YAML::BeginMap << YAML::Key << (c.A.form == "full" ? "matrix" : "identity_plus") << YAML::Value;
    emit_entries(out, c.A.entries);
    out << YAML::EndMap;
  }
  for (const auto& [key, v] : {std::pair{"b", &c.b}, std::pair{"c", &c.c}}) {
    out << YAML::Key << key << YAML::Value;
    if (!v->builtin.empty()) {
      emit_params(out, v->builtin, v->params);
    } else {
      out << YAML::Flow << YAML::BeginSeq;
      for (const auto& e : v->components) emit_expression(out, e);
      out << YAML::EndSeq;
    }
  }
  out << YAML::Key << "d" << YAML::Value;
  if (!c.d.builtin.empty()) {
    emit_params(out, c.d.builtin, c.d.params);
  } else {
    emit_expression(out, c.d.expression);
  }
  out << YAML::Key << "ellipticity" << YAML::Value << plain_number(c.ellipticity);
  out << YAML::EndMap;

  if (cfg.load) {
    out << YAML::Key << "load" << YAML::Value;
    emit_expression(out, *cfg.load);
  }
  if (cfg.exact) {
    out << YAML::Key << "exact" << YAML::Value;
    emit_expression(out, *cfg.exact);
  }
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tolerance" << YAML::Value << plain_number(cfg.solver.tolerance);
  out << YAML::Key << "max_iterations" << YAML::Value << cfg.solver.max_iterations;
  out << YAML::Key << "threads" << YAML::Value << cfg.solver.threads;
  out << YAML::Key << "divfree_threshold" << YAML::Value << plain_number(cfg.solver.divfree_threshold);
  out << YAML::EndMap;
  out << YAML::Key << "study" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "levels" << YAML::Value << cfg.study.levels;
  out << YAML::Key << "start_resolution" << YAML::Value << cfg.study.start_resolution;
  out << YAML::Key << "p_values" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double p : cfg.study.p_values) out << plain_number(p);
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::DoubleQuoted << cfg.output;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "override_conditions" << YAML::Value << cfg.override_conditions;
  out << YAML::Key << "deterministic" << YAML::Value << cfg.deterministic;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace gamma_elliptic::cli
