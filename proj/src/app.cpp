#include "aks/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "aks/dirac_engine.hpp"
#include "aks/lagrangian_gauge.hpp"
#include "aks/presets.hpp"

namespace aks {

using json = nlohmann::ordered_json;

const char* to_string(Verb v) {
  switch (v) {
    case Verb::Flow: return "flow";
    case Verb::LagrangianCheck: return "lagrangian-check";
    case Verb::DiracReport: return "dirac-report";
  }
  return "?";
}

const char* to_string(SplittingKind s) { return s == SplittingKind::Triangular ? "triangular" : "iwasawa"; }

const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::LaxRK4: return "lax-rk4";
    case SolverKind::Factorization: return "factorization";
    case SolverKind::Constrained: return "constrained";
  }
  return "?";
}

const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::Orbit: return "orbit";
    case InitialKind::RandomOrbit: return "random-orbit";
    case InitialKind::Matrix: return "matrix";
  }
  return "?";
}

const char* to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string s = "invalid configuration";
  for (const auto& i : issues) s += "\n  " + i;
  return s;
}

} // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : Error(join_issues(issues)), issues_(std::move(issues)) {}

namespace {

// ---------------------------------------------------------------- parsing

class Issues {
public:
  void add(const std::string& path, const std::string& message) { list_.push_back(path + ": " + message); }
  bool empty() const { return list_.empty(); }
  void raise_if_any() const {
    if (!list_.empty()) throw ConfigError(list_);
  }

private:
  std::vector<std::string> list_;
};

std::optional<double> read_number(const json& j, const std::string& path, Issues& issues) {
  if (!j.is_number()) {
    issues.add(path, "expected a number");
    return std::nullopt;
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    issues.add(path, "must be finite");
    return std::nullopt;
  }
  return v;
}

std::optional<long long> read_integer(const json& j, const std::string& path, Issues& issues) {
  if (!j.is_number_integer()) {
    issues.add(path, "expected an integer");
    return std::nullopt;
  }
  return j.get<long long>();
}

std::optional<std::string> read_string(const json& j, const std::string& path, Issues& issues) {
  if (!j.is_string()) {
    issues.add(path, "expected a string");
    return std::nullopt;
  }
  return j.get<std::string>();
}

std::optional<Mat> read_matrix(const json& j, int n, const std::string& path, Issues& issues) {
  const std::string shape = std::to_string(n) + "x" + std::to_string(n);
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    issues.add(path, "expected a " + shape + " matrix as an array of rows");
    return std::nullopt;
  }
  Mat m(n, n);
  for (int i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      issues.add(path + "[" + std::to_string(i) + "]", "expected a row of " + std::to_string(n) + " numbers");
      return std::nullopt;
    }
    for (int k = 0; k < n; ++k) {
      const auto v = read_number(row[static_cast<std::size_t>(k)],
                                 path + "[" + std::to_string(i) + "][" + std::to_string(k) + "]", issues);
      if (!v) return std::nullopt;
      m(i, k) = *v;
    }
  }
  return m;
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known,
                    Issues& issues) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      issues.add(prefix + key, "unknown field");
    }
  }
}

std::optional<SolverKind> solver_from(const std::string& s) {
  if (s == "lax-rk4") return SolverKind::LaxRK4;
  if (s == "factorization") return SolverKind::Factorization;
  if (s == "constrained") return SolverKind::Constrained;
  return std::nullopt;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

void parse_solvers(const json& j, RunConfig& c, Issues& issues) {
  std::vector<std::string> names;
  if (j.is_string()) {
    names = split_commas(j.get<std::string>());
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (auto s = read_string(j[i], "solver[" + std::to_string(i) + "]", issues)) names.push_back(*s);
    }
  } else {
    issues.add("solver", "expected a solver name or a list of names");
    return;
  }
  c.solvers.clear();
  for (const auto& name : names) {
    const auto kind = solver_from(name);
    if (!kind) {
      issues.add("solver", "unknown solver '" + name + "' (lax-rk4, factorization, constrained)");
    } else if (std::find(c.solvers.begin(), c.solvers.end(), *kind) != c.solvers.end()) {
      issues.add("solver", "solver '" + name + "' listed twice");
    } else {
      c.solvers.push_back(*kind);
    }
  }
  if (c.solvers.empty() && names.empty()) issues.add("solver", "at least one solver is required");
}

OutputFormat format_from_path(const std::string& path) {
  return std::filesystem::path(path).extension() == ".json" ? OutputFormat::Json : OutputFormat::Csv;
}

// Field checks shared by parse_config and apply_overrides.
void check_scalars(const RunConfig& c, Issues& issues) {
  if (c.n < 2) issues.add("n", "must be at least 2");
  if (c.n > 12) issues.add("n", "must be at most 12");
  if (!(c.t_end > 0.0)) issues.add("t_end", "must be positive");
  if (!(c.dt > 0.0)) issues.add("dt", "must be positive");
  if (c.sample_stride < 1) issues.add("sample_stride", "must be at least 1");
  if (!(c.restart_interval >= 0.0)) issues.add("restart_interval", "must be non-negative");
  if (!(c.initial_scale > 0.0)) issues.add("initial.scale", "must be positive");
  if (!(c.invariant_tolerance > 0.0)) issues.add("tolerances.invariant", "must be positive");
  if (!(c.cross_error_tolerance > 0.0)) issues.add("tolerances.cross_error", "must be positive");
  if (c.gauge_curves < 1) issues.add("gauge_curves", "must be at least 1");
  if (c.classification_points < 1) issues.add("classification_points", "must be at least 1");
  if (c.solvers.empty()) issues.add("solver", "at least one solver is required");
  if (c.mu.has_value() != c.nu.has_value()) issues.add("moments", "mu and nu must be given together");
  auto sized = [&](const Mat& m, const std::string& path) {
    if (m.size() != 0 && (m.rows() != c.n || m.cols() != c.n))
      issues.add(path, "expected a " + std::to_string(c.n) + "x" + std::to_string(c.n) + " matrix");
  };
  if (c.mu) sized(*c.mu, "moments.mu");
  if (c.nu) sized(*c.nu, "moments.nu");
  sized(c.g_a, "initial.g_a");
  sized(c.g_b, "initial.g_b");
  if (c.initial == InitialKind::Matrix && c.L0.size() == 0) issues.add("initial.L0", "required for type 'matrix'");
  sized(c.L0, "initial.L0");
}

Splitting make_splitting(const RunConfig& c) {
  return c.splitting == SplittingKind::Triangular ? triangular_splitting(c.n) : iwasawa_splitting(c.n);
}

} // namespace

RunConfig parse_config(const json& j) {
  Issues issues;
  RunConfig c;
  if (!j.is_object()) throw ConfigError({"(root): expected a JSON object"});
  reject_unknown(j, "",
                 {"n", "splitting", "moments", "initial", "solver", "t_end", "dt", "sample_stride", "seed",
                  "restart_interval", "output", "tolerances", "gauge_curves", "classification_points"},
                 issues);

  if (j.contains("n")) {
    if (auto v = read_integer(j["n"], "n", issues)) c.n = static_cast<int>(std::clamp<long long>(*v, -1, 1000));
  }
  const bool n_ok = c.n >= 2 && c.n <= 12;

  if (j.contains("splitting")) {
    if (auto s = read_string(j["splitting"], "splitting", issues)) {
      if (*s == "triangular") c.splitting = SplittingKind::Triangular;
      else if (*s == "iwasawa") c.splitting = SplittingKind::Iwasawa;
      else issues.add("splitting", "expected 'triangular' or 'iwasawa'");
    }
  }

  if (j.contains("moments")) {
    const json& m = j["moments"];
    if (m.is_string()) {
      if (m.get<std::string>() != "toda-default") issues.add("moments", "expected 'toda-default' or {mu, nu}");
    } else if (m.is_object()) {
      reject_unknown(m, "moments.", {"mu", "nu"}, issues);
      if (!m.contains("mu")) issues.add("moments.mu", "required");
      if (!m.contains("nu")) issues.add("moments.nu", "required");
      if (n_ok && m.contains("mu")) c.mu = read_matrix(m["mu"], c.n, "moments.mu", issues);
      if (n_ok && m.contains("nu")) c.nu = read_matrix(m["nu"], c.n, "moments.nu", issues);
    } else {
      issues.add("moments", "expected 'toda-default' or {mu, nu}");
    }
  }

  if (j.contains("initial")) {
    const json& in = j["initial"];
    if (!in.is_object()) {
      issues.add("initial", "expected an object with a 'type' field");
    } else {
      reject_unknown(in, "initial.", {"type", "g_a", "g_b", "scale", "L0"}, issues);
      std::string type = "orbit";
      if (in.contains("type")) type = read_string(in["type"], "initial.type", issues).value_or(type);
      if (type == "orbit") {
        c.initial = InitialKind::Orbit;
        if (n_ok && in.contains("g_a")) c.g_a = read_matrix(in["g_a"], c.n, "initial.g_a", issues).value_or(Mat());
        if (n_ok && in.contains("g_b")) c.g_b = read_matrix(in["g_b"], c.n, "initial.g_b", issues).value_or(Mat());
      } else if (type == "random-orbit") {
        c.initial = InitialKind::RandomOrbit;
        if (in.contains("scale")) c.initial_scale = read_number(in["scale"], "initial.scale", issues).value_or(1.0);
      } else if (type == "matrix") {
        c.initial = InitialKind::Matrix;
        if (!in.contains("L0")) issues.add("initial.L0", "required for type 'matrix'");
        else if (n_ok) c.L0 = read_matrix(in["L0"], c.n, "initial.L0", issues).value_or(Mat());
      } else {
        issues.add("initial.type", "expected 'orbit', 'random-orbit' or 'matrix'");
      }
      for (const char* key : {"g_a", "g_b"})
        if (type != "orbit" && in.contains(key)) issues.add(std::string("initial.") + key, "only valid for type 'orbit'");
      if (type != "random-orbit" && in.contains("scale")) issues.add("initial.scale", "only valid for type 'random-orbit'");
      if (type != "matrix" && in.contains("L0")) issues.add("initial.L0", "only valid for type 'matrix'");
    }
  }

  if (j.contains("solver")) parse_solvers(j["solver"], c, issues);
  if (j.contains("t_end")) c.t_end = read_number(j["t_end"], "t_end", issues).value_or(c.t_end);
  if (j.contains("dt")) c.dt = read_number(j["dt"], "dt", issues).value_or(c.dt);
  if (j.contains("sample_stride")) {
    if (auto v = read_integer(j["sample_stride"], "sample_stride", issues))
      c.sample_stride = static_cast<int>(std::clamp<long long>(*v, 0, std::numeric_limits<int>::max()));
  }
  if (j.contains("seed")) {
    const json& s = j["seed"];
    if (s.is_number_unsigned()) c.seed = s.get<std::uint64_t>();
    else if (s.is_number_integer() && s.get<long long>() >= 0) c.seed = static_cast<std::uint64_t>(s.get<long long>());
    else issues.add("seed", "expected a non-negative integer");
  }
  if (j.contains("restart_interval"))
    c.restart_interval = read_number(j["restart_interval"], "restart_interval", issues).value_or(c.restart_interval);

  if (j.contains("output")) {
    const json& o = j["output"];
    if (!o.is_object()) {
      issues.add("output", "expected an object {path, format, report}");
    } else {
      reject_unknown(o, "output.", {"path", "format", "report"}, issues);
      if (o.contains("path")) c.out = read_string(o["path"], "output.path", issues).value_or("");
      if (o.contains("report")) c.report_path = read_string(o["report"], "output.report", issues).value_or("");
      c.format = format_from_path(c.out);
      if (o.contains("format")) {
        const auto f = read_string(o["format"], "output.format", issues);
        if (f == "csv") c.format = OutputFormat::Csv;
        else if (f == "json") c.format = OutputFormat::Json;
        else if (f) issues.add("output.format", "expected 'csv' or 'json'");
      }
    }
  }

  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    if (!t.is_object()) {
      issues.add("tolerances", "expected an object");
    } else {
      reject_unknown(t, "tolerances.", {"invariant", "cross_error"}, issues);
      if (t.contains("invariant"))
        c.invariant_tolerance = read_number(t["invariant"], "tolerances.invariant", issues).value_or(1.0);
      if (t.contains("cross_error"))
        c.cross_error_tolerance = read_number(t["cross_error"], "tolerances.cross_error", issues).value_or(1.0);
    }
  }
  if (j.contains("gauge_curves")) {
    if (auto v = read_integer(j["gauge_curves"], "gauge_curves", issues))
      c.gauge_curves = static_cast<int>(std::clamp<long long>(*v, 0, 1000));
  }
  if (j.contains("classification_points")) {
    if (auto v = read_integer(j["classification_points"], "classification_points", issues))
      c.classification_points = static_cast<int>(std::clamp<long long>(*v, 0, 1000));
  }

  check_scalars(c, issues);
  issues.raise_if_any();
  build_system(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"--config: cannot open '" + path + "'"});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({"--config: " + std::string(e.what())});
  }
  return parse_config(j);
}

namespace {

json matrix_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

} // namespace

json config_to_json(const RunConfig& c) {
  json j;
  j["n"] = c.n;
  j["splitting"] = to_string(c.splitting);
  if (c.mu) j["moments"] = {{"mu", matrix_json(*c.mu)}, {"nu", matrix_json(*c.nu)}};
  else j["moments"] = "toda-default";
  json in = {{"type", to_string(c.initial)}};
  switch (c.initial) {
    case InitialKind::Orbit:
      if (c.g_a.size() != 0) in["g_a"] = matrix_json(c.g_a);
      if (c.g_b.size() != 0) in["g_b"] = matrix_json(c.g_b);
      break;
    case InitialKind::RandomOrbit: in["scale"] = c.initial_scale; break;
    case InitialKind::Matrix: in["L0"] = matrix_json(c.L0); break;
  }
  j["initial"] = in;
  json solvers = json::array();
  for (const auto s : c.solvers) solvers.push_back(to_string(s));
  j["solver"] = solvers;
  j["t_end"] = c.t_end;
  j["dt"] = c.dt;
  j["sample_stride"] = c.sample_stride;
  j["seed"] = c.seed;
  j["restart_interval"] = c.restart_interval;
  json out = {{"path", c.out}, {"format", to_string(c.format)}};
  if (!c.report_path.empty()) out["report"] = c.report_path;
  j["output"] = out;
  j["tolerances"] = {{"invariant", c.invariant_tolerance}, {"cross_error", c.cross_error_tolerance}};
  j["gauge_curves"] = c.gauge_curves;
  j["classification_points"] = c.classification_points;
  return j;
}

RunConfig apply_overrides(const RunConfig& base, const Overrides& o) {
  RunConfig c = base;
  Issues issues;
  if (o.n && *o.n != c.n) {
    c.n = *o.n;
    // explicit matrices are tied to the old size
    if (c.mu || c.g_a.size() || c.g_b.size() || c.L0.size())
      issues.add("--n", "cannot change n of a configuration with explicit matrices");
  }
  if (o.solver) parse_solvers(json(*o.solver), c, issues);
  if (o.t_end) c.t_end = *o.t_end;
  if (o.dt) c.dt = *o.dt;
  if (o.seed) c.seed = *o.seed;
  if (o.out) {
    c.out = *o.out;
    c.format = format_from_path(c.out);
  }
  check_scalars(c, issues);
  issues.raise_if_any();
  build_system(c);
  return c;
}

AKSData build_system(const RunConfig& c) {
  Issues issues;
  const Splitting s = make_splitting(c);
  std::optional<AKSData> aks;
  if (c.mu) {
    if (!s.in_b_perp(*c.mu)) issues.add("moments.mu", "must lie in the annihilator of B (B^perp)");
    if (!s.in_a_perp(*c.nu)) issues.add("moments.nu", "must lie in the annihilator of A (A^perp)");
    if (issues.empty()) aks.emplace(s, *c.mu, *c.nu);
  } else {
    aks.emplace(c.splitting == SplittingKind::Triangular ? preset_toda(c.n) : preset_iwasawa(c.n));
  }
  auto group_check = [&](const Mat& g, bool in_group, const char* path) {
    if (g.size() == 0) return;
    if (!in_group) issues.add(path, "does not have the shape of the group");
    else if (std::abs(g.determinant()) < 1e-12) issues.add(path, "is singular");
  };
  if (c.initial == InitialKind::Orbit) {
    group_check(c.g_a, c.g_a.size() == 0 || s.in_group_a(c.g_a), "initial.g_a");
    group_check(c.g_b, c.g_b.size() == 0 || s.in_group_b(c.g_b), "initial.g_b");
  }
  if (c.initial == InitialKind::Matrix && c.L0.size() != 0 && !s.algebra().contains(c.L0))
    issues.add("initial.L0", "must be traceless");
  issues.raise_if_any();
  return std::move(*aks);
}

void validate_for(Verb verb, const RunConfig& c) {
  Issues issues;
  check_scalars(c, issues);
  issues.raise_if_any();
  const bool needs_orbit = verb != Verb::Flow || std::find(c.solvers.begin(), c.solvers.end(),
                                                           SolverKind::Constrained) != c.solvers.end();
  if (needs_orbit && c.initial == InitialKind::Matrix)
    issues.add("initial.type", std::string(verb == Verb::Flow ? "the constrained solver" : to_string(verb)) +
                                   " needs orbit parameters, not an explicit L0");
  if (verb == Verb::LagrangianCheck) {
    const double steps = c.t_end / c.dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
      issues.add("dt", "must divide t_end for lagrangian-check (uniform grid)");
    else if (std::round(steps) < 4)
      issues.add("dt", "lagrangian-check needs at least 4 steps");
  }
  issues.raise_if_any();
  build_system(c);
}

namespace {

// ---------------------------------------------------------------- running

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

json number(double v) { return std::isfinite(v) ? json(v) : json("non-finite"); }

struct Checks {
  json list = json::array();
  bool all_pass = true;

  void add(const std::string& name, double value, double limit) {
    const bool pass = std::isfinite(value) && value <= limit;
    all_pass = all_pass && pass;
    list.push_back({{"name", name}, {"value", number(value)}, {"limit", limit}, {"pass", pass}});
  }
  void add_at_least(const std::string& name, double value, double minimum, json extra = json::object()) {
    const bool pass = std::isfinite(value) && value >= minimum;
    all_pass = all_pass && pass;
    json entry = {{"name", name}, {"value", number(value)}, {"minimum", minimum}, {"pass", pass}};
    entry.update(extra);
    list.push_back(entry);
  }
  void add_equal(const std::string& name, int value, int expected) {
    const bool pass = value == expected;
    all_pass = all_pass && pass;
    list.push_back({{"name", name}, {"value", value}, {"expected", expected}, {"pass", pass}});
  }
};

struct Initial {
  Mat L0;
  std::optional<OrbitSeed> seed;
};

Initial initial_state(const AKSData& aks, const RunConfig& c) {
  const int n = c.n;
  switch (c.initial) {
    case InitialKind::Orbit: {
      OrbitSeed seed{c.g_a.size() ? c.g_a : Mat(Mat::Identity(n, n)), c.g_b.size() ? c.g_b : Mat(Mat::Identity(n, n))};
      return {orbit_point(aks, seed.h_a, seed.h_b).L, seed};
    }
    case InitialKind::RandomOrbit: {
      std::mt19937_64 rng = stream(c.seed, 0);
      OrbitSeed seed = random_orbit_seed(aks, rng, c.initial_scale);
      return {orbit_point(aks, seed.h_a, seed.h_b).L, seed};
    }
    case InitialKind::Matrix: return {c.L0, std::nullopt};
  }
  return {};
}

json drift_json(const DriftReport& r) {
  json j = json::object();
  for (const auto& e : r.entries) j[e.name] = number(e.drift);
  return j;
}

Trajectory strided(const Trajectory& t, int stride) {
  if (stride <= 1) return t;
  Trajectory out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i % static_cast<std::size_t>(stride) != 0 && i + 1 != t.size()) continue;
    out.times.push_back(t.times[i]);
    out.states.push_back(t.states[i]);
    out.diagnostics.push_back(t.diagnostics[i]);
  }
  return out;
}

struct SolverRun {
  SolverKind kind;
  Trajectory traj;
  bool complete = true;
  json failure;
  std::optional<double> constraint_drift;
};

SolverRun run_solver(const AKSData& aks, const RunConfig& c, const Initial& init, SolverKind kind) {
  SolverRun r{kind, {}, true, nullptr, std::nullopt};
  const Splitting& s = aks.splitting();
  try {
    switch (kind) {
      case SolverKind::LaxRK4: {
        LaxIntegrationOptions o;
        o.sample_stride = c.sample_stride;
        r.traj = integrate_lax(aks, init.L0, c.t_end, c.dt, o);
        break;
      }
      case SolverKind::Factorization: {
        FactorizationOptions o;
        o.seed = init.seed;
        o.restart_interval = c.restart_interval;
        r.traj = factorization_solve(aks, init.L0, time_grid(c.t_end, c.dt, c.sample_stride), o);
        break;
      }
      case SolverKind::Constrained: {
        const int n = c.n;
        const PhasePoint p0 = constrained_point(aks, init.seed->h_a, init.seed->h_b, Mat::Zero(n, n), Mat::Zero(n, n));
        ConstrainedOptions o;
        o.sample_stride = c.sample_stride;
        o.drift_limit = std::max(1e-4, c.invariant_tolerance);
        const Mat zero = Mat::Zero(n, n);
        const ConstrainedTrajectory ct = constrained_integrate(aks, p0, zero, zero, c.t_end, c.dt, o);
        for (std::size_t i = 0; i < ct.times.size(); ++i) r.traj.push(s, ct.times[i], ct.ltilde[i].L);
        r.constraint_drift = ct.max_drift();
        break;
      }
    }
  } catch (const FactorizationBlowup& e) {
    r.complete = false;
    r.traj = e.partial();
    r.failure = {{"kind", "blow-up"}, {"time", number(e.time())}, {"last_good_time", number(e.last_good_time())},
                 {"message", e.what()}};
  } catch (const IntegrationAborted& e) {
    r.complete = false;
    r.traj = e.partial();
    r.failure = {{"kind", "blow-up"}, {"time", nullptr}, {"last_good_time", number(e.last_good_time())},
                 {"message", e.what()}};
  } catch (const NotInCheckedDomain& e) {
    r.complete = false;
    r.failure = {{"kind", "blow-up"}, {"time", nullptr}, {"message", e.what()}};
  } catch (const ConstraintDrift& e) {
    r.complete = false;
    r.failure = {{"kind", "constraint-drift"}, {"time", number(e.time())}, {"drift", number(e.drift())},
                 {"message", e.what()}};
  }
  return r;
}

bool is_blow_up(const SolverRun& r) { return !r.complete && r.failure.value("kind", "") == "blow-up"; }

RunResult run_flow(const AKSData& aks, const RunConfig& c) {
  const Initial init = initial_state(aks, c);
  std::vector<SolverRun> runs;
  for (const auto kind : c.solvers) runs.push_back(run_solver(aks, c, init, kind));

  Checks checks;
  json solvers = json::array();
  bool blew_up = false;
  for (const auto& r : runs) {
    json entry = {{"solver", to_string(r.kind)}, {"samples", r.traj.size()}, {"completed", r.complete},
                  {"failure", r.failure}};
    if (!r.traj.empty()) {
      const DriftReport drift = invariant_report(r.traj);
      entry["invariant_drift"] = drift_json(drift);
      entry["moment_drift"] = number(moment_drift(aks, r.traj));
      if (r.kind == SolverKind::Factorization && init.seed) entry["orbit_checks"] = r.traj.orbit_checks;
      if (r.complete) checks.add(std::string(to_string(r.kind)) + " invariant drift", drift.max_drift(), c.invariant_tolerance);
    }
    if (r.constraint_drift) {
      entry["constraint_drift"] = number(*r.constraint_drift);
      checks.add("constrained constraint drift", *r.constraint_drift, c.invariant_tolerance);
    }
    if (!r.complete && !is_blow_up(r)) checks.all_pass = false;
    blew_up = blew_up || is_blow_up(r);
    solvers.push_back(entry);
  }

  json cross = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t k = i + 1; k < runs.size(); ++k) {
      if (!runs[i].complete || !runs[k].complete) continue;
      const double err = max_cross_error(runs[i].traj, runs[k].traj);
      cross.push_back({{"solvers", {to_string(runs[i].kind), to_string(runs[k].kind)}}, {"max_error", number(err)}});
      checks.add(std::string("cross error ") + to_string(runs[i].kind) + " vs " + to_string(runs[k].kind), err,
                 c.cross_error_tolerance);
    }

  RunResult result;
  result.samples = runs.front().traj;
  result.report = {{"verb", "flow"},
                   {"samples_from", to_string(runs.front().kind)},
                   {"initial_H", number(hamiltonian(init.L0))},
                   {"solvers", solvers},
                   {"cross_error", cross},
                   {"checks", checks.list}};
  result.status = blew_up ? exit_code::blow_up : checks.all_pass ? exit_code::ok : exit_code::invariant_violation;
  return result;
}

double max_gap(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_abs(Mat(a[i] - b[i])));
  return worst;
}

std::vector<Mat> q_series(const AKSData& aks, const ConfigCurve& curve) {
  std::vector<Mat> q;
  for (const auto& p : curve.points) q.push_back(q_assemble(aks, p).L);
  return q;
}

ConfigCurve prefix(const ConfigCurve& c, std::size_t count) {
  ConfigCurve out;
  out.times.assign(c.times.begin(), c.times.begin() + static_cast<std::ptrdiff_t>(count));
  out.points.assign(c.points.begin(), c.points.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

// Samples 0, 2, 4, ... of a curve with an odd number of samples.
ConfigCurve every_other(const ConfigCurve& c) {
  ConfigCurve out;
  const std::size_t last = c.size() % 2 == 1 ? c.size() : c.size() - 1;
  for (std::size_t i = 0; i < last; i += 2) {
    out.times.push_back(c.times[i]);
    out.points.push_back(c.points[i]);
  }
  return out;
}

RunResult run_lagrangian(const AKSData& aks, const RunConfig& c) {
  const Initial init = initial_state(aks, c);
  const Splitting& s = aks.splitting();
  const int n = c.n;
  const long steps = std::lround(c.t_end / c.dt);
  std::vector<double> times;
  for (long k = 0; k <= steps; ++k) times.push_back(k == steps ? c.t_end : k * c.dt);
  const double h = c.t_end / static_cast<double>(steps);

  RunResult result;
  Checks checks;
  try {
    const ConfigCurve sol = exact_solution_curve(aks, *init.seed, times);
    const std::vector<Mat> q0 = q_series(aks, sol);
    Trajectory qt;
    for (std::size_t i = 0; i < times.size(); ++i) qt.push(s, times[i], q0[i]);
    result.samples = strided(qt, c.sample_stride);

    double q_scale = 1.0;
    for (const auto& q : q0) q_scale = std::max(q_scale, max_abs(q));
    const ELResiduals el = el_residuals(aks, sol);
    checks.add("exact solution EL constraint residual", el.max_constraint(), 1e-9 * q_scale);
    // Residuals of second-order differences: compare step h with 2h on the same curve.
    auto order_check = [&](const std::string& name, const ConfigCurve& curve, auto&& residual) {
      const ConfigCurve coarse = every_other(curve);
      const double fine_r = residual(curve), coarse_r = residual(coarse);
      const double floor = 1e-9 * q_scale;
      const double order = fine_r <= floor ? 2.0 : std::log2(coarse_r / fine_r);
      checks.add_at_least(name + " order", order, 1.8, {{"residual", number(fine_r)}, {"residual_2h", number(coarse_r)}});
    };
    auto evolution = [&](const ConfigCurve& c) { return el_residuals(aks, c).max_evolution(); };
    auto split = [&](const ConfigCurve& c) { return q_split_residual(aks, c); };
    auto lax = [&](const ConfigCurve& c) { return q_lax_residual(aks, c); };
    order_check("exact solution EL evolution residual", sol, evolution);
    order_check("exact solution split residual", sol, split);
    order_check("exact solution Lax residual", sol, lax);

    std::mt19937_64 rng = stream(c.seed, 1);
    double q_gap = 0.0, el_constraint = 0.0;
    for (int k = 0; k < c.gauge_curves; ++k) {
      const ConfigCurve moved = gauge_transform(aks, sol, random_gauge_curve(aks, times, rng));
      q_gap = std::max(q_gap, max_gap(q_series(aks, moved), q0));
      el_constraint = std::max(el_constraint, el_residuals(aks, moved).max_constraint());
      order_check("gauge curve " + std::to_string(k + 1) + " EL evolution residual", moved, evolution);
    }
    checks.add("Q invariance under gauge curves", q_gap, 1e-9 * q_scale);
    checks.add("gauge-transformed EL constraint residual", el_constraint, 1e-9 * q_scale);

    // Two gauge paths with equal endpoints must shift the action by the same amount.
    json action_report = nullptr;
    const auto& la = aks.little_a();
    const auto& lb = aks.little_b();
    if (!la.empty() || !lb.empty()) {
      const std::size_t count = times.size() % 2 == 1 ? times.size() : times.size() - 1;
      const ConfigCurve base = prefix(sol, count);
      const std::vector<double> sub(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(count));
      const double T = sub.back();
      const double pi = std::acos(-1.0);
      std::uniform_real_distribution<double> u(-0.5, 0.5);
      auto coeffs = [&](std::size_t m) {
        std::vector<double> v(m);
        for (auto& x : v) x = u(rng);
        return v;
      };
      const auto a1 = coeffs(la.size()), a2 = coeffs(la.size()), b1 = coeffs(lb.size()), b2 = coeffs(lb.size());
      auto path = [&](const std::vector<Mat>& basis, const std::vector<double>& end, const std::vector<double>& bend,
                      double bend_scale) {
        return [&basis, end, bend, bend_scale, T, pi, n](double t) {
          Mat x = Mat::Zero(n, n);
          for (std::size_t m = 0; m < basis.size(); ++m)
            x += (end[m] * t / T + bend_scale * bend[m] * std::sin(pi * t / T)) * basis[m];
          return x;
        };
      };
      const double s0 = action(aks, base);
      const double ds_straight =
          action(aks, gauge_transform(aks, base, make_gauge_curve(n, sub, path(la, a1, a2, 0.0), path(lb, b1, b2, 0.0)))) -
          s0;
      const double ds_bent =
          action(aks, gauge_transform(aks, base, make_gauge_curve(n, sub, path(la, a1, a2, 1.0), path(lb, b1, b2, 1.0)))) -
          s0;
      action_report = {{"action", number(s0)}, {"delta_straight", number(ds_straight)}, {"delta_bent", number(ds_bent)}};
      checks.add("equal-endpoint action difference", std::abs(ds_straight - ds_bent), 1e-8 * std::max(1.0, std::abs(s0)));
    }

    result.report = {{"verb", "lagrangian-check"},
                     {"samples_from", "Q along the exact solution"},
                     {"gauge_curves", c.gauge_curves},
                     {"little_algebra_dims", {la.size(), lb.size()}},
                     {"action", action_report},
                     {"checks", checks.list}};
    result.status = checks.all_pass ? exit_code::ok : exit_code::invariant_violation;
  } catch (const NotInCheckedDomain& e) {
    result.report = {{"verb", "lagrangian-check"},
                     {"failure", {{"kind", "blow-up"}, {"message", e.what()}}},
                     {"checks", checks.list}};
    result.status = exit_code::blow_up;
  }
  return result;
}

RunResult run_dirac(const AKSData& aks, const RunConfig& c) {
  const Initial init = initial_state(aks, c);
  const Splitting& s = aks.splitting();
  const int n = c.n;
  Checks checks;
  RunResult result;

  const ConstraintSet cs = build_constraints(aks);
  std::mt19937_64 rng = stream(c.seed, 2);
  std::vector<PhasePoint> points;
  for (int k = 0; k < c.classification_points; ++k) points.push_back(random_constrained_point(aks, rng));
  const Classification cls = classify_constraints(aks, cs, points);

  json kinds = json::object();
  for (const auto kind : {ConstraintKind::PrimaryPiAlpha, ConstraintKind::PrimaryPiBeta, ConstraintKind::SecondaryJr,
                          ConstraintKind::SecondaryJl, ConstraintKind::SecondaryAlpha, ConstraintKind::SecondaryBeta})
    kinds[to_string(kind)] = cs.count(kind);
  const int la = static_cast<int>(aks.little_a().size()), lb = static_cast<int>(aks.little_b().size());
  checks.add_equal("first-class count", cls.n_first(), 2 * (la + lb));

  double lp_error = 0.0;
  for (const auto& p : points) {
    const LaxElement lt = ltilde(aks, p);
    std::vector<Mat> elems{random_combination(s.basis_a(), n, rng), random_combination(s.basis_a(), n, rng),
                           random_combination(s.basis_b(), n, rng), random_combination(s.basis_b(), n, rng)};
    for (std::size_t i = 0; i < elems.size(); ++i)
      for (std::size_t k = i + 1; k < elems.size(); ++k) {
        const double db = dirac_bracket(aks, observables::ltilde_component(aks, elems[i]),
                                        observables::ltilde_component(aks, elems[k]), cs, cls, p);
        lp_error = std::max(lp_error, std::abs(db - lie_poisson_bracket(aks, lt, elems[i], elems[k])));
      }
  }
  checks.add("Dirac brackets of L~ vs Lie-Poisson", lp_error, 1e-8);

  json classification = {{"constraints", cs.size()},
                         {"by_kind", kinds},
                         {"first_class", cls.n_first()},
                         {"second_class", cls.n_second()},
                         {"phase_dimension", cls.phase_dimension},
                         {"reduced_dimension", cls.reduced_dimension()},
                         {"little_algebra_dims", {la, lb}}};

  const SolverRun constrained = run_solver(aks, c, init, SolverKind::Constrained);
  const SolverRun reference = run_solver(aks, c, init, SolverKind::Factorization);
  json evolution = {{"samples", constrained.traj.size()}, {"failure", constrained.failure},
                    {"reference_failure", reference.failure}};
  if (constrained.constraint_drift) {
    evolution["constraint_drift"] = number(*constrained.constraint_drift);
    checks.add("constraint drift", *constrained.constraint_drift, c.invariant_tolerance);
  }
  if (constrained.complete && reference.complete) {
    const double err = max_cross_error(constrained.traj, reference.traj);
    evolution["cross_error_vs_factorization"] = number(err);
    checks.add("L~ vs factorization", err, c.cross_error_tolerance);
  }
  if (!constrained.complete && !is_blow_up(constrained)) checks.all_pass = false;

  result.samples = constrained.traj;
  result.report = {{"verb", "dirac-report"},
                   {"samples_from", "L~ along the constrained flow"},
                   {"classification", classification},
                   {"evolution", evolution},
                   {"checks", checks.list}};
  const bool blew_up = is_blow_up(constrained) || is_blow_up(reference);
  result.status = blew_up ? exit_code::blow_up : checks.all_pass ? exit_code::ok : exit_code::invariant_violation;
  return result;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_atomically(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw std::runtime_error("write to '" + tmp + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

} // namespace

RunResult run(Verb verb, const RunConfig& c) {
  const AKSData aks = build_system(c);
  switch (verb) {
    case Verb::Flow: return run_flow(aks, c);
    case Verb::LagrangianCheck: return run_lagrangian(aks, c);
    case Verb::DiracReport: return run_dirac(aks, c);
  }
  return {};
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.empty()) throw std::invalid_argument("write_csv: empty trajectory");
  const Eigen::Index n = traj.states.front().L.rows();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i)
    for (Eigen::Index k = 1; k <= n; ++k) os << ",L_" << i << k;
  os << ",H";
  for (Eigen::Index k = 2; k <= n; ++k) os << ",trL" << k;
  os << '\n';
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const Mat& L = traj.states[s].L;
    os << format_double(traj.times[s]);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) os << ',' << format_double(L(i, k));
    os << ',' << format_double(traj.diagnostics[s].H);
    for (const double p : traj.diagnostics[s].power_traces) os << ',' << format_double(p);
    os << '\n';
  }
}

Trajectory read_csv(std::istream& is, const Splitting& s) {
  const int n = s.n();
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("read_csv: missing header");
  const std::size_t columns = static_cast<std::size_t>(1 + n * n + n);
  if (split_commas(line).size() != columns) throw std::invalid_argument("read_csv: header does not match n");
  Trajectory traj;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != columns) throw std::invalid_argument("read_csv: wrong number of columns");
    Mat L(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) L(i, k) = std::strtod(cells[static_cast<std::size_t>(1 + i * n + k)].c_str(), nullptr);
    traj.push(s, std::strtod(cells[0].c_str(), nullptr), L);
  }
  return traj;
}

json samples_to_json(const Trajectory& traj) {
  json samples = json::array();
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const Diagnostics& d = traj.diagnostics[s];
    json inv = {{"H", number(d.H)}};
    for (std::size_t k = 0; k < d.power_traces.size(); ++k) inv["trL" + std::to_string(k + 2)] = number(d.power_traces[k]);
    for (std::size_t k = 0; k < d.charpoly.size(); ++k) inv["c" + std::to_string(k + 1)] = number(d.charpoly[k]);
    samples.push_back({{"t", traj.times[s]}, {"L", matrix_json(traj.states[s].L)}, {"invariants", inv}});
  }
  return samples;
}

Trajectory samples_from_json(const json& samples, const Splitting& s) {
  Trajectory traj;
  Issues issues;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const json& e = samples[i];
    const std::string path = "samples[" + std::to_string(i) + "]";
    const auto t = read_number(e.at("t"), path + ".t", issues);
    const auto L = read_matrix(e.at("L"), s.n(), path + ".L", issues);
    issues.raise_if_any();
    traj.push(s, *t, *L);
  }
  return traj;
}

void write_outputs(Verb verb, const RunConfig& c, const RunResult& r) {
  if (!c.out.empty()) {
    std::ostringstream os;
    if (c.format == OutputFormat::Csv) {
      if (!r.samples.empty()) write_csv(os, r.samples);
    } else {
      json doc = {{"config", config_to_json(c)}, {"samples", samples_to_json(r.samples)}, {"report", r.report}};
      doc["report"]["status"] = r.status;
      os << doc.dump(1) << '\n';
    }
    write_atomically(c.out, os.str());
  }
  if (!c.report_path.empty()) {
    json doc = {{"config", config_to_json(c)}, {"verb", to_string(verb)}, {"status", r.status}, {"report", r.report}};
    write_atomically(c.report_path, doc.dump(1) + "\n");
  }
}

int execute(Verb verb, const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    validate_for(verb, c);
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return exit_code::config_error;
  }
  const RunResult r = run(verb, c);
  write_outputs(verb, c, r);
  json summary = r.report;
  summary["status"] = r.status;
  out << summary.dump(2) << '\n';
  return r.status;
}

} // namespace aks
