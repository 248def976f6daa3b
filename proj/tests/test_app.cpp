#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "aks/app.hpp"
#include "aks/presets.hpp"

using namespace aks;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "aks_app_tests";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> issues_of(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool has_issue(const std::vector<std::string>& issues, const std::string& prefix) {
  for (const auto& i : issues)
    if (i.rfind(prefix, 0) == 0) return true;
  return false;
}

json toda2_both() {
  return {{"n", 2},
          {"initial", {{"type", "random-orbit"}, {"scale", 0.5}}},
          {"solver", {"lax-rk4", "factorization"}},
          {"t_end", 5.0},
          {"dt", 1e-3},
          {"sample_stride", 50},
          {"seed", 42}};
}

json blowup_sl2() {
  return {{"n", 2},
          {"moments", {{"mu", {{0, 0}, {1, 0}}}, {"nu", {{0, -1}, {0, 0}}}}},
          {"solver", "factorization"},
          {"t_end", 3.0},
          {"dt", 1e-2}};
}

const json* find_check(const json& report, const std::string& name) {
  for (const auto& c : report["checks"])
    if (c["name"] == name) return &c;
  return nullptr;
}

} // namespace

TEST_CASE("config defaults and normalized round trip") {
  const RunConfig c = parse_config(json::object());
  CHECK(c.n == 2);
  CHECK(c.splitting == SplittingKind::Triangular);
  CHECK(c.solvers == std::vector<SolverKind>{SolverKind::Factorization});
  CHECK(c.dt == 1e-3);

  json full = toda2_both();
  full["moments"] = {{"mu", {{0, 0}, {1, 0}}}, {"nu", {{0, 1}, {0, 0}}}};
  full["output"] = {{"path", "run.json"}};
  const RunConfig a = parse_config(full);
  CHECK(a.format == OutputFormat::Json);
  const json echoed = config_to_json(a);
  CHECK(config_to_json(parse_config(echoed)) == echoed);
  CHECK(echoed["solver"] == json({"lax-rk4", "factorization"}));
}

TEST_CASE("validation errors carry field paths") {
  json j = toda2_both();
  j["dt"] = -1e-3;
  j["t_end"] = 0.0;
  j["sample_stride"] = 0;
  j["bogus"] = 1;
  const auto issues = issues_of(j);
  CHECK(has_issue(issues, "dt: "));
  CHECK(has_issue(issues, "t_end: "));
  CHECK(has_issue(issues, "sample_stride: "));
  CHECK(has_issue(issues, "bogus: unknown field"));

  CHECK(has_issue(issues_of({{"n", 1}}), "n: "));
  CHECK(has_issue(issues_of({{"n", "two"}}), "n: expected an integer"));
  CHECK(has_issue(issues_of({{"splitting", "cholesky"}}), "splitting: "));
  CHECK(has_issue(issues_of({{"solver", "euler"}}), "solver: unknown solver"));
  CHECK(has_issue(issues_of({{"solver", "lax-rk4,lax-rk4"}}), "solver: "));
  CHECK(has_issue(issues_of({{"seed", -3}}), "seed: "));
  CHECK(has_issue(issues_of({{"output", {{"path", "x"}, {"format", "xml"}}}}), "output.format: "));
  CHECK(has_issue(issues_of({{"initial", {{"type", "matrix"}}}}), "initial.L0: required"));
  CHECK(has_issue(issues_of({{"initial", {{"type", "matrix"}, {"L0", {{1, 0}, {0, 1}}}}}}), "initial.L0: must be traceless"));
  CHECK(has_issue(issues_of({{"initial", {{"type", "orbit"}, {"g_a", {{1, 0}, {0}}}}}}), "initial.g_a[1]: "));
  CHECK(has_issue(issues_of({{"initial", {{"type", "orbit"}, {"g_a", {{1, 0}, {1, 1}}}}}}), "initial.g_a: "));
  CHECK(has_issue(issues_of({{"initial", {{"type", "random-orbit"}, {"g_a", {{1, 0}, {0, 1}}}}}}), "initial.g_a: only"));
  // moments in the wrong annihilator
  CHECK(has_issue(issues_of({{"moments", {{"mu", {{0, 1}, {0, 0}}}, {"nu", {{0, 1}, {0, 0}}}}}}), "moments.mu: "));
  CHECK(has_issue(issues_of({{"moments", {{"mu", {{0, 0}, {1, 0}}}}}}), "moments.nu: required"));
  CHECK(has_issue(issues_of({{"moments", {{"mu", {{0, 0}, {1, "x"}}}, {"nu", {{0, 1}, {0, 0}}}}}}),
                  "moments.mu[1][1]: expected a number"));
  CHECK(issues_of(json::array()).size() == 1);
}

TEST_CASE("load_config reports unreadable and malformed files") {
  const fs::path dir = scratch_dir();
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
  std::ofstream(dir / "broken.json") << "{\"n\": 2,";
  CHECK_THROWS_AS(load_config((dir / "broken.json").string()), ConfigError);
  std::ofstream(dir / "good.json") << toda2_both().dump();
  CHECK(load_config((dir / "good.json").string()).seed == 42);
}

TEST_CASE("overrides") {
  const RunConfig base = parse_config(toda2_both());
  Overrides o;
  o.n = 3;
  o.solver = "factorization,constrained";
  o.t_end = 2.0;
  o.seed = 9;
  o.out = "x.json";
  const RunConfig c = apply_overrides(base, o);
  CHECK(c.n == 3);
  CHECK(c.solvers == std::vector<SolverKind>{SolverKind::Factorization, SolverKind::Constrained});
  CHECK(c.t_end == 2.0);
  CHECK(c.seed == 9);
  CHECK(c.format == OutputFormat::Json);

  Overrides bad;
  bad.dt = 0.0;
  CHECK_THROWS_AS(apply_overrides(base, bad), ConfigError);
  Overrides resize;
  resize.n = 3;
  CHECK_THROWS_AS(apply_overrides(parse_config(blowup_sl2()), resize), ConfigError);
}

TEST_CASE("verb-specific validation") {
  json j = {{"initial", {{"type", "matrix"}, {"L0", {{0, 1}, {1, 0}}}}}};
  const RunConfig m = parse_config(j);
  CHECK_NOTHROW(validate_for(Verb::Flow, m));
  CHECK_THROWS_AS(validate_for(Verb::DiracReport, m), ConfigError);
  CHECK_THROWS_AS(validate_for(Verb::LagrangianCheck, m), ConfigError);
  RunConfig c = parse_config(json::object());
  c.t_end = 1.0;
  c.dt = 0.3;
  CHECK_THROWS_AS(validate_for(Verb::LagrangianCheck, c), ConfigError);
}

TEST_CASE("flow: both solvers on Toda sl(2) agree to 1e-6") {
  const RunConfig c = parse_config(toda2_both());
  const RunResult r = run(Verb::Flow, c);
  CHECK(r.status == exit_code::ok);
  const json* cross = find_check(r.report, "cross error lax-rk4 vs factorization");
  REQUIRE(cross != nullptr);
  CHECK((*cross)["value"].get<double>() <= 1e-6);

  // independent recomputation from the library solvers
  const AKSData toda = preset_toda(2);
  std::mt19937_64 rng = [&] {
    std::seed_seq seq{42u, 0u, 0u};
    return std::mt19937_64(seq);
  }();
  const OrbitSeed seed = random_orbit_seed(toda, rng, 0.5);
  const Mat L0 = orbit_point(toda, seed.h_a, seed.h_b).L;
  LaxIntegrationOptions lo;
  lo.sample_stride = 50;
  const Trajectory rk = integrate_lax(toda, L0, 5.0, 1e-3, lo);
  const Trajectory fa = factorization_solve(toda, L0, time_grid(5.0, 1e-3, 50));
  CHECK((*cross)["value"].get<double>() == max_cross_error(rk, fa));
  CHECK(r.samples.size() == rk.size());
  CHECK(max_abs(Mat(r.samples.states.back().L - rk.states.back().L)) == 0.0);
}

TEST_CASE("flow: an engineered blow-up is reported with its time and exit code 3") {
  const RunResult r = run(Verb::Flow, parse_config(blowup_sl2()));
  CHECK(r.status == exit_code::blow_up);
  const json& failure = r.report["solvers"][0]["failure"];
  CHECK(failure["kind"] == "blow-up");
  // L(0,0) = tan t on this orbit
  CHECK(failure["time"].get<double>() == doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
  CHECK(r.samples.times.back() < std::numbers::pi / 2);

  json rk = blowup_sl2();
  rk["solver"] = "lax-rk4";
  CHECK(run(Verb::Flow, parse_config(rk)).status == exit_code::blow_up);
}

TEST_CASE("flow: a coarse step violates a tight invariant tolerance") {
  json j = {{"n", 3}, {"initial", {{"type", "random-orbit"}}}, {"solver", "lax-rk4"}, {"t_end", 10.0},
            {"dt", 0.25}, {"tolerances", {{"invariant", 1e-10}}}};
  const RunResult r = run(Verb::Flow, parse_config(j));
  CHECK(r.status == exit_code::invariant_violation);
  CHECK((*find_check(r.report, "lax-rk4 invariant drift"))["pass"] == false);
}

TEST_CASE("flow: the constrained solver reproduces the factorization solution") {
  json j = toda2_both();
  j["solver"] = {"factorization", "constrained"};
  j["t_end"] = 1.0;
  const RunResult r = run(Verb::Flow, parse_config(j));
  CHECK(r.status == exit_code::ok);
  CHECK((*find_check(r.report, "cross error factorization vs constrained"))["value"].get<double>() <= 1e-6);
}

TEST_CASE("lagrangian-check and dirac-report pass on the presets") {
  json j = {{"n", 3}, {"initial", {{"type", "random-orbit"}}}, {"t_end", 1.0}, {"dt", 2e-3}, {"gauge_curves", 2},
            {"seed", 3}};
  for (const char* splitting : {"triangular", "iwasawa"}) {
    j["splitting"] = splitting;
    const RunResult lag = run(Verb::LagrangianCheck, parse_config(j));
    CHECK(lag.status == exit_code::ok);
    CHECK(lag.samples.size() == 501);
  }
  json d = {{"n", 2}, {"initial", {{"type", "random-orbit"}}}, {"t_end", 1.0}, {"dt", 1e-3}, {"sample_stride", 100}};
  const RunResult dr = run(Verb::DiracReport, parse_config(d));
  CHECK(dr.status == exit_code::ok);
  CHECK(dr.report["classification"]["first_class"] == 2);
  CHECK(dr.report["classification"]["second_class"] == 6);
  CHECK(dr.report["classification"]["reduced_dimension"] == 2);
  CHECK(dr.samples.size() == 11);
}

TEST_CASE("CSV and JSON samples round-trip at full precision") {
  const RunResult r = run(Verb::Flow, parse_config(toda2_both()));
  const Splitting s = triangular_splitting(2);
  std::stringstream csv;
  write_csv(csv, r.samples);
  std::string header;
  std::getline(std::stringstream(csv.str()), header);
  CHECK(header == "t,L_11,L_12,L_21,L_22,H,trL2");
  const Trajectory back = read_csv(csv, s);
  const json parsed = json::parse(samples_to_json(r.samples).dump());
  const Trajectory back_json = samples_from_json(parsed, s);
  REQUIRE(back.size() == r.samples.size());
  REQUIRE(back_json.size() == r.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.times[i] == r.samples.times[i]);
    CHECK(back_json.times[i] == r.samples.times[i]);
    CHECK((back.states[i].L.array() == r.samples.states[i].L.array()).all());
    CHECK((back_json.states[i].L.array() == r.samples.states[i].L.array()).all());
  }
  CHECK(parsed[0]["invariants"].contains("c2"));

  std::stringstream three;
  write_csv(three, run(Verb::Flow, parse_config({{"n", 3}, {"t_end", 0.1}, {"dt", 0.05}})).samples);
  std::getline(three, header);
  CHECK(header == "t,L_11,L_12,L_13,L_21,L_22,L_23,L_31,L_32,L_33,H,trL2,trL3");
}

TEST_CASE("execute: deterministic outputs, and nothing written on a config error") {
  const fs::path dir = scratch_dir();
  for (const char* ext : {".csv", ".json"}) {
    json j = toda2_both();
    const fs::path path = dir / (std::string("first") + ext);
    j["output"] = {{"path", path.string()}};
    std::ostringstream out, err;
    CHECK(execute(Verb::Flow, parse_config(j), out, err) == exit_code::ok);
    const std::string a = slurp(path);
    CHECK(execute(Verb::Flow, parse_config(j), out, err) == exit_code::ok);
    CHECK(!a.empty());
    CHECK(a == slurp(path));
  }
  const json doc = json::parse(slurp(dir / "first.json"));
  CHECK(doc.contains("config"));
  CHECK(doc["samples"].size() == 101);
  CHECK(doc["report"]["status"] == 0);

  RunConfig bad = parse_config(toda2_both());
  bad.dt = 0.0;
  bad.out = (dir / "never.csv").string();
  fs::remove(bad.out);
  std::ostringstream out, err;
  CHECK(execute(Verb::Flow, bad, out, err) == exit_code::config_error);
  CHECK(err.str().find("dt: must be positive") != std::string::npos);
  CHECK(!fs::exists(bad.out));
}

TEST_CASE("execute writes partial output on a blow-up") {
  const fs::path dir = scratch_dir();
  json j = blowup_sl2();
  j["output"] = {{"path", (dir / "blowup.json").string()}};
  std::ostringstream out, err;
  CHECK(execute(Verb::Flow, parse_config(j), out, err) == exit_code::blow_up);
  const json doc = json::parse(slurp(dir / "blowup.json"));
  CHECK(doc["report"]["solvers"][0]["failure"]["time"].get<double>() ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-8));
  CHECK(!doc["samples"].empty());
}
