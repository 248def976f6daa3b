#include <iostream>

#include "CLI11.hpp"

#include "aks/app.hpp"

namespace {

struct VerbOptions {
  std::string config;
  aks::Overrides overrides;
};

CLI::App* add_verb(CLI::App& app, const char* name, const char* help, VerbOptions& o) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  sub->add_option("--n", o.overrides.n, "matrix size");
  sub->add_option("--solver", o.overrides.solver, "comma-separated solvers: lax-rk4, factorization, constrained");
  sub->add_option("--t-end", o.overrides.t_end, "final time");
  sub->add_option("--dt", o.overrides.dt, "time step");
  sub->add_option("--seed", o.overrides.seed, "random seed");
  sub->add_option("--out", o.overrides.out, "output path (.csv or .json)");
  return sub;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adler-Kostant-Symes systems: flows, gauge checks and constraint analysis"};
  app.require_subcommand(1);
  VerbOptions options;
  const std::pair<aks::Verb, CLI::App*> verbs[] = {
      {aks::Verb::Flow, add_verb(app, "flow", "integrate the Lax flow with the configured solvers", options)},
      {aks::Verb::LagrangianCheck,
       add_verb(app, "lagrangian-check", "Euler-Lagrange, gauge and action checks on exact solutions", options)},
      {aks::Verb::DiracReport,
       add_verb(app, "dirac-report", "constraint classification and the constrained flow", options)},
  };
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : aks::exit_code::config_error;
  }

  aks::Verb verb = aks::Verb::Flow;
  for (const auto& [v, sub] : verbs)
    if (sub->parsed()) verb = v;

  aks::RunConfig config;
  try {
    config = aks::apply_overrides(aks::load_config(options.config), options.overrides);
  } catch (const aks::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return aks::exit_code::config_error;
  }
  try {
    return aks::execute(verb, config, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
