#ifndef AKS_APP_HPP
#define AKS_APP_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aks/errors.hpp"
#include "aks/flows.hpp"

namespace aks {

enum class Verb { Flow, LagrangianCheck, DiracReport };
enum class SplittingKind { Triangular, Iwasawa };
enum class SolverKind { LaxRK4, Factorization, Constrained };
enum class InitialKind { Orbit, RandomOrbit, Matrix };
enum class OutputFormat { Csv, Json };

const char* to_string(Verb v);
const char* to_string(SplittingKind s);
const char* to_string(SolverKind s);
const char* to_string(InitialKind k);
const char* to_string(OutputFormat f);

/// Exit statuses of a run.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config_error = 2;
inline constexpr int blow_up = 3;
inline constexpr int invariant_violation = 4;
} // namespace exit_code

struct RunConfig {
  int n = 2;
  SplittingKind splitting = SplittingKind::Triangular;
  /// Explicit moments; both empty means the preset moments of the splitting.
  std::optional<Mat> mu, nu;

  InitialKind initial = InitialKind::Orbit;
  Mat g_a, g_b;                 // Orbit (empty = identity)
  double initial_scale = 1.0;   // RandomOrbit: coordinates uniform in [-scale, scale]
  Mat L0;                       // Matrix

  std::vector<SolverKind> solvers{SolverKind::Factorization};
  double t_end = 1.0;
  double dt = 1e-3;
  int sample_stride = 1;
  std::uint64_t seed = 0;
  double restart_interval = 1.0;

  std::string out;              // empty: nothing written
  OutputFormat format = OutputFormat::Csv;
  std::string report_path;      // optional separate report file

  double invariant_tolerance = 1e-6;
  double cross_error_tolerance = 1e-6;
  int gauge_curves = 5;
  int classification_points = 5;
};

/// All validation issues of a configuration, each prefixed with its field path.
class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
  std::vector<std::string> issues_;
};

RunConfig parse_config(const nlohmann::ordered_json& j);
RunConfig load_config(const std::string& path);
/// Normalized form; parse_config(config_to_json(c)) reproduces c.
nlohmann::ordered_json config_to_json(const RunConfig& c);

struct Overrides {
  std::optional<int> n;
  std::optional<std::string> solver;   // comma-separated list
  std::optional<double> t_end, dt;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

/// Applies the overrides and revalidates.
RunConfig apply_overrides(const RunConfig& c, const Overrides& o);

/// Throws ConfigError when the moments or initial data do not fit the splitting,
/// or when the verb needs data the configuration lacks.
AKSData build_system(const RunConfig& c);
void validate_for(Verb verb, const RunConfig& c);

struct RunResult {
  int status = exit_code::ok;
  Trajectory samples;
  nlohmann::ordered_json report;
};

/// Runs the verb without touching the file system.
RunResult run(Verb verb, const RunConfig& c);

/// Writes the configured outputs through a temporary file and a rename.
void write_outputs(Verb verb, const RunConfig& c, const RunResult& r);

/// validate_for + run + write_outputs; the report goes to out, errors to err.
int execute(Verb verb, const RunConfig& c, std::ostream& out, std::ostream& err);

/// Header t, L_11..L_nn, H, trL2..trLn; 17 significant digits.
void write_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_csv(std::istream& is, const Splitting& s);

nlohmann::ordered_json samples_to_json(const Trajectory& traj);
Trajectory samples_from_json(const nlohmann::ordered_json& samples, const Splitting& s);

} // namespace aks

#endif // AKS_APP_HPP
