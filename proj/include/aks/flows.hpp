#ifndef AKS_FLOWS_HPP
#define AKS_FLOWS_HPP

#include <optional>
#include <string>
#include <vector>

#include "aks/orbits.hpp"

namespace aks {

/// Conserved quantities of a Lax element: H, tr L^k (k = 2..n) and the
/// coefficients c_1..c_n of det(lambda I - L) = lambda^n + c_1 lambda^{n-1} + ... + c_n.
struct Diagnostics {
  double H = 0.0;
  std::vector<double> power_traces;
  std::vector<double> charpoly;
};

Diagnostics diagnose(const Mat& L);

struct Trajectory {
  std::vector<double> times;
  std::vector<LaxElement> states;
  std::vector<Diagnostics> diagnostics;
  /// Group factors g_A(t), g_B(t) when the trajectory came from factorization.
  std::vector<Factors<double>> factors;
  /// Samples compared against the orbit formula (factorization with a seed).
  std::size_t orbit_checks = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  void push(const Splitting& s, double t, const Mat& L);
};

/// Non-finite state during integration; carries the samples computed so far.
class IntegrationAborted : public Error {
public:
  IntegrationAborted(const std::string& what, double last_good_time, Trajectory partial)
      : Error(what), last_good_time_(last_good_time), partial_(std::move(partial)) {}
  double last_good_time() const noexcept { return last_good_time_; }
  const Trajectory& partial() const noexcept { return partial_; }

private:
  double last_good_time_;
  Trajectory partial_;
};

/// exp(t L0) left the factorizable set: the AKS vector field is incomplete and
/// the solution blows up at time().
class FactorizationBlowup : public Error {
public:
  FactorizationBlowup(const std::string& what, double time, double last_good_time, Trajectory partial)
      : Error(what), time_(time), last_good_time_(last_good_time), partial_(std::move(partial)) {}
  double time() const noexcept { return time_; }
  double last_good_time() const noexcept { return last_good_time_; }
  const Trajectory& partial() const noexcept { return partial_; }

private:
  double time_;
  double last_good_time_;
  Trajectory partial_;
};

/// [pi_B(L), L] (= -[pi_A(L), L]).
Mat aks_vector_field(const AKSData& aks, const Mat& L);

struct LaxIntegrationOptions {
  int sample_stride = 1;
  /// Reset the B^perp part of L to its initial value after every step.
  bool reproject = false;
};

/// Classical fixed-step RK4 on L' = [pi_B(L), L]. Throws IntegrationAborted.
Trajectory integrate_lax(const AKSData& aks, const Mat& L0, double t_end, double dt,
                         const LaxIntegrationOptions& options = {});

struct FactorizationOptions {
  /// Orbit parameters of L0, enabling the cross-check against orbit_point.
  /// The comparison is skipped once the accumulated factors are too badly
  /// conditioned to resolve orbit_check_tol; Trajectory::orbit_checks counts the rest.
  std::optional<OrbitSeed> seed;
  double orbit_check_tol = 1e-9;
  double pivot_tol = 1e-10;
  /// When positive, refactor from the latest state at most this far ahead
  /// (L(t + s) solves the same problem from L(t)); 0 factors exp(t L0) directly,
  /// which loses accuracy once exp(t L0) is badly conditioned.
  double restart_interval = 1.0;
  /// Bisection steps used to locate the blow-up time.
  int locate_iterations = 60;
};

/// L(t) = g_A(t)^-1 L0 g_A(t) where exp(t L0) = g_A(t) g_B(t). Throws FactorizationBlowup.
Trajectory factorization_solve(const AKSData& aks, const Mat& L0, const std::vector<double>& times,
                               const FactorizationOptions& options = {});

/// Uniform grid 0, dt, 2dt, ... up to t_end (inclusive, last step may be short).
std::vector<double> time_grid(double t_end, double dt, int stride = 1);

struct DriftEntry {
  std::string name;
  double drift;
};

struct DriftReport {
  std::vector<DriftEntry> entries;
  double max_drift() const;
  double drift(const std::string& name) const;
};

DriftReport invariant_report(const Trajectory& traj);

/// max over shared samples of ||L_1(t) - L_2(t)||_max; both trajectories must share times.
double max_cross_error(const Trajectory& a, const Trajectory& b);

/// max_t ||L_{A*}(t) - mu|| : zero exactly when the A-orbit of mu is a point (Toda).
double moment_drift(const AKSData& aks, const Trajectory& traj);

} // namespace aks

#endif // AKS_FLOWS_HPP
