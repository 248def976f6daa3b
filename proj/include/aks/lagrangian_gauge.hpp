#ifndef AKS_LAGRANGIAN_GAUGE_HPP
#define AKS_LAGRANGIAN_GAUGE_HPP

#include <functional>
#include <optional>
#include <vector>

#include "aks/orbits.hpp"

namespace aks {

/// Arguments of the gauge Lagrangian: g in G, its velocity, alpha in A, beta in B.
struct ConfigPoint {
  Mat g;
  Mat gdot;
  Mat alpha;
  Mat beta;
};

/// Throws MembershipError / SingularMatrix when a ConfigPoint is malformed.
void validate(const AKSData& aks, const ConfigPoint& p);

/// Time samples of a configuration-space curve.
struct ConfigCurve {
  std::vector<double> times;
  std::vector<ConfigPoint> points;

  std::size_t size() const { return times.size(); }
};

/// Sampled gauge curves a(t) in the A-side group and b(t) in the B-side group.
struct GaugeCurve {
  std::vector<double> times;
  std::vector<Mat> a, adot;
  std::vector<Mat> b, bdot;
};

/// a(t) = exp(xi(t)), b(t) = exp(eta(t)); derivatives by a fourth-order central
/// difference of step h. Membership of xi, eta is the caller's business;
/// gauge_transform checks the resulting group elements.
GaugeCurve make_gauge_curve(int n, const std::vector<double>& times, const std::function<Mat(double)>& xi,
                            const std::function<Mat(double)>& eta, double h = 1e-3);

/// Smooth random paths in the little algebras: each coordinate is
/// c0 + c1 t + c2 sin(2 pi t / T) with coefficients uniform in [-scale, scale].
GaugeCurve random_gauge_curve(const AKSData& aks, const std::vector<double>& times, std::mt19937_64& rng,
                              double scale = 0.5);

double lagrangian(const AKSData& aks, const ConfigPoint& p);

struct Currents {
  Mat right;   // C^r = gdot g^-1 + g beta g^-1 + alpha
  Mat left;    // C^l = g^-1 C^r g
};

Currents currents(const AKSData& aks, const ConfigPoint& p);

/// Per-sample max-norm residuals of the Euler-Lagrange system:
/// pi_{B^perp}(C^r) = mu, pi_{A^perp}(C^l) = nu, dC^r/dt = [C^r, alpha], dC^l/dt = [beta, C^l].
struct ELResiduals {
  std::vector<double> constraint_right, constraint_left;
  std::vector<double> evolution_right, evolution_left;

  double max_constraint() const;
  double max_evolution() const;
};

/// Time derivatives use second-order differences on the (uniform) sample grid.
ELResiduals el_residuals(const AKSData& aks, const ConfigCurve& curve);

enum class GaugeCheck { Enforce, Skip };

/// g -> a g b^-1, alpha -> a alpha a^-1 - adot a^-1, beta -> b beta b^-1 + bdot b^-1.
/// With GaugeCheck::Enforce, a and b must lie in the little groups (residual 1e-8)
/// and factorizable g must have its factors move to (a g_A, g_B b^-1).
ConfigPoint gauge_transform(const AKSData& aks, const ConfigPoint& p, const Mat& a, const Mat& adot, const Mat& b,
                            const Mat& bdot, GaugeCheck check = GaugeCheck::Enforce);
ConfigCurve gauge_transform(const AKSData& aks, const ConfigCurve& curve, const GaugeCurve& gauge,
                            GaugeCheck check = GaugeCheck::Enforce);

/// Q = g_A^-1 C^r g_A together with the checks performed on it.
struct QAssembly {
  LaxElement Q;
  Factors<double> factors;
  double expression_gap = 0.0;             // |g_A^-1 C^r g_A - g_B C^l g_B^-1|
  std::optional<double> orbit_gap;          // |Q - orbit formula| when the constraints hold
};

/// Throws NotInCheckedDomain outside the factorizable set, InvariantViolation when
/// the two expressions of Q disagree beyond 1e-10 (relative) or, on the constraint
/// surface (residual <= constraint_tol), Q differs from the orbit formula.
QAssembly q_assemble_checked(const AKSData& aks, const ConfigPoint& p, double constraint_tol = 1e-9);
LaxElement q_assemble(const AKSData& aks, const ConfigPoint& p, double constraint_tol = 1e-9);

/// max over interior samples of |pi_A(Q) - g_A^-1 d(g_A)/dt - g_A^-1 alpha g_A|,
/// with d(g_A)/dt by central differences of the sampled factors.
double q_split_residual(const AKSData& aks, const ConfigCurve& curve);

/// max over samples of |dQ/dt + [pi_A(Q), Q]| with second-order differences.
double q_lax_residual(const AKSData& aks, const ConfigCurve& curve);

/// Composite Simpson rule for the action; needs an odd number (>= 3) of uniform samples.
double action(const AKSData& aks, const ConfigCurve& curve);

/// g(t) = h_A exp(t L) h_B with L = orbit_point(h_A, h_B), alpha = beta = 0.
ConfigCurve exact_solution_curve(const AKSData& aks, const OrbitSeed& seed, const std::vector<double>& times);

} // namespace aks

#endif // AKS_LAGRANGIAN_GAUGE_HPP
