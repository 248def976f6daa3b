#ifndef AKS_DIRAC_ENGINE_HPP
#define AKS_DIRAC_ENGINE_HPP

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "aks/orbits.hpp"

namespace aks {

/// A point of T*G x T*A x T*B in right-trivialized form.
/// pi_alpha lies in B^perp (~ A*), pi_beta in A^perp (~ B*).
struct PhasePoint {
  Mat g;
  Mat Jr;
  Mat alpha;
  Mat pi_alpha;
  Mat beta;
  Mat pi_beta;

  Mat j_l() const;
};

/// Throws MembershipError / SingularMatrix when p is malformed.
void validate(const AKSData& aks, const PhasePoint& p);

/// Total dimension 2 dim G + 2 dim A + 2 dim B.
int phase_dimension(const AKSData& aks);

/// Differential of a function at a PhasePoint.
///   right:    d/ds F(e^{sT} g) = <right, T>, right in G
///   dJ:       d/ds F(J + sT)   = <dJ, T>,    dJ in G
///   d_alpha[m] = dF/d alpha^m, alpha = sum alpha^m X_m; d_pi_alpha[m] = dF/dp_m, p_m = <pi_alpha, X_m>
///   and likewise for beta over the basis Y_r of B.
struct PhaseGradient {
  Mat right;
  Mat dJ;
  Vec d_alpha, d_pi_alpha;
  Vec d_beta, d_pi_beta;

  static PhaseGradient zero(const AKSData& aks);
};

struct Observable {
  std::string label;
  std::function<double(const PhasePoint&)> eval;
  /// Optional exact differential; finite differences are used when empty.
  std::function<PhaseGradient(const PhasePoint&)> exact;

  double operator()(const PhasePoint& p) const { return eval(p); }
};

namespace observables {
Observable jr_component(const AKSData& aks, const Mat& T);       // <J^r, T>
Observable jl_component(const AKSData& aks, const Mat& T);       // <J^l, T>
Observable g_entry(const AKSData& aks, int i, int j);            // g_ij
Observable alpha_coord(const AKSData& aks, int m);               // <alpha, X^m>
Observable pi_alpha_coord(const AKSData& aks, int m);            // <pi_alpha, X_m>
Observable beta_coord(const AKSData& aks, int r);                // <beta, Y^r>
Observable pi_beta_coord(const AKSData& aks, int r);             // <pi_beta, Y_r>
/// <L~, T> with L~ = g_A^-1 J^r g_A; exact differential from the first-order
/// variation of the factorization.
Observable ltilde_component(const AKSData& aks, const Mat& T);
/// 1/2 <L~, L~>, with finite-difference differential only.
Observable ltilde_energy(const AKSData& aks);
Observable product(const Observable& f, const Observable& g);
Observable sum(const Observable& f, const Observable& g, double scale_g = 1.0);
/// Function without exact data: always differentiated numerically.
Observable numeric(std::string label, std::function<double(const PhasePoint&)> f);
} // namespace observables

enum class GradientMode { Auto, FiniteDifference };

/// Central differences with step 1e-6 scaled by the norm of the perturbed argument.
PhaseGradient finite_difference_gradient(const AKSData& aks, const Observable& f, const PhasePoint& p);
PhaseGradient gradient(const AKSData& aks, const Observable& f, const PhasePoint& p,
                       GradientMode mode = GradientMode::Auto);

double poisson_bracket(const AKSData& aks, const PhaseGradient& df, const PhaseGradient& dg, const PhasePoint& p);
double poisson_bracket(const AKSData& aks, const Observable& f, const Observable& g, const PhasePoint& p,
                       GradientMode mode = GradientMode::Auto);

/// Phase-space velocity of the Hamiltonian vector field of a function with differential dh.
struct PhaseVelocity {
  Mat g, Jr, alpha, pi_alpha, beta, pi_beta;
};
PhaseVelocity hamiltonian_vector_field(const AKSData& aks, const PhaseGradient& dh, const PhasePoint& p);

/// H_P = 1/2 <J, J> + <alpha, mu - J_{A*}> + <beta, nu - J^l_{B*}> + <v_alpha, pi_alpha> + <v_beta, pi_beta>.
double primary_hamiltonian(const AKSData& aks, const PhasePoint& p, const Mat& v_alpha, const Mat& v_beta);
PhaseGradient primary_hamiltonian_gradient(const AKSData& aks, const PhasePoint& p, const Mat& v_alpha,
                                           const Mat& v_beta);
Observable primary_hamiltonian_observable(const AKSData& aks, const Mat& v_alpha, const Mat& v_beta);

enum class ConstraintKind { PrimaryPiAlpha, PrimaryPiBeta, SecondaryJr, SecondaryJl, SecondaryAlpha, SecondaryBeta };
const char* to_string(ConstraintKind kind);

struct Constraint {
  ConstraintKind kind;
  Observable phi;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;

  std::size_t size() const { return constraints.size(); }
  std::size_t count(ConstraintKind kind) const;
  /// Values of all constraints at p.
  Vec values(const PhasePoint& p) const;
  double max_violation(const PhasePoint& p) const;
};

ConstraintSet build_constraints(const AKSData& aks);

/// First-class directions are the common null space of C_ab = {phi_a, phi_b}
/// over the sample points; the second-class directions are its orthogonal complement.
struct Classification {
  Mat first_class;               // columns: orthonormal combinations of constraints
  Mat second_class;
  std::vector<bool> constraint_is_first_class;
  int phase_dimension = 0;

  int n_first() const { return static_cast<int>(first_class.cols()); }
  int n_second() const { return static_cast<int>(second_class.cols()); }
  int reduced_dimension() const { return phase_dimension - 2 * n_first() - n_second(); }
};

/// C_ab = {phi_a, phi_b} at p.
Mat constraint_matrix(const AKSData& aks, const ConstraintSet& cs, const PhasePoint& p);

/// Throws std::invalid_argument when a point violates the constraints by more than 1e-10.
Classification classify_constraints(const AKSData& aks, const ConstraintSet& cs,
                                    const std::vector<PhasePoint>& points, double threshold = 1e-8);

/// {F,G}* = {F,G} - sum {F, psi_i} (C_ss^-1)_ij {psi_j, G} over the second-class
/// combinations psi. Throws IllConditioned when the second-class block has the wrong rank.
double dirac_bracket(const AKSData& aks, const Observable& f, const Observable& g, const ConstraintSet& cs,
                     const Classification& cls, const PhasePoint& p, GradientMode mode = GradientMode::Auto);

/// L~ = g_A^-1 J^r g_A = g_B J^l g_B^-1 (both checked to 1e-10 relative).
/// On the constraint surface it is also checked against the orbit formula.
LaxElement ltilde(const AKSData& aks, const PhasePoint& p);

/// (alpha, beta) -> (alpha + X, beta + Y), (g, J^r) -> (a g b^-1, a J^r a^-1).
/// Checks memberships, preservation of the constraint surface and the factor rule.
PhasePoint gauge_actions(const AKSData& aks, const PhasePoint& p, const Mat& X, const Mat& Y, const Mat& a,
                         const Mat& b);

/// g = g_A g_B, J^r = g_A L g_A^-1 with L = orbit_point(g_A, g_B), pi = 0.
PhasePoint constrained_point(const AKSData& aks, const Mat& g_a, const Mat& g_b, const Mat& alpha, const Mat& beta);
PhasePoint random_constrained_point(const AKSData& aks, std::mt19937_64& rng, double scale = 0.5);
/// Point with every field drawn at random (off the constraint surface).
PhasePoint random_phase_point(const AKSData& aks, std::mt19937_64& rng, double scale = 0.5);

struct ConstrainedTrajectory {
  std::vector<double> times;
  std::vector<PhasePoint> points;
  std::vector<LaxElement> ltilde;
  std::vector<double> drift;   // max constraint violation per sample

  double max_drift() const;
};

struct ConstrainedOptions {
  int sample_stride = 1;
  double drift_limit = 1e-4;
};

/// RK4 on Hamilton's equations of H_P. Throws ConstraintDrift when the
/// constraints drift beyond drift_limit.
ConstrainedTrajectory constrained_integrate(const AKSData& aks, const PhasePoint& p0, const Mat& v_alpha,
                                            const Mat& v_beta, double t_end, double dt,
                                            const ConstrainedOptions& options = {});

} // namespace aks

#endif // AKS_DIRAC_ENGINE_HPP
