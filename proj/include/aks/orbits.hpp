#ifndef AKS_ORBITS_HPP
#define AKS_ORBITS_HPP

#include <random>
#include <vector>

#include "aks/lie_core.hpp"

namespace aks {

/// An element L of the algebra together with its parts L_{A*} in B^perp and
/// L_{B*} in A^perp.
struct LaxElement {
  Mat L;
  Mat part_a_star;
  Mat part_b_star;
};

/// Splits L along G = B^perp + A^perp.
LaxElement make_lax(const Splitting& s, const Mat& L);

/// Basis of the little algebra A_mu = { xi in A : pi_{B^perp}[xi, mu] = 0 }.
std::vector<Mat> little_algebra_a(const Splitting& s, const Mat& mu, double tol = 1e-10);
/// Basis of B_nu = { eta in B : pi_{A^perp}[eta, nu] = 0 }.
std::vector<Mat> little_algebra_b(const Splitting& s, const Mat& nu, double tol = 1e-10);

/// Splitting plus the moments mu in B^perp (~ A*) and nu in A^perp (~ B*).
class AKSData {
public:
  /// Throws MembershipError if mu or nu lie in the wrong complement.
  AKSData(Splitting splitting, Mat mu, Mat nu);

  const Splitting& splitting() const { return splitting_; }
  const MatrixAlgebra& algebra() const { return splitting_.algebra(); }
  int n() const { return splitting_.n(); }
  const Mat& mu() const { return mu_; }
  const Mat& nu() const { return nu_; }
  const std::vector<Mat>& little_a() const { return little_a_; }
  const std::vector<Mat>& little_b() const { return little_b_; }

  /// Residuals ||pi_{B^perp}(a mu a^-1) - mu|| and ||pi_{A^perp}(b nu b^-1) - nu||.
  double little_group_a_residual(const Mat& a) const;
  double little_group_b_residual(const Mat& b) const;

  /// Span membership in the little algebras.
  bool in_little_a(const Mat& x, double tol = 1e-9) const;
  bool in_little_b(const Mat& y, double tol = 1e-9) const;

private:
  Splitting splitting_;
  Mat mu_;
  Mat nu_;
  std::vector<Mat> little_a_;
  std::vector<Mat> little_b_;
};

/// L = pi_{B^perp}(g_A^-1 mu g_A) + pi_{A^perp}(g_B nu g_B^-1).
/// Throws MembershipError when g_A, g_B do not have the shape of the groups of A, B.
LaxElement orbit_point(const AKSData& aks, const Mat& g_a, const Mat& g_b);

/// The AKS Lie-Poisson bracket {<L_{A*}, xi>, <L_{A*}, xi'>} etc. of linear
/// functions on the phase space. Each argument must lie in A or in B.
double lie_poisson_bracket(const AKSData& aks, const LaxElement& L, const Mat& xi, const Mat& xi2);

/// H(L) = 1/2 <L, L>.
double hamiltonian(const LaxElement& L);
double hamiltonian(const Mat& L);

/// exp of a random combination of the given basis, coordinates uniform in [-scale, scale].
Mat random_exp(const std::vector<Mat>& basis, int n, std::mt19937_64& rng, double scale = 1.0);
Mat random_combination(const std::vector<Mat>& basis, int n, std::mt19937_64& rng, double scale = 1.0);

/// Group elements (h_A, h_B) parametrizing a point of the phase space.
struct OrbitSeed {
  Mat h_a;
  Mat h_b;
};

OrbitSeed random_orbit_seed(const AKSData& aks, std::mt19937_64& rng, double scale = 1.0);

} // namespace aks

#endif // AKS_ORBITS_HPP
