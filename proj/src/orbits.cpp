#include "aks/orbits.hpp"

#include <algorithm>

namespace aks {

LaxElement make_lax(const Splitting& s, const Mat& L) {
  return {L, s.project(L, Part::BPerp), s.project(L, Part::APerp)};
}

namespace {

// Nullspace of the linear map c -> coords(f(sum c_k basis_k)) into the dual
// coordinates, returned as matrices.
template <typename Map>
std::vector<Mat> kernel_in(const std::vector<Mat>& basis, int n, int image_dim, Map&& image_coords,
                           double tol) {
  const int k = static_cast<int>(basis.size());
  if (k == 0) return {};
  Mat m(image_dim, k);
  for (int c = 0; c < k; ++c) m.col(c) = image_coords(basis[c]);
  const Mat null = nullspace(m, tol);
  std::vector<Mat> out;
  for (Eigen::Index j = 0; j < null.cols(); ++j) {
    Mat x = Mat::Zero(n, n);
    for (int c = 0; c < k; ++c) x += null(c, j) * basis[c];
    out.push_back(std::move(x));
  }
  return out;
}

} // namespace

std::vector<Mat> little_algebra_a(const Splitting& s, const Mat& mu, double tol) {
  // pi_{B^perp} Z is determined by the pairings <Z, X_m>.
  return kernel_in(s.basis_a(), s.n(), s.dim_a(),
                   [&](const Mat& xi) {
                     const Mat z = bracket(xi, mu);
                     Vec c(s.dim_a());
                     for (int m = 0; m < s.dim_a(); ++m) c(m) = trace_form(z, s.basis_a()[m]);
                     return c;
                   },
                   tol);
}

std::vector<Mat> little_algebra_b(const Splitting& s, const Mat& nu, double tol) {
  return kernel_in(s.basis_b(), s.n(), s.dim_b(),
                   [&](const Mat& eta) {
                     const Mat z = bracket(eta, nu);
                     Vec c(s.dim_b());
                     for (int r = 0; r < s.dim_b(); ++r) c(r) = trace_form(z, s.basis_b()[r]);
                     return c;
                   },
                   tol);
}

AKSData::AKSData(Splitting splitting, Mat mu, Mat nu)
    : splitting_(std::move(splitting)), mu_(std::move(mu)), nu_(std::move(nu)) {
  if (!splitting_.in_b_perp(mu_, 1e-10)) throw MembershipError("AKSData: mu is not in B^perp");
  if (!splitting_.in_a_perp(nu_, 1e-10)) throw MembershipError("AKSData: nu is not in A^perp");
  little_a_ = little_algebra_a(splitting_, mu_);
  little_b_ = little_algebra_b(splitting_, nu_);
}

double AKSData::little_group_a_residual(const Mat& a) const {
  const Mat moved = splitting_.project(Mat(a * mu_ * mat_inv(a)), Part::BPerp);
  return max_abs(Mat(moved - mu_));
}

double AKSData::little_group_b_residual(const Mat& b) const {
  const Mat moved = splitting_.project(Mat(b * nu_ * mat_inv(b)), Part::APerp);
  return max_abs(Mat(moved - nu_));
}

namespace {
bool in_span_of(const std::vector<Mat>& basis, const Mat& x, double tol) {
  const double scale = std::max(1.0, max_abs(x));
  if (basis.empty()) return max_abs(x) <= tol;
  Mat s(x.size(), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t k = 0; k < basis.size(); ++k) s.col(static_cast<Eigen::Index>(k)) = vec_of(basis[k]);
  const Vec v = vec_of(x);
  const Vec fit = s * s.completeOrthogonalDecomposition().solve(v);
  return (v - fit).cwiseAbs().maxCoeff() <= tol * scale;
}
} // namespace

bool AKSData::in_little_a(const Mat& x, double tol) const { return in_span_of(little_a_, x, tol); }
bool AKSData::in_little_b(const Mat& y, double tol) const { return in_span_of(little_b_, y, tol); }

LaxElement orbit_point(const AKSData& aks, const Mat& g_a, const Mat& g_b) {
  const Splitting& s = aks.splitting();
  if (!s.in_group_a(g_a)) throw MembershipError("orbit_point: g_A is not in the group of A");
  if (!s.in_group_b(g_b)) throw MembershipError("orbit_point: g_B is not in the group of B");
  LaxElement out;
  out.part_a_star = s.project(Mat(mat_inv(g_a) * aks.mu() * g_a), Part::BPerp);
  out.part_b_star = s.project(Mat(g_b * aks.nu() * mat_inv(g_b)), Part::APerp);
  out.L = out.part_a_star + out.part_b_star;
  return out;
}

double lie_poisson_bracket(const AKSData& aks, const LaxElement& L, const Mat& xi, const Mat& xi2) {
  const Splitting& s = aks.splitting();
  const bool xa = s.in_a(xi), xb = s.in_b(xi);
  const bool ya = s.in_a(xi2), yb = s.in_b(xi2);
  if (!(xa || xb) || !(ya || yb)) {
    throw MembershipError("lie_poisson_bracket: arguments must each lie in A or in B");
  }
  const Mat c = bracket(xi, xi2);
  // Zero lies in both subalgebras; such an argument gives a vanishing bracket.
  if (xa && ya) return -trace_form(L.part_a_star, c);
  if (xb && yb) return trace_form(L.part_b_star, c);
  return 0.0;
}

double hamiltonian(const Mat& L) { return 0.5 * trace_form(L, L); }
double hamiltonian(const LaxElement& L) { return hamiltonian(L.L); }

Mat random_combination(const std::vector<Mat>& basis, int n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Mat x = Mat::Zero(n, n);
  for (const auto& b : basis) x += unif(rng) * b;
  return x;
}

Mat random_exp(const std::vector<Mat>& basis, int n, std::mt19937_64& rng, double scale) {
  return mat_exp(random_combination(basis, n, rng, scale));
}

OrbitSeed random_orbit_seed(const AKSData& aks, std::mt19937_64& rng, double scale) {
  const Splitting& s = aks.splitting();
  OrbitSeed seed;
  seed.h_a = random_exp(s.basis_a(), s.n(), rng, scale);
  seed.h_b = random_exp(s.basis_b(), s.n(), rng, scale);
  return seed;
}

} // namespace aks
