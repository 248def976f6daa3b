#ifndef AKS_LIE_CORE_HPP
#define AKS_LIE_CORE_HPP

#include <vector>

#include "aks/matkit.hpp"

namespace aks {

/// A Lie algebra realized as a subspace of gl(n, R) spanned by a basis of
/// matrices, paired with the trace form <X, Y> = tr(XY).
class MatrixAlgebra {
public:
  /// Validates linear independence, closure under the bracket and
  /// nondegeneracy of the trace form on the span.
  MatrixAlgebra(int n, std::vector<Mat> basis);

  static MatrixAlgebra sl(int n);
  static MatrixAlgebra gl(int n);

  int matrix_size() const { return n_; }
  int dim() const { return static_cast<int>(basis_.size()); }
  const std::vector<Mat>& basis() const { return basis_; }
  const std::vector<Mat>& dual_basis() const { return dual_; }
  const Mat& gram() const { return gram_; }

  /// Least-squares coordinates in the basis (no membership check).
  Vec coordinates(const Mat& x) const;
  Mat from_coordinates(const Vec& c) const;

  /// ||X - P(X)||_max / max(1, ||X||_max) where P is the least-squares projection on the span.
  double membership_residual(const Mat& x) const;
  bool contains(const Mat& x, double tol = 1e-9) const;
  void require_member(const Mat& x, const char* what) const;

  /// The element of the algebra representing the functional Y -> tr(Z Y) on
  /// it, for an arbitrary ambient matrix Z.
  Mat dual_projection(const Mat& z) const;

private:
  int n_;
  std::vector<Mat> basis_;
  std::vector<Mat> dual_;
  Mat gram_;
  Mat stacked_;   // n^2 x dim, vec(T_a) in columns
  Mat pinv_;      // dim x n^2
};

enum class Part { A, B, APerp, BPerp };

/// Which closed-form group factorization g = g_A g_B the splitting supports.
enum class FactorizationKind { None, Gauss, Iwasawa };

/// A direct-sum splitting G = A + B into two subalgebras and the induced
/// splitting G = A^perp + B^perp, with A* ~ B^perp and B* ~ A^perp.
class Splitting {
public:
  /// Throws MembershipError, DirectSumViolation, NotSubalgebra or DegenerateForm.
  Splitting(MatrixAlgebra algebra, std::vector<Mat> basis_a, std::vector<Mat> basis_b,
            FactorizationKind kind = FactorizationKind::None);

  const MatrixAlgebra& algebra() const { return algebra_; }
  int n() const { return algebra_.matrix_size(); }
  int dim_a() const { return static_cast<int>(basis_a_.size()); }
  int dim_b() const { return static_cast<int>(basis_b_.size()); }

  /// {X_m} spanning A and {Y_r} spanning B.
  const std::vector<Mat>& basis_a() const { return basis_a_; }
  const std::vector<Mat>& basis_b() const { return basis_b_; }
  /// {X^m} in B^perp with <X^m, X_k> = delta, and {Y^r} in A^perp likewise.
  const std::vector<Mat>& dual_a() const { return dual_a_; }
  const std::vector<Mat>& dual_b() const { return dual_b_; }

  FactorizationKind factorization() const { return kind_; }

  Mat project(const Mat& x, Part which) const;

  /// Coefficients of pi_A(X) in {X_m} and of pi_B(X) in {Y_r}.
  Vec coords_a(const Mat& x) const;
  Vec coords_b(const Mat& x) const;

  Mat combine_a(const Vec& c) const;
  Mat combine_b(const Vec& c) const;
  Mat combine_dual_a(const Vec& c) const;
  Mat combine_dual_b(const Vec& c) const;

  bool in_a(const Mat& x, double tol = 1e-9) const;
  bool in_b(const Mat& x, double tol = 1e-9) const;
  bool in_a_perp(const Mat& x, double tol = 1e-9) const;
  bool in_b_perp(const Mat& x, double tol = 1e-9) const;

  /// g = g_A g_B by the splitting's factorization kind.
  Factors<double> factorize(const Mat& g, double pivot_tol = 1e-10) const;

  /// Shape test for the groups of A and B (triangular/orthogonal patterns).
  bool in_group_a(const Mat& g, double tol = 1e-9) const;
  bool in_group_b(const Mat& g, double tol = 1e-9) const;

private:
  Vec joint_coordinates(const Mat& x) const;

  MatrixAlgebra algebra_;
  std::vector<Mat> basis_a_;
  std::vector<Mat> basis_b_;
  std::vector<Mat> dual_a_;
  std::vector<Mat> dual_b_;
  Mat joint_pinv_;   // dim x n^2
  FactorizationKind kind_;
};

/// E_ij as an n x n matrix (0-based indices).
Mat unit_matrix(int n, int i, int j);

/// vec() of a square matrix, column-major.
inline Vec vec_of(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

/// Orthonormal basis (columns) of the nullspace of m, singular-value threshold
/// tol * max(1, sigma_max).
Mat nullspace(const Mat& m, double tol = 1e-10);

} // namespace aks

#endif // AKS_LIE_CORE_HPP
