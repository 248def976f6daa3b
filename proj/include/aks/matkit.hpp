#ifndef AKS_MATKIT_HPP
#define AKS_MATKIT_HPP

// Dense real-matrix kernel: exponential, inverse, Lie bracket, trace form and
// the two group factorizations g = g_A g_B used to solve AKS flows.
//
// Everything here is templated on the scalar type so that the same code can
// be instantiated in extended precision for reference computations.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "aks/errors.hpp"

namespace aks {

template <typename Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatX<double>;
using Vec = VecX<double>;

/// Group factors of g = g_A * g_B, A-factor on the left.
template <typename Scalar>
struct Factors {
  MatX<Scalar> g_a;
  MatX<Scalar> g_b;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Largest absolute entry.
template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& m) {
  if (m.size() == 0) return typename Derived::Scalar(0);
  return m.cwiseAbs().maxCoeff();
}

template <typename DerivedX, typename DerivedY>
MatX<typename DerivedX::Scalar> bracket(const Eigen::MatrixBase<DerivedX>& x,
                                        const Eigen::MatrixBase<DerivedY>& y) {
  return x * y - y * x;
}

/// <X, Y> = tr(XY), computed without forming the product.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar trace_form(const Eigen::MatrixBase<DerivedX>& x,
                                     const Eigen::MatrixBase<DerivedY>& y) {
  return x.cwiseProduct(y.transpose()).sum();
}

template <typename Derived>
MatX<typename Derived::Scalar> mat_inv(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  if (g.rows() != g.cols()) throw Error("mat_inv: matrix is not square");
  const Eigen::FullPivLU<MatX<Scalar>> lu(g);
  if (!lu.isInvertible()) throw SingularMatrix("mat_inv: matrix is singular");
  MatX<Scalar> inv = lu.inverse();
  if (!inv.allFinite()) throw SingularMatrix("mat_inv: inverse is not finite");
  return inv;
}

namespace detail {

// Pade coefficients b_0..b_m of the diagonal [m/m] approximant to exp.
template <typename Scalar>
void pade_coefficients(int m, Scalar* b) {
  switch (m) {
  case 3: {
    const long double c[] = {120.L, 60.L, 12.L, 1.L};
    for (int i = 0; i <= 3; ++i) b[i] = Scalar(c[i]);
    break;
  }
  case 5: {
    const long double c[] = {30240.L, 15120.L, 3360.L, 420.L, 30.L, 1.L};
    for (int i = 0; i <= 5; ++i) b[i] = Scalar(c[i]);
    break;
  }
  case 7: {
    const long double c[] = {17297280.L, 8648640.L, 1995840.L, 277200.L,
                             25200.L,    1512.L,    56.L,      1.L};
    for (int i = 0; i <= 7; ++i) b[i] = Scalar(c[i]);
    break;
  }
  case 9: {
    const long double c[] = {17643225600.L, 8821612800.L, 2075673600.L, 302702400.L, 30270240.L,
                             2162160.L,     110880.L,     3960.L,       90.L,        1.L};
    for (int i = 0; i <= 9; ++i) b[i] = Scalar(c[i]);
    break;
  }
  default: {
    const long double c[] = {64764752532480000.L,
                             32382376266240000.L,
                             7771770303897600.L,
                             1187353796428800.L,
                             129060195264000.L,
                             10559470521600.L,
                             670442572800.L,
                             33522128640.L,
                             1323241920.L,
                             40840800.L,
                             960960.L,
                             16380.L,
                             182.L,
                             1.L};
    for (int i = 0; i <= 13; ++i) b[i] = Scalar(c[i]);
    break;
  }
  }
}

// U = odd part, V = even part of the [m/m] numerator evaluated at A.
template <typename Scalar>
void pade_uv(const MatX<Scalar>& a, int m, MatX<Scalar>& u, MatX<Scalar>& v) {
  Scalar b[14];
  pade_coefficients<Scalar>(m, b);
  const Eigen::Index n = a.rows();
  const MatX<Scalar> id = MatX<Scalar>::Identity(n, n);
  const MatX<Scalar> a2 = a * a;
  if (m == 13) {
    const MatX<Scalar> a4 = a2 * a2;
    const MatX<Scalar> a6 = a4 * a2;
    const MatX<Scalar> inner_u = b[13] * a6 + b[11] * a4 + b[9] * a2;
    const MatX<Scalar> inner_v = b[12] * a6 + b[10] * a4 + b[8] * a2;
    u = a * (a6 * inner_u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    v = a6 * inner_v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    return;
  }
  // Horner in A^2 for the small orders.
  MatX<Scalar> odd = b[m] * id;
  MatX<Scalar> even = b[m - 1] * id;
  for (int k = m - 2; k >= 1; k -= 2) {
    odd = odd * a2 + b[k] * id;
    even = even * a2 + b[k - 1] * id;
  }
  u = a * odd;
  v = even;
}

} // namespace detail

/// Matrix exponential by scaling and squaring around a diagonal Pade
/// approximant (orders 3, 5, 7, 9, 13 selected by the 1-norm).
template <typename Derived>
MatX<typename Derived::Scalar> mat_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using std::ceil;
  using std::log2;
  if (x.rows() != x.cols()) throw Error("mat_exp: matrix is not square");
  if (!x.allFinite()) throw NonFiniteResult("mat_exp: input is not finite");

  const MatX<Scalar> a = x;
  const Scalar norm1 = a.cwiseAbs().colwise().sum().maxCoeff();

  // Backward-error thresholds for double precision.
  const double theta[] = {1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                          2.097847961257068e0, 5.371920351148152e0};
  const int orders[] = {3, 5, 7, 9, 13};

  MatX<Scalar> u, v;
  int squarings = 0;
  int order = 13;
  for (int i = 0; i < 4; ++i) {
    if (norm1 <= Scalar(theta[i])) {
      order = orders[i];
      break;
    }
  }
  MatX<Scalar> scaled = a;
  if (order == 13 && norm1 > Scalar(theta[4])) {
    squarings = static_cast<int>(ceil(log2(norm1 / Scalar(theta[4]))));
    scaled = a * Scalar(std::ldexp(1.0, -squarings));
  }
  detail::pade_uv<Scalar>(scaled, order, u, v);

  const MatX<Scalar> numer = v + u;
  const MatX<Scalar> denom = v - u;
  MatX<Scalar> result = Eigen::PartialPivLU<MatX<Scalar>>(denom).solve(numer);
  for (int s = 0; s < squarings; ++s) result = result * result;

  if (!result.allFinite()) throw NonFiniteResult("mat_exp: result overflowed");
  return result;
}

/// Gauss ("UL") factorization g = g_A g_B with g_A unit upper triangular and
/// g_B lower triangular. Elimination runs from the bottom-right corner, so the
/// pivots are ratios of trailing principal minors of g.
///
/// Throws NotInCheckedDomain when a pivot is below pivot_tol relative to the
/// largest entry of its (remaining) row.
template <typename Derived>
Factors<typename Derived::Scalar> gauss_factorize(const Eigen::MatrixBase<Derived>& g,
                                                  double pivot_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  if (g.rows() != g.cols()) throw Error("gauss_factorize: matrix is not square");
  if (!g.allFinite()) throw NonFiniteResult("gauss_factorize: input is not finite");
  const Eigen::Index n = g.rows();
  MatX<Scalar> w = g;
  MatX<Scalar> upper = MatX<Scalar>::Identity(n, n);

  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const Scalar pivot = w(k, k);
    const Scalar row_max = w.row(k).head(k + 1).cwiseAbs().maxCoeff();
    if (!(abs(pivot) > Scalar(pivot_tol) * row_max)) {
      throw NotInCheckedDomain("gauss_factorize: trailing minor pivot " + std::to_string(k) +
                               " vanishes; g is not Gauss-decomposable");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      const Scalar f = w(i, k) / pivot;
      if (f == Scalar(0)) continue;
      w.row(i).head(k + 1) -= f * w.row(k).head(k + 1);
      upper(i, k) = f;
    }
  }
  MatX<Scalar> lower = w.template triangularView<Eigen::Lower>();
  return {std::move(upper), std::move(lower)};
}

/// Iwasawa ("QL") factorization g = g_A g_B with g_A orthogonal and g_B lower
/// triangular with strictly positive diagonal. det g_A = sign(det g).
template <typename Derived>
Factors<typename Derived::Scalar> iwasawa_factorize(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  if (g.rows() != g.cols()) throw Error("iwasawa_factorize: matrix is not square");
  if (!g.allFinite()) throw NonFiniteResult("iwasawa_factorize: input is not finite");
  const Eigen::Index n = g.rows();

  // Reversing rows and columns turns QL into QR.
  const MatX<Scalar> reversed = g.reverse();
  const Eigen::HouseholderQR<MatX<Scalar>> qr(reversed);
  const MatX<Scalar> q_rev = qr.householderQ();
  const MatX<Scalar> r_rev = qr.matrixQR().template triangularView<Eigen::Upper>();

  MatX<Scalar> q = q_rev.reverse();
  MatX<Scalar> lower = r_rev.reverse();

  const Scalar scale = g.cwiseAbs().maxCoeff();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(abs(lower(i, i)) > Scalar(n) * eps * scale)) {
      throw SingularMatrix("iwasawa_factorize: matrix is singular");
    }
    if (lower(i, i) < Scalar(0)) {
      q.col(i) = -q.col(i);
      lower.row(i) = -lower.row(i);
    }
  }
  return {std::move(q), std::move(lower)};
}

} // namespace aks

#endif // AKS_MATKIT_HPP
