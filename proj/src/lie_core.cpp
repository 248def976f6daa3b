#include "aks/lie_core.hpp"

#include <algorithm>
#include <string>

namespace aks {

namespace {

Mat stack_columns(const std::vector<Mat>& mats, int n) {
  Mat out(static_cast<Eigen::Index>(n) * n, static_cast<Eigen::Index>(mats.size()));
  for (std::size_t k = 0; k < mats.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = vec_of(mats[k]);
  return out;
}

Mat reshape(const Vec& v, int n) { return Eigen::Map<const Mat>(v.data(), n, n); }

int numerical_rank(const Mat& m, double tol) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  const double thr = tol * std::max(1.0, s.size() ? s(0) : 0.0);
  return static_cast<int>((s.array() > thr).count());
}

// Closure residual of span(sub) under brackets, relative to the bracket size.
double closure_residual(const std::vector<Mat>& sub, int n) {
  if (sub.empty()) return 0.0;
  const Mat basis = stack_columns(sub, n);
  const Eigen::CompleteOrthogonalDecomposition<Mat> cod(basis);
  double worst = 0.0;
  for (std::size_t i = 0; i < sub.size(); ++i) {
    for (std::size_t j = i + 1; j < sub.size(); ++j) {
      const Vec b = vec_of(bracket(sub[i], sub[j]));
      const Vec fit = basis * cod.solve(b);
      const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
      worst = std::max(worst, (b - fit).cwiseAbs().maxCoeff() / scale);
    }
  }
  return worst;
}

} // namespace

Mat unit_matrix(int n, int i, int j) {
  Mat e = Mat::Zero(n, n);
  e(i, j) = 1.0;
  return e;
}

Mat nullspace(const Mat& m, double tol) {
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return Mat::Identity(cols, cols);
  const Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec& s = svd.singularValues();
  const double thr = tol * std::max(1.0, s.size() ? s(0) : 0.0);
  const Eigen::Index rank = (s.array() > thr).count();
  return svd.matrixV().rightCols(cols - rank);
}

// ---------------------------------------------------------------------------
// MatrixAlgebra

MatrixAlgebra::MatrixAlgebra(int n, std::vector<Mat> basis) : n_(n), basis_(std::move(basis)) {
  if (n < 1) throw Error("MatrixAlgebra: matrix size must be positive");
  for (const auto& b : basis_) {
    if (b.rows() != n || b.cols() != n) throw Error("MatrixAlgebra: basis element has wrong shape");
  }
  const int d = dim();
  stacked_ = stack_columns(basis_, n);
  if (numerical_rank(stacked_, 1e-10) != d) {
    throw DirectSumViolation("MatrixAlgebra: basis is linearly dependent");
  }
  const double closure = closure_residual(basis_, n);
  if (closure > 1e-10) {
    throw NotSubalgebra("MatrixAlgebra: span is not closed under the bracket (residual " +
                        std::to_string(closure) + ")");
  }
  gram_.resize(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) gram_(a, b) = trace_form(basis_[a], basis_[b]);
  const Eigen::FullPivLU<Mat> lu(gram_);
  if (d > 0 && !lu.isInvertible()) throw DegenerateForm("MatrixAlgebra: trace form is degenerate");
  const Mat gram_inv = d > 0 ? Mat(lu.inverse()) : Mat();
  dual_.assign(basis_.size(), Mat::Zero(n, n));
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) dual_[a] += gram_inv(b, a) * basis_[b];
  pinv_ = stacked_.completeOrthogonalDecomposition().pseudoInverse();
}

MatrixAlgebra MatrixAlgebra::sl(int n) {
  std::vector<Mat> basis;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) basis.push_back(unit_matrix(n, i, j));
  for (int i = 0; i + 1 < n; ++i) basis.push_back(unit_matrix(n, i, i) - unit_matrix(n, i + 1, i + 1));
  return MatrixAlgebra(n, std::move(basis));
}

MatrixAlgebra MatrixAlgebra::gl(int n) {
  std::vector<Mat> basis;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) basis.push_back(unit_matrix(n, i, j));
  return MatrixAlgebra(n, std::move(basis));
}

Vec MatrixAlgebra::coordinates(const Mat& x) const { return pinv_ * vec_of(x); }

Mat MatrixAlgebra::from_coordinates(const Vec& c) const {
  Mat out = Mat::Zero(n_, n_);
  for (int a = 0; a < dim(); ++a) out += c(a) * basis_[a];
  return out;
}

double MatrixAlgebra::membership_residual(const Mat& x) const {
  const Vec v = vec_of(x);
  const Vec fit = stacked_ * (pinv_ * v);
  const double scale = std::max(1.0, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
  return (v - fit).cwiseAbs().maxCoeff() / scale;
}

bool MatrixAlgebra::contains(const Mat& x, double tol) const {
  return x.rows() == n_ && x.cols() == n_ && x.allFinite() && membership_residual(x) <= tol;
}

void MatrixAlgebra::require_member(const Mat& x, const char* what) const {
  if (!contains(x)) throw MembershipError(std::string(what) + " is not an element of the algebra");
}

Mat MatrixAlgebra::dual_projection(const Mat& z) const {
  Mat out = Mat::Zero(n_, n_);
  for (int a = 0; a < dim(); ++a) out += trace_form(z, basis_[a]) * dual_[a];
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

Splitting::Splitting(MatrixAlgebra algebra, std::vector<Mat> basis_a, std::vector<Mat> basis_b,
                     FactorizationKind kind)
    : algebra_(std::move(algebra)), basis_a_(std::move(basis_a)), basis_b_(std::move(basis_b)),
      kind_(kind) {
  const int n = algebra_.matrix_size();
  for (const auto& x : basis_a_)
    if (!algebra_.contains(x)) throw MembershipError("Splitting: basis of A is not in the algebra");
  for (const auto& y : basis_b_)
    if (!algebra_.contains(y)) throw MembershipError("Splitting: basis of B is not in the algebra");

  const int da = dim_a();
  const int db = dim_b();
  if (da + db != algebra_.dim()) {
    throw DirectSumViolation("Splitting: dim A + dim B = " + std::to_string(da + db) +
                             " differs from dim G = " + std::to_string(algebra_.dim()));
  }
  std::vector<Mat> joint = basis_a_;
  joint.insert(joint.end(), basis_b_.begin(), basis_b_.end());
  const Mat stacked = stack_columns(joint, n);
  if (numerical_rank(stack_columns(basis_a_, n), 1e-10) != da ||
      numerical_rank(stack_columns(basis_b_, n), 1e-10) != db ||
      numerical_rank(stacked, 1e-10) != da + db) {
    throw DirectSumViolation("Splitting: A and B intersect nontrivially");
  }
  if (closure_residual(basis_a_, n) > 1e-10) throw NotSubalgebra("Splitting: A is not a subalgebra");
  if (closure_residual(basis_b_, n) > 1e-10) throw NotSubalgebra("Splitting: B is not a subalgebra");

  const int d = da + db;
  Mat gram(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) gram(a, b) = trace_form(joint[a], joint[b]);
  const Eigen::FullPivLU<Mat> lu(gram);
  if (d > 0 && !lu.isInvertible()) throw DegenerateForm("Splitting: trace form is degenerate");
  const Mat gram_inv = d > 0 ? Mat(lu.inverse()) : Mat();

  std::vector<Mat> dual(joint.size(), Mat::Zero(n, n));
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) dual[a] += gram_inv(b, a) * joint[b];
  dual_a_.assign(dual.begin(), dual.begin() + da);
  dual_b_.assign(dual.begin() + da, dual.end());

  joint_pinv_ = stacked.completeOrthogonalDecomposition().pseudoInverse();
}

Vec Splitting::joint_coordinates(const Mat& x) const {
  if (!algebra_.contains(x)) throw MembershipError("Splitting::project: argument is not in the algebra");
  return joint_pinv_ * vec_of(x);
}

Vec Splitting::coords_a(const Mat& x) const { return joint_coordinates(x).head(dim_a()); }
Vec Splitting::coords_b(const Mat& x) const { return joint_coordinates(x).tail(dim_b()); }

namespace {
Mat combine(const std::vector<Mat>& basis, const Vec& c, int n) {
  Mat out = Mat::Zero(n, n);
  for (std::size_t k = 0; k < basis.size(); ++k) out += c(static_cast<Eigen::Index>(k)) * basis[k];
  return out;
}
} // namespace

Mat Splitting::combine_a(const Vec& c) const { return combine(basis_a_, c, n()); }
Mat Splitting::combine_b(const Vec& c) const { return combine(basis_b_, c, n()); }
Mat Splitting::combine_dual_a(const Vec& c) const { return combine(dual_a_, c, n()); }
Mat Splitting::combine_dual_b(const Vec& c) const { return combine(dual_b_, c, n()); }

Mat Splitting::project(const Mat& x, Part which) const {
  switch (which) {
  case Part::A:
    return combine_a(coords_a(x));
  case Part::B:
    return combine_b(coords_b(x));
  case Part::BPerp: {
    algebra_.require_member(x, "Splitting::project argument");
    Vec c(dim_a());
    for (int m = 0; m < dim_a(); ++m) c(m) = trace_form(x, basis_a_[m]);
    return combine_dual_a(c);
  }
  case Part::APerp: {
    algebra_.require_member(x, "Splitting::project argument");
    Vec c(dim_b());
    for (int r = 0; r < dim_b(); ++r) c(r) = trace_form(x, basis_b_[r]);
    return combine_dual_b(c);
  }
  }
  return Mat();
}

namespace {
// X lies in span(basis) inside the algebra, relative residual.
bool in_span(const std::vector<Mat>& basis, const Mat& x, int n, double tol) {
  if (x.rows() != n || x.cols() != n || !x.allFinite()) return false;
  const Vec v = vec_of(x);
  if (basis.empty()) return v.cwiseAbs().maxCoeff() <= tol;
  const Mat s = stack_columns(basis, n);
  const Vec fit = s * s.completeOrthogonalDecomposition().solve(v);
  return (v - fit).cwiseAbs().maxCoeff() <= tol * std::max(1.0, v.cwiseAbs().maxCoeff());
}
} // namespace

bool Splitting::in_a(const Mat& x, double tol) const { return in_span(basis_a_, x, n(), tol); }
bool Splitting::in_b(const Mat& x, double tol) const { return in_span(basis_b_, x, n(), tol); }
bool Splitting::in_a_perp(const Mat& x, double tol) const { return in_span(dual_b_, x, n(), tol); }
bool Splitting::in_b_perp(const Mat& x, double tol) const { return in_span(dual_a_, x, n(), tol); }

Factors<double> Splitting::factorize(const Mat& g, double pivot_tol) const {
  switch (kind_) {
  case FactorizationKind::Gauss:
    return gauss_factorize(g, pivot_tol);
  case FactorizationKind::Iwasawa:
    return iwasawa_factorize(g);
  case FactorizationKind::None:
    break;
  }
  throw Error("Splitting::factorize: no factorization is registered for this splitting");
}

bool Splitting::in_group_a(const Mat& g, double tol) const {
  const int n = this->n();
  if (g.rows() != n || g.cols() != n || !g.allFinite()) return false;
  const double scale = std::max(1.0, max_abs(g));
  switch (kind_) {
  case FactorizationKind::Gauss: {
    const Mat lower = g.triangularView<Eigen::StrictlyLower>();
    return max_abs(lower) <= tol * scale && max_abs(Vec(g.diagonal().array() - 1.0)) <= tol * scale;
  }
  case FactorizationKind::Iwasawa:
    return max_abs(Mat(g.transpose() * g - Mat::Identity(n, n))) <= tol && g.determinant() > 0.0;
  case FactorizationKind::None:
    return true;
  }
  return false;
}

bool Splitting::in_group_b(const Mat& g, double tol) const {
  const int n = this->n();
  if (g.rows() != n || g.cols() != n || !g.allFinite()) return false;
  const double scale = std::max(1.0, max_abs(g));
  switch (kind_) {
  case FactorizationKind::Gauss:
  case FactorizationKind::Iwasawa: {
    const Mat upper = g.triangularView<Eigen::StrictlyUpper>();
    return max_abs(upper) <= tol * scale && (g.diagonal().array() > 0.0).all();
  }
  case FactorizationKind::None:
    return true;
  }
  return false;
}

} // namespace aks
