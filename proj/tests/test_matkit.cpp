#include "doctest.h"

#include <cmath>
#include <random>

#include "aks/matkit.hpp"

using namespace aks;

namespace {

Mat E(int n, int i, int j) {
  Mat m = Mat::Zero(n, n);
  m(i, j) = 1.0;
  return m;
}

Mat random_matrix(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

// Reference exponential: truncated Taylor series in long double with its own
// scaling and squaring.
MatX<long double> taylor_exp(const Mat& x) {
  const MatX<long double> a = x.cast<long double>();
  const long double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  while (std::ldexp(norm, -s) > 0.25L) ++s;
  const MatX<long double> y = a * std::ldexp(1.0L, -s);
  const auto n = a.rows();
  MatX<long double> term = MatX<long double>::Identity(n, n);
  MatX<long double> sum = term;
  for (int k = 1; k < 40; ++k) {
    term = term * y / static_cast<long double>(k);
    sum += term;
  }
  for (int i = 0; i < s; ++i) sum = sum * sum;
  return sum;
}

// Gram-Schmidt on columns taken from last to first: g = Q L with L lower.
Factors<double> gram_schmidt_ql(const Mat& g) {
  const auto n = g.rows();
  Mat q = Mat::Zero(n, n);
  Mat l = Mat::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    Vec v = g.col(j);
    for (Eigen::Index k = n - 1; k > j; --k) {
      l(k, j) = q.col(k).dot(g.col(j));
      v -= l(k, j) * q.col(k);
    }
    l(j, j) = v.norm();
    q.col(j) = v / l(j, j);
  }
  return {q, l};
}

} // namespace

TEST_CASE("mat_exp of zero is the identity") {
  CHECK(max_abs(Mat(mat_exp(Mat::Zero(3, 3)) - Mat::Identity(3, 3))) == 0.0);
}

TEST_CASE("mat_exp of a nilpotent element terminates after the linear term") {
  const Mat x = E(2, 0, 1);
  CHECK(max_abs(Mat(mat_exp(x) - (Mat::Identity(2, 2) + x))) <= 1e-15);
}

TEST_CASE("mat_exp of a diagonal matrix matches scalar exponentials") {
  Mat x = Mat::Zero(2, 2);
  x(0, 0) = 1.0;
  x(1, 1) = -1.0;
  const Mat e = mat_exp(x);
  CHECK(std::abs(e(0, 0) - std::exp(1.0)) <= 1e-15 * std::exp(1.0));
  CHECK(std::abs(e(1, 1) - std::exp(-1.0)) <= 1e-15);
  CHECK(e(0, 1) == 0.0);
  CHECK(e(1, 0) == 0.0);
}

TEST_CASE("mat_exp relative error against an extended-precision Taylor reference") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 4;
    Mat x = random_matrix(n, rng);
    // spread the norms over (0, 10]
    const double target = 10.0 * (trial + 1) / 60.0;
    x *= target / x.norm();
    const MatX<long double> ref = taylor_exp(x);
    const Mat got = mat_exp(x);
    const long double err = (got.cast<long double>() - ref).norm() / ref.norm();
    CHECK(static_cast<double>(err) <= 1e-12);
  }
}

TEST_CASE("exp(X) exp(-X) = I for ||X|| <= 5") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 4;
    Mat x = random_matrix(n, rng);
    x *= 5.0 * (trial + 1) / 40.0 / x.norm();
    const Mat prod = mat_exp(x) * mat_exp(Mat(-x));
    CHECK(max_abs(Mat(prod - Mat::Identity(n, n))) <= 1e-12);
  }
}

TEST_CASE("mat_exp reports overflow") {
  Mat x = Mat::Zero(2, 2);
  x(0, 0) = 1000.0;
  CHECK_THROWS_AS(mat_exp(x), NonFiniteResult);
}

TEST_CASE("bracket and trace form on gl(2) generators") {
  const Mat b = bracket(E(2, 0, 1), E(2, 1, 0));
  CHECK(max_abs(Mat(b - (E(2, 0, 0) - E(2, 1, 1)))) == 0.0);
  CHECK(trace_form(E(2, 0, 1), E(2, 1, 0)) == 1.0);
}

TEST_CASE("trace form is symmetric and Ad-invariant, bracket antisymmetric") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    const Mat x = random_matrix(n, rng);
    const Mat y = random_matrix(n, rng);
    Mat g = random_matrix(n, rng) + 2.0 * Mat::Identity(n, n);
    const Mat gi = mat_inv(g);
    CHECK(trace_form(x, y) == doctest::Approx(trace_form(y, x)).epsilon(1e-14));
    CHECK(max_abs(Mat(bracket(x, y) + bracket(y, x))) <= 1e-14);
    const double lhs = trace_form(Mat(g * x * gi), Mat(g * y * gi));
    // direct evaluation of both sides (the oracle is the definition itself)
    CHECK(std::abs(lhs - (x * y).trace()) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("mat_inv rejects singular input") {
  Mat s(2, 2);
  s << 1, 2, 2, 4;
  CHECK_THROWS_AS(mat_inv(s), SingularMatrix);
}

TEST_CASE("gauss_factorize: identity and the worked 2x2 example") {
  const auto id = gauss_factorize(Mat(Mat::Identity(3, 3)));
  CHECK(max_abs(Mat(id.g_a - Mat::Identity(3, 3))) == 0.0);
  CHECK(max_abs(Mat(id.g_b - Mat::Identity(3, 3))) == 0.0);

  Mat g(2, 2);
  g << 1, 1, 1, 2;
  const auto f = gauss_factorize(g);
  Mat ga(2, 2), gb(2, 2);
  ga << 1, 0.5, 0, 1;
  gb << 0.5, 0, 1, 2;
  CHECK(max_abs(Mat(f.g_a - ga)) <= 1e-15);
  CHECK(max_abs(Mat(f.g_b - gb)) <= 1e-15);
  // oracle: multiplying the expected factors back reproduces g
  CHECK(max_abs(Mat(ga * gb - g)) == 0.0);
}

TEST_CASE("gauss_factorize rejects elements outside the Gauss-decomposable set") {
  // [[1,u],[0,1]] [[p,0],[q,r]] = [[p+uq, ur],[q, r]]: matching [[0,1],[-1,0]]
  // forces r = 0 and u r = 1, which is inconsistent.
  Mat g(2, 2);
  g << 0, 1, -1, 0;
  CHECK(g(1, 1) == 0.0);
  CHECK(g(0, 1) != 0.0);
  CHECK_THROWS_AS(gauss_factorize(g), NotInCheckedDomain);
}

TEST_CASE("gauss_factorize round trip and factor shape on random matrices") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    const Mat g = random_matrix(n, rng) + 0.5 * Mat::Identity(n, n);
    Factors<double> f;
    try {
      f = gauss_factorize(g);
    } catch (const NotInCheckedDomain&) {
      continue;
    }
    CHECK(max_abs(Mat(f.g_a * f.g_b - g)) <= 1e-12 * max_abs(g) * std::max(1.0, max_abs(f.g_a)));
    CHECK(max_abs(Mat(f.g_a.triangularView<Eigen::StrictlyLower>())) == 0.0);
    CHECK(max_abs(Vec(f.g_a.diagonal().array() - 1.0)) == 0.0);
    CHECK(max_abs(Mat(f.g_b.triangularView<Eigen::StrictlyUpper>())) == 0.0);
  }
}

TEST_CASE("gauss_factorize round trip within 1e-12 relative on well-conditioned elements") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    // exp of small random elements stays close to the identity
    const Mat g = mat_exp(random_matrix(n, rng, 0.3));
    const auto f = gauss_factorize(g);
    CHECK(max_abs(Mat(f.g_a * f.g_b - g)) <= 1e-12 * max_abs(g));
  }
}

TEST_CASE("iwasawa_factorize: identity and an orthogonal element") {
  const auto id = iwasawa_factorize(Mat(Mat::Identity(3, 3)));
  CHECK(max_abs(Mat(id.g_a - Mat::Identity(3, 3))) <= 1e-15);
  CHECK(max_abs(Mat(id.g_b - Mat::Identity(3, 3))) <= 1e-15);

  Mat r(2, 2);
  r << 0, -1, 1, 0;
  const auto f = iwasawa_factorize(r);
  CHECK(max_abs(Mat(f.g_a - r)) <= 1e-15);
  CHECK(max_abs(Mat(f.g_b - Mat::Identity(2, 2))) <= 1e-15);
}

TEST_CASE("iwasawa_factorize agrees with reversed-column Gram-Schmidt") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3;
    const Mat g = random_matrix(n, rng) + 0.2 * Mat::Identity(n, n);
    if (std::abs(g.determinant()) < 1e-3) continue;
    const auto f = iwasawa_factorize(g);
    const auto ref = gram_schmidt_ql(g);
    CHECK(max_abs(Mat(f.g_a.transpose() * f.g_a - Mat::Identity(n, n))) <= 1e-12);
    CHECK((f.g_b.diagonal().array() > 0.0).all());
    CHECK(max_abs(Mat(f.g_b.triangularView<Eigen::StrictlyUpper>())) == 0.0);
    CHECK(max_abs(Mat(f.g_a * f.g_b - g)) <= 1e-12 * max_abs(g));
    CHECK(max_abs(Mat(f.g_a - ref.g_a)) <= 1e-10);
    CHECK(max_abs(Mat(f.g_b - ref.g_b)) <= 1e-10);
  }
}

TEST_CASE("iwasawa_factorize rejects singular input") {
  Mat s(2, 2);
  s << 1, 2, 2, 4;
  CHECK_THROWS_AS(iwasawa_factorize(s), SingularMatrix);
}

TEST_CASE("matkit instantiates in extended precision") {
  MatX<long double> g(2, 2);
  g << 1, 1, 1, 2;
  const auto f = gauss_factorize(g);
  CHECK(std::abs(static_cast<double>(f.g_a(0, 1)) - 0.5) < 1e-18);
  const auto e = mat_exp(MatX<long double>(MatX<long double>::Zero(2, 2)));
  CHECK(static_cast<double>(e(1, 1)) == 1.0);
}
