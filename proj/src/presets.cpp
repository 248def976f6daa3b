#include "aks/presets.hpp"

#include <stdexcept>

namespace aks {

namespace {

void require_size(int n) {
  if (n < 2) throw std::invalid_argument("preset: matrix size must be at least 2");
}

std::vector<Mat> lower_borel_traceless(int n) {
  std::vector<Mat> basis;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) basis.push_back(unit_matrix(n, i, j));
  for (int i = 0; i + 1 < n; ++i) basis.push_back(unit_matrix(n, i, i) - unit_matrix(n, i + 1, i + 1));
  return basis;
}

Mat superdiagonal_ones(int n) {
  Mat m = Mat::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = 1.0;
  return m;
}

} // namespace

Splitting triangular_splitting(int n) {
  require_size(n);
  std::vector<Mat> upper;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) upper.push_back(unit_matrix(n, i, j));
  return Splitting(MatrixAlgebra::sl(n), std::move(upper), lower_borel_traceless(n),
                   FactorizationKind::Gauss);
}

Splitting iwasawa_splitting(int n) {
  require_size(n);
  std::vector<Mat> so;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) so.push_back(unit_matrix(n, i, j) - unit_matrix(n, j, i));
  return Splitting(MatrixAlgebra::sl(n), std::move(so), lower_borel_traceless(n),
                   FactorizationKind::Iwasawa);
}

AKSData preset_toda(int n) {
  Splitting s = triangular_splitting(n);
  const Mat nu = superdiagonal_ones(n);
  const Mat mu = nu.transpose();
  return AKSData(std::move(s), mu, nu);
}

AKSData preset_iwasawa(int n) {
  Splitting s = iwasawa_splitting(n);
  const Mat nu = s.project(superdiagonal_ones(n), Part::APerp);
  return AKSData(std::move(s), Mat::Zero(n, n), nu);
}

} // namespace aks
