#ifndef COVPOSE_TESTS_SUPPORT_HPP
#define COVPOSE_TESTS_SUPPORT_HPP

#include "covpose/common.hpp"
#include "covpose/linalg.hpp"

#include <cmath>
#include <functional>

// Test-side oracles and generators. Everything here is independent of the
// gradient paths it checks: only forward evaluations and plain loops.
namespace testsupport {

using covpose::Mat;
using covpose::Rng;
using covpose::Vec;

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({1.0, std::abs(got), std::abs(want)});
}

// Central finite difference through an in-place perturbed scalar.
inline double central_diff(const std::function<double()>& f, double& x,
                           double h = 1e-5) {
  const double x0 = x;
  x = x0 + h;
  const double fp = f();
  x = x0 - h;
  const double fm = f();
  x = x0;
  return (fp - fm) / (2.0 * h);
}

inline Mat random_gaussian(int rows, int cols, Rng& rng) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  }
  return m;
}

inline Mat random_orthogonal(int n, Rng& rng) {
  return covpose::qr_reduced(random_gaussian(n, n, rng)).q;
}

// Symmetric matrix with well-separated eigenvalues (gap >= min_gap).
inline Mat random_symmetric_spread(int n, Rng& rng, double min_gap = 0.5) {
  const Mat q = random_orthogonal(n, rng);
  Vec lambda(n);
  double v = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    lambda(i) = v;
    v += min_gap + rng.uniform(0.0, 1.0);
  }
  return q * lambda.asDiagonal() * q.transpose();
}

inline Mat random_spd(int n, Rng& rng, double min_eig = 0.5,
                      double max_eig = 3.0) {
  const Mat q = random_orthogonal(n, rng);
  Vec lambda(n);
  for (int i = 0; i < n; ++i) lambda(i) = rng.uniform(min_eig, max_eig);
  Mat m = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

// Matrix exponential oracle for SPD round trips: exp via eigendecomposition.
inline Mat sym_matrix_exp(const Mat& s) {
  const covpose::SymEigPair pair = covpose::sym_eig(s);
  const Vec e = pair.lambda.array().exp();
  return pair.u * e.asDiagonal() * pair.u.transpose();
}

}  // namespace testsupport

#endif  // COVPOSE_TESTS_SUPPORT_HPP
