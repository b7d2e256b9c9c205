#ifndef COVPOSE_LINALG_HPP
#define COVPOSE_LINALG_HPP

#include "covpose/common.hpp"

namespace covpose {

/// Eigendecomposition of a symmetric matrix: U * diag(lambda) * U^T with
/// eigenvalues sorted descending and orthonormal columns in U.
struct SymEigPair {
  Mat u;
  Vec lambda;
};

struct QrReduced {
  Mat q;     // n x m, orthonormal columns
  Mat r;     // m x m, upper triangular, nonnegative diagonal
};

/// Symmetric eigendecomposition. The input is symmetrized as (M + M^T)/2
/// before factoring; it must be square, finite, and symmetric within a
/// 1e-9 relative tolerance.
SymEigPair sym_eig(const Mat& m);

/// Reverse-mode gradient through sym_eig. Given adjoints of the eigenvalues
/// and eigenvectors, returns the (symmetric) adjoint of the input matrix.
/// Near-degenerate eigenvalue pairs (|l_i - l_j| < tie_tol, with
/// tie_tol = 1e-8 * max|l|) contribute zero to the eigenvector term; this is
/// the stable sub-gradient choice for spectral maps with tied blocks.
Mat sym_eig_backward(const SymEigPair& pair, const Vec& d_lambda,
                     const Mat& d_u);

/// Reduced QR of an n x m matrix (n >= m) with the sign convention that the
/// diagonal of R is nonnegative, which makes the factorization unique and
/// bit-reproducible. Throws RankDeficient when any |R_ii| < 1e-12 * ||A||_F.
QrReduced qr_reduced(const Mat& a);

/// Lower Cholesky factor with strictly positive diagonal. Throws
/// NotPositiveDefinite when a pivot is not positive.
Mat cholesky_lower(const Mat& m);

/// Reverse-mode gradient through cholesky_lower: given L = chol(S) and the
/// adjoint of L, returns the symmetric adjoint of S.
Mat cholesky_backward(const Mat& l, const Mat& d_l);

/// Throws NotPositiveDefinite unless all eigenvalues of sym(m) are > 0.
void assert_spd(const Mat& m, const std::string& context = "");

}  // namespace covpose

#endif  // COVPOSE_LINALG_HPP
