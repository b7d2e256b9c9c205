#include "covpose/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>

namespace covpose {

SymEigPair sym_eig(const Mat& m) {
  require(m.rows() == m.cols(), ErrorCode::InvalidInput,
          "sym_eig needs a square matrix");
  require(all_finite(m), ErrorCode::InvalidInput, "sym_eig: non-finite input");
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale > 0.0) {
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    require(asym <= 1e-9 * scale + 1e-14, ErrorCode::InvalidInput,
            "sym_eig: input is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Mat> solver(sym(m));
  require(solver.info() == Eigen::Success, ErrorCode::InvalidInput,
          "sym_eig: eigensolver failed");

  // Eigen returns ascending order; flip to descending.
  const Eigen::Index n = m.rows();
  SymEigPair pair;
  pair.lambda = solver.eigenvalues().reverse();
  pair.u.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    pair.u.col(j) = solver.eigenvectors().col(n - 1 - j);
  }
  return pair;
}

Mat sym_eig_backward(const SymEigPair& pair, const Vec& d_lambda,
                     const Mat& d_u) {
  const Eigen::Index n = pair.lambda.size();
  require(pair.u.rows() == n && pair.u.cols() == n, ErrorCode::InvalidInput,
          "sym_eig_backward: inconsistent pair");
  require(d_lambda.size() == n, ErrorCode::InvalidInput,
          "sym_eig_backward: eigenvalue adjoint has wrong size");
  require(d_u.rows() == n && d_u.cols() == n, ErrorCode::InvalidInput,
          "sym_eig_backward: eigenvector adjoint has wrong shape");
  require(all_finite(d_u) && d_lambda.allFinite(), ErrorCode::InvalidInput,
          "sym_eig_backward: non-finite adjoint");

  Mat core = Mat::Zero(n, n);
  core.diagonal() = d_lambda;

  if (!d_u.isZero(0.0)) {
    const Mat a = pair.u.transpose() * d_u;
    const double tie_tol = 1e-8 * pair.lambda.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double gap = pair.lambda(j) - pair.lambda(i);
        if (std::abs(gap) < tie_tol) continue;  // tied block sub-gradient
        const double v = 0.5 * (a(i, j) - a(j, i)) / gap;
        core(i, j) += v;
        core(j, i) += v;
      }
    }
  }

  return sym(pair.u * core * pair.u.transpose());
}

QrReduced qr_reduced(const Mat& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  require(n >= m && m >= 1, ErrorCode::InvalidInput,
          "qr_reduced needs n >= m >= 1");
  require(all_finite(a), ErrorCode::InvalidInput, "qr_reduced: non-finite input");

  Eigen::HouseholderQR<Mat> qr(a);
  QrReduced out;
  out.q = qr.householderQ() * Mat::Identity(n, m);
  out.r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();

  const double rank_tol = 1e-12 * std::max(a.norm(), 1e-300);
  for (Eigen::Index i = 0; i < m; ++i) {
    require(std::abs(out.r(i, i)) >= rank_tol, ErrorCode::RankDeficient,
            "qr_reduced: rank-deficient input");
    if (out.r(i, i) < 0.0) {
      out.r.row(i) = -out.r.row(i);
      out.q.col(i) = -out.q.col(i);
    }
  }
  return out;
}

Mat cholesky_lower(const Mat& m) {
  require(m.rows() == m.cols(), ErrorCode::InvalidInput,
          "cholesky_lower needs a square matrix");
  require(all_finite(m), ErrorCode::InvalidInput,
          "cholesky_lower: non-finite input");

  Eigen::LLT<Mat> llt(sym(m));
  require(llt.info() == Eigen::Success, ErrorCode::NotPositiveDefinite,
          "cholesky_lower: matrix is not positive definite");
  Mat l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    require(l(i, i) > 0.0, ErrorCode::NotPositiveDefinite,
            "cholesky_lower: nonpositive pivot");
  }
  return l;
}

Mat cholesky_backward(const Mat& l, const Mat& d_l) {
  const Eigen::Index n = l.rows();
  require(l.cols() == n && d_l.rows() == n && d_l.cols() == n,
          ErrorCode::InvalidInput, "cholesky_backward: shape mismatch");

  // With S = L L^T and adjoint dL, the adjoint of S is
  //   sym(L^{-T} Phi(L^T dL) L^{-1}),
  // where Phi keeps the lower triangle and halves the diagonal.
  Mat p = l.transpose() * d_l;
  Mat phi = p.triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;

  Mat tmp = l.transpose()
                .triangularView<Eigen::Upper>()
                .solve(phi);                       // L^{-T} Phi
  Mat ds = l.transpose()
               .triangularView<Eigen::Upper>()
               .solve(tmp.transpose())
               .transpose();                        // ... L^{-1}
  return sym(ds);
}

void assert_spd(const Mat& m, const std::string& context) {
  const SymEigPair pair = sym_eig(m);
  const double min_eig = pair.lambda(pair.lambda.size() - 1);
  require(min_eig > 0.0, ErrorCode::NotPositiveDefinite,
          context.empty() ? "matrix is not SPD (min eigenvalue <= 0)"
                          : context + ": matrix is not SPD");
}

}  // namespace covpose
