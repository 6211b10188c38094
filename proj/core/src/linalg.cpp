#include "hodgelab/linalg.hpp"

#include <algorithm>
#include <random>

#include <arpack/arpack.hpp>

#include "hodgelab/errors.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

SpMat diag_sparse(const VectorXd& d) {
  SpMat s(d.size(), d.size());
  s.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (int i = 0; i < d.size(); ++i) s.insert(i, i) = d(i);
  s.makeCompressed();
  return s;
}

SpMat diag_sparse(const VectorXcd& d) {
  SpMat s(d.size(), d.size());
  s.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (int i = 0; i < d.size(); ++i) s.insert(i, i) = d(i);
  s.makeCompressed();
  return s;
}

MatrixXcd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  MatrixXcd r(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) r(i, j) = {N(rng), N(rng)};
  return r;
}

EigenResult dense_lowest(const MatrixXcd& K, const MatrixXcd& M, int m) {
  MatrixXcd Kh = 0.5 * (K + K.adjoint()), Mh = 0.5 * (M + M.adjoint());
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXcd> es(Kh, Mh);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::EigenNotConverged, "dense generalized eigensolve failed");
  m = std::min<int>(m, K.rows());
  EigenResult r;
  r.values = es.eigenvalues().head(m);
  r.vectors = es.eigenvectors().leftCols(m);
  r.residuals.resize(m);
  for (int i = 0; i < m; ++i) {
    VectorXcd Mx = Mh * r.vectors.col(i);
    r.residuals(i) = (Kh * r.vectors.col(i) - r.values(i) * Mx).norm() / Mx.norm();
  }
  r.converged = true;
  return r;
}

EigenResult lowest_eigenpairs(const SpMat& K, const SpMat& M, int m, double tol, std::uint64_t seed,
                              int dense_limit) {
  const int n = static_cast<int>(K.rows());
  m = std::min(m, n);
  if (n <= dense_limit || m + 2 >= n) return dense_lowest(MatrixXcd(K), MatrixXcd(M), m);

  // shift below zero by a fraction of the mean eigenvalue so that K - sigma M is
  // definite without letting kernel modes dominate
  double trK = 0, trM = 0;
  for (int k = 0; k < n; ++k) {
    trK += std::abs(K.coeff(k, k));
    trM += std::abs(M.coeff(k, k));
  }
  const double sigma = -std::max(trK / trM, 1e-12) / n;
  SpMat A = K - sigma * M;
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SolverBreakdown, "factorization in eigensolver failed");

  // ARPACK shift-invert mode: OP = (K - sigma M)^{-1} M, B = M
  const int nev = m;
  const int ncv = std::min(n, std::max(2 * nev + 20, nev + 32));
  const int lworkl = 3 * ncv * ncv + 5 * ncv;
  VectorXcd resid = random_matrix(n, 1, seed).col(0);
  std::vector<cd> V(static_cast<size_t>(n) * ncv), workd(3 * static_cast<size_t>(n)), workl(lworkl);
  std::vector<double> rwork(ncv);
  a_int iparam[11] = {0}, ipntr[14] = {0};
  iparam[0] = 1;
  iparam[2] = 3000;
  iparam[6] = 3;
  a_int ido = 0, info = 1;
  const double atol = std::max(tol * 1e-2, 1e-15);
  while (true) {
    arpack::naupd(ido, arpack::bmat::generalized, n, arpack::which::largest_magnitude, nev, atol, resid.data(), ncv,
                  V.data(), n, iparam, ipntr, workd.data(), workl.data(), lworkl, rwork.data(), info);
    Eigen::Map<VectorXcd> x(workd.data() + ipntr[0] - 1, n), y(workd.data() + ipntr[1] - 1, n);
    if (ido == -1) {
      y = ldlt.solve(M * x);
    } else if (ido == 1) {
      Eigen::Map<VectorXcd> bx(workd.data() + ipntr[2] - 1, n);
      y = ldlt.solve(bx);
    } else if (ido == 2) {
      y = M * x;
    } else {
      break;
    }
  }
  if (info < 0) throw Error(ErrorKind::EigenNotConverged, "ARPACK naupd info " + std::to_string(info));
  const bool hit_limit = info == 1;
  std::vector<a_int> select(ncv, 1);
  std::vector<cd> d(nev + 1), Z(static_cast<size_t>(n) * (nev + 1)), workev(2 * ncv);
  a_int einfo = 0;
  arpack::neupd(1, arpack::howmny::ritz_vectors, select.data(), d.data(), Z.data(), n, cd(sigma), workev.data(),
                arpack::bmat::generalized, n, arpack::which::largest_magnitude, nev, atol, resid.data(), ncv, V.data(),
                n, iparam, ipntr, workd.data(), workl.data(), lworkl, rwork.data(), einfo);
  if (einfo != 0) throw Error(ErrorKind::EigenNotConverged, "ARPACK neupd info " + std::to_string(einfo));
  const int nconv = std::min<int>(iparam[4], nev);

  std::vector<int> order(nconv);
  for (int i = 0; i < nconv; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return d[a].real() < d[b].real(); });
  EigenResult res;
  res.values.resize(nconv);
  res.vectors.resize(n, nconv);
  res.residuals.resize(nconv);
  res.iterations = iparam[2];
  double lam_scale = 0;
  for (int i = 0; i < nconv; ++i) lam_scale = std::max(lam_scale, std::abs(d[order[i]].real()));
  bool ok = nconv == nev && !hit_limit;
  for (int i = 0; i < nconv; ++i) {
    res.values(i) = d[order[i]].real();
    VectorXcd z = Eigen::Map<VectorXcd>(Z.data() + static_cast<size_t>(order[i]) * n, n);
    z /= std::sqrt(std::abs(z.dot(M * z)));
    res.vectors.col(i) = z;
    VectorXcd Mx = M * z;
    res.residuals(i) = (K * z - res.values(i) * Mx).norm() / Mx.norm();
    if (res.residuals(i) > tol * std::max(std::abs(res.values(i)), 1e-3 * std::max(lam_scale, 1.0))) ok = false;
  }
  res.converged = ok;
  return res;
}

}  // namespace hl
