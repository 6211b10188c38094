#pragma once
// per-triangle matrix helpers shared by the deformation and tensor code
#include <vector>

#include "hodgelab/calculus.hpp"

namespace hl::detail {

// fiber vector <-> n x n matrix for EndE / AdE
inline Eigen::MatrixXcd to_mat(const Eigen::VectorXcd& v, const Eigen::MatrixXcd& E, int n) {
  Eigen::VectorXcd w = E * v;
  return Eigen::Map<const Eigen::MatrixXcd>(w.data(), n, n);
}
inline Eigen::VectorXcd from_mat(const Eigen::MatrixXcd& M, const Eigen::MatrixXcd& E) {
  return E.adjoint() * Eigen::Map<const Eigen::VectorXcd>(M.data(), M.size());
}

// block-diagonal alpha -> [X_t, alpha] per triangle (X_t^* if adjoint_first)
inline SpMat bracket_blocks(const Eigen::VectorXcd& X, bool adjoint_first, Coef c, const Calculus& C) {
  const int nt = C.mesh().n_tri();
  const int r = C.fiber_dim(c);
  SpMat B(nt * r, nt * r);
  if (c != Coef::EndE && c != Coef::AdE) return B;
  const int n = C.rep().n;
  Eigen::MatrixXcd E = C.action(c).embed();
  std::vector<Eigen::Triplet<cd>> tr;
  for (int t = 0; t < nt; ++t) {
    Eigen::MatrixXcd x = to_mat(X.segment(t * r, r), E, n);
    if (adjoint_first) x = x.adjoint().eval();
    for (int j = 0; j < r; ++j) {
      Eigen::MatrixXcd s = to_mat(Eigen::VectorXcd::Unit(r, j), E, n);
      Eigen::VectorXcd col = from_mat(x * s - s * x, E);
      for (int i = 0; i < r; ++i)
        if (std::abs(col(i)) > 0) tr.emplace_back(t * r + i, t * r + j, col(i));
    }
  }
  B.setFromTriplets(tr.begin(), tr.end());
  return B;
}

inline SpMat mul_blocks(const Eigen::VectorXcd& mu, int r, bool conj) {
  Eigen::VectorXcd d(mu.size() * r);
  for (int t = 0; t < mu.size(); ++t) d.segment(t * r, r).setConstant(conj ? std::conj(mu(t)) : mu(t));
  return diag_sparse(d);
}

// Hilbert adjoint of s -> [nu, avg s]: forms back to sections
inline SpMat ad_adjoint(const Eigen::VectorXcd& nu, Coef c, const Calculus& C) {
  SpMat msec_inv = diag_sparse(Eigen::VectorXd(C.mass(kinds::fun(c)).cwiseInverse()));
  SpMat mf = C.mass_matrix(kinds::f01(c));
  return msec_inv * SpMat(C.average(c).A.adjoint()) * bracket_blocks(nu, true, c, C) * mf;
}

}  // namespace hl::detail
