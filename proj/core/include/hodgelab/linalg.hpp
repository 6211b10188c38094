#pragma once
#include <complex>
#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace hl {

using cd = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cd>;

struct EigenResult {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXcd vectors;  // M-orthonormal columns
  Eigen::VectorXd residuals; // |Kx - lambda Mx| / |Mx|
  bool converged = false;
  int iterations = 0;
};

// smallest m eigenpairs of K x = lambda M x, K Hermitian PSD, M Hermitian PD.
// Block Lanczos on (K - sigma M)^{-1} M with full reorthogonalization;
// dense solve when the problem is small.
EigenResult lowest_eigenpairs(const SpMat& K, const SpMat& M, int m, double tol = 1e-10,
                              std::uint64_t seed = 1, int dense_limit = 700);

EigenResult dense_lowest(const Eigen::MatrixXcd& K, const Eigen::MatrixXcd& M, int m);

SpMat diag_sparse(const Eigen::VectorXd& d);
SpMat diag_sparse(const Eigen::VectorXcd& d);

// deterministic complex Gaussian vectors
Eigen::MatrixXcd random_matrix(int rows, int cols, std::uint64_t seed);

}  // namespace hl
