#pragma once
#include <vector>

#include "hodgelab/calculus.hpp"

namespace hl {

struct HarmonicOptions {
  double gap = 1e-4;               // zero-mode threshold relative to the next eigenvalue
  double min_ratio = 100;          // cochain kernels
  double tx_min_gap_ratio = 5;     // quadratic differentials (P2 kernel)
};

struct HarmonicBasis {
  Coef kind = Coef::TX;
  std::vector<Field> elements;  // Beltrami or (0,1)-forms
  Eigen::MatrixXcd gram;
  Eigen::VectorXd eigenvalues;  // lowest eigenvalues of the operator used for the rank decision
  double gap_ratio = 0;
  double laplacian_residual = 0;
  int dim() const { return static_cast<int>(elements.size()); }
};

struct TangentVector {
  Field mu;  // Beltrami
  Field nu;  // EndE or AdE (0,1)-form
};

HarmonicBasis harmonic_basis(Coef kind, const Calculus& C, const HarmonicOptions& opt = {});

// sum_i <f, e_i> e_i ; project_bar uses the conjugate-transposed basis on (1,0)-forms
Field project(const Field& f, const HarmonicBasis& b, const Calculus& C);
Field project_bar(const Field& f, const HarmonicBasis& b, const Calculus& C);

// EndE basis element i expressed as a Field of kind k (EndE <-> AdE embedding)
Field convert_coef(const Field& f, Coef to, const Calculus& C);

struct MappingGrid;
// at = 0: (P_TX mu, P_E nu); otherwise the pulled-back first-order formula
TangentVector kodaira_spencer(const TangentVector& tv, const MappingGrid* chi1, const MappingGrid* chi2,
                              const TangentVector& at, const HarmonicBasis& btx, const HarmonicBasis& be,
                              const Calculus& C);

// lowest eigenvalues of the P2 quadratic-differential operator (for reporting)
Eigen::VectorXd quadratic_differential_spectrum(const Calculus& C, int count);

}  // namespace hl
