#pragma once
#include <string>
#include <vector>

#include <json.hpp>

#include "hodgelab/calculus.hpp"

namespace hl {

// K x = lambda M x for the positive Laplace-Beltrami operator on sections
struct LaplaceProblem {
  SpMat K, M;
  std::string label;
  int level = -1;
  double area = 0;
  int euler = 0;
  int rank = 1;
  double h = 0;        // max edge length in the surface metric
  double systole = 0;  // shortest closed geodesic
};

enum class MassScheme { lumped, consistent, blended };
// klein: straight Klein triangles are geodesic, metric integrated by quadrature;
// klein_p2: quadratic elements on the same triangles (nodes from level L+1);
// poincare: straight Poincare triangles with the conformal stiffness
enum class SpectralGeometry { klein_p2, klein, poincare };

LaplaceProblem surface_laplacian(const Calculus& C, Coef c, MassScheme mass = MassScheme::blended,
                                 SpectralGeometry geom = SpectralGeometry::klein_p2);
LaplaceProblem torus_laplacian(int level, MassScheme mass = MassScheme::blended);  // unit square, 2^level cells per side

struct SpectralSummary {
  std::string label;
  int level = -1;
  double area = 0;
  int euler = 0;
  int rank = 1;
  double h = 0;
  double systole = 0;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd residuals;
  bool converged = false;
  int kernel_dim = 0;
  std::vector<std::pair<double, double>> heat;  // (t, sum exp(-lambda t))
  double logdet = 0;
  double err = 0;
  int count() const { return static_cast<int>(eigenvalues.size()); }
};

SpectralSummary eigen_spectrum(const LaplaceProblem& lap, int m);

struct TailParams {
  double t0_factor = 12;      // smallest split time t0_factor / lambda_max
  double geodesic_decay = 55;  // largest split time systole^2 / geodesic_decay
  int min_nonzero = 50;
  double max_condition = 1e8;
};

struct LogDet {
  double logdet = 0;
  double err = 0;
  double t0 = 0;
  // Weyl fit N(lambda) = a lambda + b on the upper half of the window
  double weyl_a = 0, weyl_b = 0, weyl_ratio = 0, fit_condition = 0;
  double err_tail = 0, err_asymptotic = 0, err_geodesic = 0, err_discretization = 0, err_residual = 0;
};

// zeta-regularized log det' via the heat-trace split at t0
LogDet zeta_logdet(const SpectralSummary& s, const TailParams& p = {});

struct ComparisonReport {
  std::string name;
  double value = 0, reference = 0, error = 0, tolerance = 0;
  bool pass = false;
  nlohmann::json details;
};

ComparisonReport torus_selftest(int level = 6, int m = 100);

enum class Delta0 { functions, one_forms };

struct RicciPotential {
  double F = 0, err = 0;
  LogDet ade, zero;
  SpectralSummary ade_summary, zero_summary;
};

RicciPotential ricci_potential_value(const Calculus& C, int m_zero = 100, int m_ade = 200,
                                     Delta0 d0 = Delta0::functions);

nlohmann::json summary_to_json(const SpectralSummary& s);
std::string spectrum_csv(const SpectralSummary& s);

}  // namespace hl
