#pragma once
#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "hodgelab/calculus.hpp"
#include "hodgelab/harmonic.hpp"

namespace hl {

// Evaluates per-triangle fields of Beltrami weight anywhere in the disk by
// reducing the point into the fundamental polygon.
class EquivariantSampler {
 public:
  explicit EquivariantSampler(std::shared_ptr<const SurfaceMesh> mesh);
  // triangle index of the reduced point and the reducing map (z0 = M(z))
  int locate(cd z, MoebiusTransform& M) const;
  // value of a Beltrami-weight per-triangle field at z
  cd beltrami_at(const Eigen::VectorXcd& per_tri, cd z) const;
  const SurfaceMesh& mesh() const { return *mesh_; }

 private:
  std::shared_ptr<const SurfaceMesh> mesh_;
  std::vector<MoebiusTransform> letters_;
  int nb_ = 48;
  std::vector<std::vector<int>> buckets_;
};

// Coefficient on the disk, extended by zero beyond the truncation radius.
struct BeltramiCoefficient {
  std::function<cd(cd)> fn;
  double sup_norm = 0;
  double trunc_radius = 0.95;
  double equivariance_residual = 0;
  cd operator()(cd z) const { return std::abs(z) < trunc_radius ? fn(z) : cd(0); }
};

BeltramiCoefficient modified_coefficient(const TangentVector& tv, double scale, const Calculus& C,
                                         double trunc_radius = 0.95);
BeltramiCoefficient zero_coefficient();
// constant c on the euclidean ball |z - center| < radius
BeltramiCoefficient constant_coefficient(cd c, cd center, double radius);

struct BeltramiParams {
  int grid = 256;        // cells per side of [-1,1]^2
  int max_iter = 200;
  double tol = 1e-13;    // relative series increment
};

// chi_1 in disk coordinates, normalized to fix -1, -i, 1 (0, 1, inf in the half-plane)
struct MappingGrid {
  int n = 0;
  double h = 0;
  double trunc_radius = 0;
  int iterations = 0;
  double residual = 0;        // max |h - mu (1 + B h)| on the grid
  double last_increment = 0;
  std::vector<double> increments;
  MoebiusTransform normalization;  // applied after z + C[h]
  std::vector<cd> pinned_before, pinned_after;
  Eigen::VectorXcd dbar, del;  // per cell, before normalization
  Eigen::VectorXcd chi;        // per cell, normalized
  std::shared_ptr<const std::vector<cd>> hsupport_z;
  std::shared_ptr<const std::vector<cd>> hsupport_v;

  cd cell_center(int i, int j) const { return cd(-1 + h * (i + 0.5), -1 + h * (j + 0.5)); }
  // normalized chi at any point (direct Cauchy sum)
  cd operator()(cd z) const;
  // normalized d chi / dz by bilinear interpolation
  cd del_at(cd z) const;
  cd dbar_at(cd z) const;
};

MappingGrid solve_beltrami(const BeltramiCoefficient& coeff, const BeltramiParams& p = {});

// samples of the half-plane map Cayley o chi o Cayley^-1 on a rectangle
nlohmann::json half_plane_samples(const MappingGrid& g, int nx, int ny, double x0, double x1, double y0, double y1);
nlohmann::json mapping_header(const MappingGrid& g);

struct DeformedGroup {
  FuchsianGroup group;
  double fit_residual = 0;
  double relator_residual = 0;
  double condition = 0;
};

DeformedGroup deformed_generators(const MappingGrid& map, const FuchsianGroup& g, double max_fit = 1e-2);

enum class DerivativeSlot { dbar_sections, dbar_forms, dbarstar_sections, dbarstar_forms };
DerivativeSlot derivative_slot(const std::string& name);

struct OperatorDerivative {
  TangentVector direction;
  DerivativeSlot which;
  DiscreteOperator op;
};

// first-order variation of the bundle operators along (mu, nu); the coefficient
// bundle is that of nu
OperatorDerivative operator_derivative(const TangentVector& dir, DerivativeSlot which, const Calculus& C);
// the explicit one-parameter family at parameter eps
DiscreteOperator operator_family(const TangentVector& dir, DerivativeSlot which, double eps, const Calculus& C);

}  // namespace hl
