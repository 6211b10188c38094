#pragma once
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "hodgelab/bundle.hpp"
#include "hodgelab/linalg.hpp"
#include "hodgelab/surface.hpp"

namespace hl {

// cell: per-triangle scalar or section values; form02: per-triangle dz̄⊗dz̄ tensors
enum class Degree { function, form10, form01, cell, form02 };
enum class Coef { trivial, fundamental, EndE, AdE, TX, K2 };

struct FormKind {
  Degree degree = Degree::function;
  Coef coef = Coef::trivial;
  bool operator==(const FormKind&) const = default;
  bool is_section() const { return degree == Degree::function; }
  // line bundles in the unitary frame: weight m of K^m (TX = -1, K2 = 2)
  bool weighted() const { return coef == Coef::TX || coef == Coef::K2; }
  std::string name() const;
};

namespace kinds {
inline constexpr FormKind fun(Coef c) { return {Degree::function, c}; }
inline constexpr FormKind f01(Coef c) { return {Degree::form01, c}; }
inline constexpr FormKind f10(Coef c) { return {Degree::form10, c}; }
inline constexpr FormKind cell(Coef c) { return {Degree::cell, c}; }
inline constexpr FormKind f02{Degree::form02, Coef::trivial};
inline constexpr FormKind beltrami{Degree::form01, Coef::TX};
inline constexpr FormKind quadratic{Degree::function, Coef::K2};
}  // namespace kinds

// sections are P1 on the quotient vertices, forms are constant per triangle;
// values are stored dof-major with the fiber index running fastest
struct Field {
  FormKind kind;
  Eigen::VectorXcd values;
};

struct DiscreteOperator {
  SpMat A;
  FormKind dom, cod;
  bool adjoint_flag = false;
  std::string name;
};

nlohmann::json field_to_json(const Field& f);

class Calculus {
 public:
  Calculus(std::shared_ptr<const SurfaceMesh> mesh, std::shared_ptr<const UnitaryRep> rep);

  const SurfaceMesh& mesh() const { return *mesh_; }
  const UnitaryRep& rep() const { return *rep_; }
  std::shared_ptr<const SurfaceMesh> mesh_ptr() const { return mesh_; }
  std::shared_ptr<const UnitaryRep> rep_ptr() const { return rep_; }

  int fiber_dim(Coef c) const;
  int size(FormKind k) const;
  HolonomyAction action(Coef c) const;

  // diagonal masses: sections use lumped exact hyperbolic areas; forms use
  // euclidean areas (chart coefficients) except TX-valued forms, which use
  // hyperbolic areas
  const Eigen::VectorXd& mass(FormKind k) const;
  SpMat mass_matrix(FormKind k) const { return diag_sparse(mass(k)); }

  // per polygon vertex transport r x r: value at v = T_v * value at dof(v)
  const std::vector<Eigen::MatrixXcd>& transports(Coef c) const;

  // which in {dbar, partial, star, mass, laplacian, shifted_laplacian}
  DiscreteOperator assemble(const std::string& which, FormKind kind, double c = 0) const;
  DiscreteOperator adjoint(const DiscreteOperator& op) const;
  DiscreteOperator compose(const DiscreteOperator& a, const DiscreteOperator& b) const;  // a after b
  // P1 section -> per-triangle value at the centroid
  DiscreteOperator average(Coef c) const;

  Field apply(const DiscreteOperator& op, const Field& f) const;
  cd inner(const Field& a, const Field& b) const;  // sum m a conj(b)
  double norm(const Field& a) const { return std::sqrt(std::abs(inner(a, a))); }
  Field zero(FormKind k) const { return {k, Eigen::VectorXcd::Zero(size(k))}; }
  Field random(FormKind k, std::uint64_t seed) const;

  // kernel of a section Laplacian (M-orthonormal columns)
  const Eigen::MatrixXcd& kernel(const DiscreteOperator& lap) const;
  // (lap + shift)^{-1} f, with the kernel projected out when shift = 0
  Field green_apply(const DiscreteOperator& lap, const Field& f, double shift) const;
  double last_green_residual() const { return last_residual_; }

  // pointwise primitives
  Field apply_primitive(const std::string& token, const std::vector<Field>& in) const;

  // geometry helpers per triangle
  double lambda_t(int t) const { return mesh_->area_h[t] / mesh_->area_e[t]; }

 private:
  struct Factor;
  std::shared_ptr<Factor> factor(const DiscreteOperator& lap, double shift) const;
  void check_kind(const Field& f, FormKind k, const char* what) const;

  std::shared_ptr<const SurfaceMesh> mesh_;
  std::shared_ptr<const UnitaryRep> rep_;
  mutable std::map<std::string, Eigen::VectorXd> masses_;
  mutable std::map<int, std::vector<Eigen::MatrixXcd>> transports_;
  mutable std::map<std::string, std::shared_ptr<Factor>> factors_;
  mutable std::map<std::string, Eigen::MatrixXcd> kernels_;
  mutable double last_residual_ = 0;
};

// matrix-market export of an operator
void write_matrix_market(const DiscreteOperator& op, const std::string& path);

// per-triangle matrix helpers for EndE-valued forms (n x n blocks, column-major)
Eigen::MatrixXcd block_matrix(const Eigen::VectorXcd& v, int t, int n);
void set_block(Eigen::VectorXcd& v, int t, const Eigen::MatrixXcd& m);

}  // namespace hl
