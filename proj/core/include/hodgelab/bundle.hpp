#pragma once
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hodgelab/surface.hpp"

namespace hl {

struct UnitaryRep {
  int n = 2;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::MatrixXcd> images;  // images of the group generators
  Word relator;

  Eigen::MatrixXcd letter(int l) const;
  Eigen::MatrixXcd word(const Word& w) const;
  UnitaryRep conjugated(const Eigen::MatrixXcd& V) const;  // V U V*
};

struct RepResiduals {
  double relator_residual = 0;
  double irreducibility_margin = 0;  // +inf for n = 1
  double unitarity = 0;
  int commutant_dim = 0;
};

UnitaryRep random_unitary_rep(const FuchsianGroup& g, int n, int k, std::uint64_t seed,
                              double margin_min = 1e-3, int max_retries = 200);
RepResiduals rep_residuals(const UnitaryRep& r);
UnitaryRep trivial_rep(const FuchsianGroup& g, int n);

Eigen::MatrixXcd haar_unitary(int n, std::uint64_t seed);

enum class ActionKind { trivial, fundamental, EndE, AdE };

// fiber coordinates: EndE uses column-major vec of n x n matrices, AdE uses
// coordinates in an orthonormal trace-free Hermitian basis (embed() columns)
struct HolonomyAction {
  const UnitaryRep* rep = nullptr;
  ActionKind kind = ActionKind::trivial;

  int fiber_dim() const;
  int matrix_size() const;  // n for EndE/AdE, 0 otherwise
  Eigen::MatrixXcd embed() const;
  Eigen::MatrixXcd act(const Eigen::MatrixXcd& U) const;
  Eigen::MatrixXcd holonomy(const Word& w) const { return act(rep ? rep->word(w) : Eigen::MatrixXcd()); }
};

Eigen::MatrixXcd traceless_basis(int n);  // columns: vec of orthonormal Hermitian trace-free matrices
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

nlohmann::json rep_to_json(const UnitaryRep& r);
UnitaryRep rep_from_json(const nlohmann::json& j);

}  // namespace hl
