#include <doctest.h>

#include "hodgelab/bundle.hpp"
#include "hodgelab/errors.hpp"

using namespace hl;

TEST_CASE("random rep satisfies the relator") {
  FuchsianGroup g = bolza_group();
  UnitaryRep r = random_unitary_rep(g, 2, 0, 7);
  RepResiduals res = rep_residuals(r);
  CHECK(res.relator_residual <= 1e-10);
  CHECK(res.unitarity <= 1e-12);
  CHECK(res.irreducibility_margin >= 1e-3);
  CHECK(res.commutant_dim == 1);
  CHECK_THROWS_AS(random_unitary_rep(g, 2, 1, 0), Error);
}

TEST_CASE("rank one and reducible reps") {
  FuchsianGroup g = bolza_group();
  UnitaryRep r1 = random_unitary_rep(g, 1, 0, 3);
  CHECK(std::isinf(rep_residuals(r1).irreducibility_margin));
  CHECK(rep_residuals(trivial_rep(g, 2)).irreducibility_margin < 1e-14);
}

TEST_CASE("conjugation invariance") {
  FuchsianGroup g = bolza_group();
  UnitaryRep r = random_unitary_rep(g, 2, 0, 7);
  UnitaryRep c = r.conjugated(haar_unitary(2, 99));
  RepResiduals a = rep_residuals(r), b = rep_residuals(c);
  CHECK(std::abs(a.relator_residual - b.relator_residual) < 1e-10);
  CHECK(std::abs(a.irreducibility_margin - b.irreducibility_margin) < 1e-10);
}

TEST_CASE("holonomy actions are unitary") {
  FuchsianGroup g = bolza_group();
  UnitaryRep r = random_unitary_rep(g, 2, 0, 7);
  for (ActionKind k : {ActionKind::EndE, ActionKind::AdE}) {
    HolonomyAction h{&r, k};
    Eigen::MatrixXcd a = h.act(r.images[1]);
    CHECK(a.rows() == h.fiber_dim());
    CHECK((a.adjoint() * a - Eigen::MatrixXcd::Identity(a.rows(), a.cols())).norm() < 1e-12);
  }
  // EndE action is U M U*
  HolonomyAction h{&r, ActionKind::EndE};
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Random(2, 2);
  Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(M.data(), 4);
  Eigen::VectorXcd w = h.act(r.images[0]) * v;
  Eigen::MatrixXcd UMU = r.images[0] * M * r.images[0].adjoint();
  CHECK((Eigen::Map<Eigen::MatrixXcd>(w.data(), 2, 2) - UMU).norm() < 1e-12);
}

TEST_CASE("rep json round trip") {
  UnitaryRep r = random_unitary_rep(bolza_group(), 2, 0, 7);
  UnitaryRep s = rep_from_json(rep_to_json(r));
  for (size_t i = 0; i < r.images.size(); ++i) CHECK((r.images[i] - s.images[i]).norm() == 0.0);
}
