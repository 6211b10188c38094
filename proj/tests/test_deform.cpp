#include <doctest.h>

#include "common.hpp"
#include "hodgelab/deform.hpp"
#include "hodgelab/errors.hpp"

using namespace hl;

namespace {
const HarmonicBasis& tx3() {
  static HarmonicBasis b = harmonic_basis(Coef::TX, *testutil::calc(3));
  return b;
}
const HarmonicBasis& ende3() {
  static HarmonicBasis b = harmonic_basis(Coef::EndE, *testutil::calc(3));
  return b;
}
TangentVector mu_direction() {
  return {tx3().elements[0], testutil::calc(3)->zero(kinds::f01(Coef::EndE))};
}
}  // namespace

TEST_CASE("modified coefficient") {
  const Calculus& C = *testutil::calc(3);
  TangentVector tv = mu_direction();
  cd z(0.21, -0.13);
  BeltramiCoefficient a = modified_coefficient(tv, 0.1, C);
  MoebiusTransform M;
  EquivariantSampler S(C.mesh_ptr());
  int t = S.locate(z, M);
  CHECK(std::abs(a(z) - 0.1 * tv.mu.values(t)) < 1e-15);
  CHECK(a.equivariance_residual < 1e-7);

  TangentVector tn{C.zero(kinds::beltrami), ende3().elements[1]};
  BeltramiCoefficient b1 = modified_coefficient(tn, 0.1, C), b2 = modified_coefficient(tn, 0.2, C);
  CHECK(b1.sup_norm > 0);
  CHECK(std::abs(b2.sup_norm / b1.sup_norm - 4.0) < 1e-10);
  CHECK(std::abs(b2(z) - 4.0 * b1(z)) < 1e-12);

  CHECK_THROWS_AS(modified_coefficient(tv, 10.0, C), Error);
}

TEST_CASE("solver: zero coefficient is the identity") {
  MappingGrid g = solve_beltrami(zero_coefficient(), {64});
  for (cd z : {cd(0.3, 0.2), cd(-0.7, 0.1), cd(0, -0.5)}) CHECK(std::abs(g(z) - z) < 1e-12);
  DeformedGroup d = deformed_generators(g, bolza_group());
  for (int k = 0; k < 4; ++k) CHECK(d.group.generators[k].distance(bolza_group().generators[k]) < 1e-8);
}

TEST_CASE("solver: constant coefficient on a ball is affine inside") {
  const cd c(0.06, 0.08);
  MappingGrid g = solve_beltrami(constant_coefficient(c, 0, 0.5), {128});
  CHECK(g.residual < 1e-6);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(g.pinned_after[k] - (k == 0 ? cd(-1) : k == 1 ? cd(0, -1) : cd(1))) < 1e-8);
  for (cd z : {cd(0, 0), cd(0.1, 0.05), cd(-0.2, 0.1)}) CHECK(std::abs(g.dbar_at(z) / g.del_at(z) - c) < 1e-6);
}

TEST_CASE("solver: coefficient close to one stalls") {
  BeltramiParams p;
  p.grid = 64;
  p.max_iter = 40;
  CHECK_THROWS_AS(solve_beltrami(constant_coefficient(0.99, 0, 0.8), p), Error);
  try {
    solve_beltrami(constant_coefficient(0.99, 0, 0.8), p);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SeriesDiverged);
  }
}

TEST_CASE("deformed group: first-order scaling of the relator residual") {
  const Calculus& C = *testutil::calc(3);
  TangentVector tv = mu_direction();
  double r[2], pert[2];
  int k = 0;
  for (double eps : {0.02, 0.01}) {
    MappingGrid g = solve_beltrami(modified_coefficient(tv, eps, C), {128});
    DeformedGroup d = deformed_generators(g, bolza_group());
    r[k] = d.relator_residual;
    pert[k] = d.group.generators[0].distance(bolza_group().generators[0]);
    ++k;
  }
  CHECK(r[0] / r[1] == doctest::Approx(2.0).epsilon(0.2));
  CHECK(pert[0] / pert[1] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("deformed group: corrupted coefficient is not conjugate to a group") {
  BeltramiCoefficient bad;
  bad.fn = [](cd z) { return 0.4 * std::sin(30.0 * z.real()) * (z.imag() > 0 ? 1.0 : -1.0); };
  bad.trunc_radius = 0.95;
  MappingGrid g = solve_beltrami(bad, {128});
  CHECK_THROWS_AS(deformed_generators(g, bolza_group(), 1e-3), Error);
}

TEST_CASE("operator derivatives") {
  const Calculus& C = *testutil::calc(3);
  TangentVector dn{C.zero(kinds::beltrami), ende3().elements[2]};
  // ad kills scalars
  Field one = C.zero(kinds::fun(Coef::EndE));
  for (int v = 0; v < C.mesh().n_vdof; ++v) {
    one.values(4 * v) = 1;
    one.values(4 * v + 3) = 1;
  }
  OperatorDerivative L = operator_derivative(dn, DerivativeSlot::dbar_sections, C);
  CHECK(C.apply(L.op, one).values.norm() < 1e-12);
  CHECK(operator_derivative(dn, DerivativeSlot::dbar_forms, C).op.A.nonZeros() == 0);

  const double eps = 1e-4;
  for (const TangentVector& dir : {mu_direction(), dn})
    for (DerivativeSlot s : {DerivativeSlot::dbar_sections, DerivativeSlot::dbarstar_forms}) {
      OperatorDerivative D = operator_derivative(dir, s, C);
      DiscreteOperator fp = operator_family(dir, s, eps, C), fm = operator_family(dir, s, -eps, C);
      Field f = C.random(D.op.dom, 5);
      Eigen::VectorXcd fd = (fp.A * f.values - fm.A * f.values) / (2 * eps);
      Eigen::VectorXcd ex = D.op.A * f.values;
      CHECK((fd - ex).norm() <= 1e-6 * ex.norm());
    }
}

TEST_CASE("Kodaira-Spencer at the origin") {
  const Calculus& C = *testutil::calc(3);
  TangentVector tv{tx3().elements[1], ende3().elements[0]};
  TangentVector zero{C.zero(kinds::beltrami), C.zero(kinds::f01(Coef::EndE))};
  TangentVector ks = kodaira_spencer(tv, nullptr, nullptr, zero, tx3(), ende3(), C);
  CHECK(C.norm(Field{ks.mu.kind, ks.mu.values - tv.mu.values}) < 1e-8);
  CHECK(C.norm(Field{ks.nu.kind, ks.nu.values - tv.nu.values}) < 1e-8);

  Field a = C.random(kinds::fun(Coef::EndE), 3);
  TangentVector shifted = tv;
  shifted.nu.values += C.apply(C.assemble("dbar", kinds::fun(Coef::EndE)), a).values;
  ks = kodaira_spencer(shifted, nullptr, nullptr, zero, tx3(), ende3(), C);
  CHECK(C.norm(Field{ks.nu.kind, ks.nu.values - tv.nu.values}) < 1e-7);

  TangentVector at{C.zero(kinds::beltrami), ende3().elements[1]};
  at.nu.values *= 0.01;
  CHECK_THROWS_AS(kodaira_spencer(tv, nullptr, nullptr, at, tx3(), ende3(), C), Error);
}

TEST_CASE("Kodaira-Spencer near the origin is second order in the bundle direction") {
  const Calculus& C = *testutil::calc(3);
  TangentVector tv{tx3().elements[0], C.zero(kinds::f01(Coef::EndE))};
  double dev[2];
  int k = 0;
  for (double eps : {0.2, 0.1}) {
    TangentVector at{C.zero(kinds::beltrami), ende3().elements[1]};
    at.nu.values *= eps;
    MappingGrid chi = solve_beltrami(modified_coefficient(at, 1.0, C), {128});
    TangentVector ks = kodaira_spencer(tv, &chi, nullptr, at, tx3(), ende3(), C);
    dev[k++] = C.norm(Field{ks.mu.kind, ks.mu.values - tv.mu.values});
  }
  CHECK(dev[0] / dev[1] > 3.0);
}
