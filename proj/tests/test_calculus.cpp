#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "hodgelab/errors.hpp"

using namespace hl;
using namespace hl::kinds;

TEST_CASE("star eigenvalues and adjoints") {
  auto C = testutil::calc(2);
  DiscreteOperator s01 = C->assemble("star", f01(Coef::EndE));
  DiscreteOperator s10 = C->assemble("star", f10(Coef::EndE));
  CHECK(std::abs(s01.A.coeff(0, 0) - cd(0, 1)) < 1e-15);
  CHECK(std::abs(s10.A.coeff(0, 0) - cd(0, -1)) < 1e-15);
  CHECK((C->adjoint(s01).A + s01.A).norm() < 1e-10);
  DiscreteOperator M = C->assemble("mass", fun(Coef::EndE));
  CHECK((C->adjoint(M).A - M.A).norm() < 1e-10 * M.A.norm());
  CHECK_THROWS_AS(C->assemble("star", fun(Coef::EndE)), Error);
}

TEST_CASE("discrete adjointness for random fields") {
  auto C = testutil::calc(2);
  for (Coef c : {Coef::trivial, Coef::EndE, Coef::AdE, Coef::TX}) {
    DiscreteOperator d = C->assemble("dbar", fun(c));
    DiscreteOperator ds = C->adjoint(d);
    CHECK((C->adjoint(ds).A - d.A).norm() <= 1e-12 * d.A.norm());
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
      Field f = C->random(fun(c), 100 + k), g = C->random(d.cod, 900 + k);
      Field df = C->apply(d, f), dsg = C->apply(ds, g);
      double e = std::abs(C->inner(df, g) - C->inner(f, dsg)) / (C->norm(df) * C->norm(g));
      worst = std::max(worst, e);
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("laplacian kernels") {
  for (int level : {2, 3}) {
    auto C = testutil::calc(level);
    CHECK(C->kernel(C->assemble("laplacian", fun(Coef::trivial))).cols() == 1);
    CHECK(C->kernel(C->assemble("laplacian", fun(Coef::EndE))).cols() == 1);
    CHECK(C->kernel(C->assemble("laplacian", fun(Coef::AdE))).cols() == 0);
    CHECK(C->kernel(C->assemble("laplacian", fun(Coef::TX))).cols() == 0);
  }
}

TEST_CASE("green operator") {
  auto C = testutil::calc(2);
  DiscreteOperator L = C->assemble("laplacian", fun(Coef::trivial));
  Field one{fun(Coef::trivial), Eigen::VectorXcd::Ones(C->size(fun(Coef::trivial)))};
  CHECK(C->norm(C->green_apply(L, one, 0)) < 1e-10);

  // eigenfield scaling
  SpMat M = C->mass_matrix(L.dom);
  EigenResult er = lowest_eigenpairs(M * L.A, M, 3);
  Field e{L.dom, er.vectors.col(2)};
  Field g = C->green_apply(L, e, 0.5);
  Eigen::VectorXcd diff = g.values - e.values / (er.values(2) + 0.5);
  CHECK(diff.norm() / g.values.norm() < 1e-8);

  // lap(G f) = f - P f
  for (Coef c : {Coef::trivial, Coef::EndE, Coef::AdE, Coef::TX}) {
    DiscreteOperator Lc = C->assemble("laplacian", fun(c));
    Field f = C->random(fun(c), 5);
    Field u = C->apply(Lc, C->green_apply(Lc, f, 0));
    const Eigen::MatrixXcd& Z = C->kernel(Lc);
    SpMat Mc = C->mass_matrix(fun(c));
    Eigen::VectorXcd pf = f.values - Z * (Z.adjoint() * (Mc * f.values));
    CHECK((u.values - pf).norm() / pf.norm() < 1e-8);
  }
}

TEST_CASE("primitives") {
  auto C = testutil::calc(2);
  Field nu = C->random(f01(Coef::EndE), 3);
  // identity section: vec(I) at every vertex
  Field id = C->zero(fun(Coef::EndE));
  for (int v = 0; v < C->mesh().n_vdof; ++v) {
    id.values(4 * v) = 1;
    id.values(4 * v + 3) = 1;
  }
  CHECK(C->norm(C->apply_primitive("ad", {nu, id})) < 1e-12);
  Field z = C->zero(f01(Coef::EndE));
  Field q = C->apply_primitive("density_inverse_scale", {C->apply_primitive("trace", {z, z})});
  CHECK(q.values.norm() == 0.0);
  Field w = C->apply_primitive("wedge_integrate", {nu, nu});
  CHECK(std::abs(w.values(0) - C->inner(nu, nu)) < 1e-10 * std::abs(w.values(0)));
  CHECK_THROWS_AS(C->apply_primitive("mul_beltrami", {nu, nu}), Error);
  Field ct = C->apply_primitive("conj_transpose", {C->apply_primitive("conj_transpose", {nu})});
  CHECK((ct.values - nu.values).norm() < 1e-14);
}

TEST_CASE("dbar converges on a smooth bump") {
  // f = z * bump(|z|/R), supported away from the polygon boundary
  const double R = 0.62;
  auto bump = [&](cd z) {
    double s = std::norm(z) / (R * R);
    return s < 1 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
  };
  auto exact = [&](cd z) {
    double s = std::norm(z) / (R * R);
    if (s >= 1) return cd(0);
    // dbar(z b(s)) = z b'(s) ds/dzbar, ds/dzbar = z / R^2
    double b = std::exp(-1.0 / (1.0 - s));
    double db = -b / ((1.0 - s) * (1.0 - s));
    return z * db * z / (R * R);
  };
  double prev = 0;
  for (int level = 3; level <= 5; ++level) {
    auto m = std::make_shared<const SurfaceMesh>(mesh_fundamental_domain(bolza_group(), level));
    Calculus C(m, testutil::rep7());
    Field f = C.zero(fun(Coef::trivial));
    for (size_t v = 0; v < m->vertices.size(); ++v) f.values(m->vdof[v]) = m->vertices[v] * bump(m->vertices[v]);
    Field d = C.apply(C.assemble("dbar", fun(Coef::trivial)), f);
    double err = 0;
    for (int t = 0; t < m->n_tri(); ++t) err += m->area_e[t] * std::norm(d.values(t) - exact(m->centroid[t]));
    err = std::sqrt(err);
    MESSAGE("level ", level, " dbar L2 error ", err);
    if (level > 3) CHECK(prev / err >= 1.8);
    prev = err;
  }
}
