#include <doctest.h>

#include <map>

#include "common.hpp"
#include "hodgelab/errors.hpp"
#include "hodgelab/harmonic.hpp"

using namespace hl;

namespace {
const HarmonicBasis& basis(Coef c, int level) {
  static std::map<std::pair<int, int>, HarmonicBasis> cache;
  auto key = std::make_pair(int(c), level);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, harmonic_basis(c, *testutil::calc(level))).first;
  return it->second;
}
}  // namespace

TEST_CASE("harmonic dimensions at levels 2 and 3") {
  for (int L : {2, 3}) {
    CAPTURE(L);
    CHECK(basis(Coef::trivial, L).dim() == 2);
    CHECK(basis(Coef::TX, L).dim() == 3);
    CHECK(basis(Coef::EndE, L).dim() == 5);
    CHECK(basis(Coef::AdE, L).dim() == 3);
  }
}

TEST_CASE("harmonic bases are orthonormal") {
  for (Coef c : {Coef::TX, Coef::EndE, Coef::AdE}) {
    const auto& b = basis(c, 3);
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(b.dim(), b.dim());
    CHECK((b.gram - I).norm() < 1e-10);
  }
}

TEST_CASE("projection is idempotent and kills exact forms") {
  const Calculus& C = *testutil::calc(3);
  for (Coef c : {Coef::EndE, Coef::AdE}) {
    const auto& b = basis(c, 3);
    Field f = C.random(kinds::f01(c), 11);
    Field p = project(f, b, C);
    Field pp = project(p, b, C);
    CHECK(C.norm(Field{p.kind, pp.values - p.values}) <= 1e-12 * C.norm(p));

    Field a = C.random(kinds::fun(c), 12);
    Field da = C.apply(C.assemble("dbar", kinds::fun(c)), a);
    CHECK(C.norm(project(da, b, C)) <= 1e-8 * C.norm(da));
  }
  const auto& bt = basis(Coef::TX, 3);
  Field a = C.random(kinds::fun(Coef::TX), 13);
  Field da = C.apply(C.assemble("dbar", kinds::fun(Coef::TX)), a);
  CHECK(C.norm(project(da, bt, C)) <= 1e-8 * C.norm(da));
}

TEST_CASE("hodge decomposition pieces are orthogonal") {
  const Calculus& C = *testutil::calc(3);
  const auto& b = basis(Coef::EndE, 3);
  Field f = C.random(kinds::f01(Coef::EndE), 21);
  Field h = project(f, b, C);
  Field rest{f.kind, f.values - h.values};
  CHECK(std::abs(C.inner(rest, h)) <= 1e-8 * C.norm(f) * C.norm(f));
}

TEST_CASE("EndE harmonic space splits as trace plus trace-free") {
  const Calculus& C = *testutil::calc(3);
  const auto& be = basis(Coef::EndE, 3);
  const auto& ba = basis(Coef::AdE, 3);
  for (const auto& a : ba.elements) {
    Field e = convert_coef(a, Coef::EndE, C);
    Field p = project(e, be, C);
    CHECK(C.norm(Field{e.kind, e.values - p.values}) < 1e-8 * C.norm(e));
  }
  int tracefree = 0;
  for (const auto& e : be.elements) {
    Field a = convert_coef(e, Coef::AdE, C);
    if (C.norm(a) > 0.5) ++tracefree;
  }
  CHECK(tracefree >= 2);
}

TEST_CASE("harmonic forms are coclosed") {
  for (Coef c : {Coef::TX, Coef::EndE, Coef::AdE}) CHECK(basis(c, 3).laplacian_residual < 1e-8);
}

TEST_CASE("projection rejects mismatched kinds") {
  const Calculus& C = *testutil::calc(2);
  Field f = C.random(kinds::f01(Coef::AdE), 3);
  CHECK_THROWS_AS(project(f, basis(Coef::EndE, 2), C), Error);
}
