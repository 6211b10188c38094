#include <doctest.h>

#include <cmath>
#include <map>
#include <tuple>

#include "common.hpp"
#include "hodgelab/errors.hpp"
#include "hodgelab/spectral.hpp"

using namespace hl;

namespace {

const SpectralSummary& spectrum(Coef c, int level, int m) {
  static std::map<std::tuple<int, int, int>, SpectralSummary> cache;
  auto key = std::make_tuple(static_cast<int>(c), level, m);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, eigen_spectrum(surface_laplacian(*testutil::calc(level), c), m)).first;
  return it->second;
}

}  // namespace

TEST_CASE("functions on the trivial bundle have a one-dimensional kernel") {
  const auto& s = spectrum(Coef::trivial, 3, 100);
  CHECK(s.converged);
  CHECK(s.kernel_dim == 1);
  CHECK(s.eigenvalues(0) >= -1e-10);
  for (int k = 1; k < s.count(); ++k) CHECK(s.eigenvalues(k) >= s.eigenvalues(k - 1));
  for (int k = 1; k < s.count(); ++k) CHECK(s.residuals(k) <= 1e-8 * s.eigenvalues(k));
}

TEST_CASE("AdE Laplacian has no kernel for an irreducible rep") {
  const auto& s = spectrum(Coef::AdE, 3, 60);
  CHECK(s.kernel_dim == 0);
  CHECK(s.eigenvalues(0) > 0.1);
}

TEST_CASE("first eigenvalue agrees across levels 3 and 4") {
  double l3 = spectrum(Coef::trivial, 3, 100).eigenvalues(1);
  double l4 = eigen_spectrum(surface_laplacian(*testutil::calc(4), Coef::trivial), 8).eigenvalues(1);
  CHECK(std::abs(l3 - l4) / l4 < 5e-4);
  CHECK(l4 == doctest::Approx(3.8388872588).epsilon(1e-3));
}

TEST_CASE("heat trace samples are decreasing and bounded below by the kernel") {
  const auto& s = spectrum(Coef::trivial, 3, 100);
  REQUIRE(s.heat.size() > 2);
  for (size_t k = 1; k < s.heat.size(); ++k) {
    CHECK(s.heat[k].first > s.heat[k - 1].first);
    CHECK(s.heat[k].second < s.heat[k - 1].second);
    CHECK(s.heat[k].second >= 1.0 - 1e-12);
  }
}

TEST_CASE("log det is stable when the window doubles") {
  for (Coef c : {Coef::trivial, Coef::AdE}) {
    auto a = zeta_logdet(spectrum(c, 3, 60));
    auto b = zeta_logdet(spectrum(c, 3, 120));
    CHECK(std::abs(a.logdet - b.logdet) < b.err);
    CHECK(std::isfinite(b.logdet));
  }
}

TEST_CASE("Weyl law on the upper half of the window") {
  auto ld = zeta_logdet(spectrum(Coef::trivial, 3, 120));
  CHECK(std::abs(ld.weyl_ratio - 1) < 0.1);
}

TEST_CASE("zero eigenvalues do not enter the log det") {
  SpectralSummary s = spectrum(Coef::trivial, 3, 100);
  auto a = zeta_logdet(s);
  s.eigenvalues(0) = 0;
  auto b = zeta_logdet(s);
  CHECK(a.logdet == b.logdet);
}

TEST_CASE("torus log det against the Kronecker limit value") {
  auto r6 = torus_selftest(6);
  CHECK(r6.reference == doctest::Approx(std::log(0.34830)).epsilon(1e-4));
  CHECK(r6.error <= 0.01);
  CHECK(r6.pass);
  auto r5 = torus_selftest(5);
  CHECK(r6.error <= 0.5 * r5.error);
}

TEST_CASE("tiny torus grid refuses to produce a number") {
  auto s = eigen_spectrum(torus_laplacian(1), 4);
  CHECK_THROWS_AS(zeta_logdet(s), Error);
  try {
    zeta_logdet(s);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TailFitUnstable);
  }
}

TEST_CASE("AdE spectrum is invariant under unitary conjugation") {
  auto V = random_unitary_rep(bolza_group(), 2, 0, 11).images[0];
  auto rep = std::make_shared<const UnitaryRep>(testutil::rep7()->conjugated(V));
  Calculus C(testutil::calc(3)->mesh_ptr(), rep);
  auto s = eigen_spectrum(surface_laplacian(C, Coef::AdE), 60);
  const auto& s0 = spectrum(Coef::AdE, 3, 60);
  CHECK((s.eigenvalues - s0.eigenvalues).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("Ricci potential is half the sum of the two log dets") {
  auto rp = ricci_potential_value(*testutil::calc(3), 60, 60);
  CHECK(rp.F - 0.5 * (rp.ade.logdet + rp.zero.logdet) == 0.0);
  CHECK(std::isfinite(rp.F));
  auto rp1 = ricci_potential_value(*testutil::calc(3), 60, 60, Delta0::one_forms);
  CHECK(rp1.zero.logdet == doctest::Approx(2 * rp.zero.logdet));
}
