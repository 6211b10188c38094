#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hodgelab/errors.hpp"
#include "hodgelab/surface.hpp"

using namespace hl;

TEST_CASE("bolza group relator and traces") {
  FuchsianGroup g = bolza_group();
  CHECK(g.generators.size() == 4);
  CHECK(g.relator_residual() <= 1e-10);
  for (const auto& x : g.generators) {
    CHECK(x.trace() > 2.0);
    CHECK(x.det_residual() <= 1e-12);
  }
  CHECK_THROWS_AS(make_group(3), Error);
}

TEST_CASE("disk and half-plane conversion is an involution") {
  FuchsianGroup g = bolza_group();
  for (const auto& x : g.generators) {
    MoebiusTransform h = x.to_half_plane();
    CHECK(std::abs(h.a.imag()) + std::abs(h.b.imag()) + std::abs(h.c.imag()) + std::abs(h.d.imag()) < 1e-12);
    CHECK(h.to_disk().distance(x) <= 1e-12);
  }
  MoebiusTransform p = g.generators[0] * (g.generators[1] * g.generators[2]);
  MoebiusTransform q = (g.generators[0] * g.generators[1]) * g.generators[2];
  CHECK(p.distance(q) < 1e-12);
}

TEST_CASE("signed geodesic area matches angle defect") {
  cd a(0.1, 0.2), b(-0.5, 0.3), c(0.2, -0.6);
  auto ang = [](double x, double y, double z) {
    return std::acos((std::cosh(y) * std::cosh(z) - std::cosh(x)) / (std::sinh(y) * std::sinh(z)));
  };
  double A = hyperbolic_distance(b, c), B = hyperbolic_distance(a, c), C = hyperbolic_distance(a, b);
  double defect = std::numbers::pi - ang(A, B, C) - ang(B, A, C) - ang(C, A, B);
  CHECK(std::abs(std::abs(geodesic_triangle_area(a, b, c)) - defect) < 1e-12);
}

TEST_CASE("mesh levels") {
  FuchsianGroup g = bolza_group();
  SurfaceMesh m0 = mesh_fundamental_domain(g, 0);
  CHECK(m0.pairings.size() == 8);
  CHECK(std::abs(m0.hyperbolic_area() - 4 * std::numbers::pi) / (4 * std::numbers::pi) < 0.05);
  CHECK(validate_mesh(m0).pass);

  SurfaceMesh m3 = mesh_fundamental_domain(g, 3);
  ValidationReport r = validate_mesh(m3);
  CHECK(r.pass);
  CHECK(r.pairing_residual <= 1e-9);
  CHECK(r.area_error < 1e-3);
  CHECK(m3.n_vdof == 254);
  CHECK(m3.n_tri() == 8 * 64);
  // Euler characteristic of the quotient
  CHECK(m3.n_vdof - m3.n_edof + m3.n_tri() == -2);

  CHECK_THROWS_AS(mesh_fundamental_domain(g, 9), Error);
}

TEST_CASE("corrupted pairing is named") {
  SurfaceMesh m = mesh_fundamental_domain(bolza_group(), 1);
  m.pairings[3].partner = m.pairings[5].partner;
  ValidationReport r = validate_mesh(m);
  CHECK_FALSE(r.pass);
  REQUIRE(!r.failures.empty());
  CHECK(r.failures[0].find("boundary edge 3") != std::string::npos);
}

TEST_CASE("area convergence of the straight-triangle quadrature") {
  FuchsianGroup g = bolza_group();
  double prev = 0;
  for (int l = 1; l <= 4; ++l) {
    double e = std::abs(mesh_fundamental_domain(g, l).quadrature_area() - 4 * std::numbers::pi);
    if (l > 1) CHECK(prev / e >= 3.0);
    prev = e;
  }
}

TEST_CASE("vertex orbits close up") {
  SurfaceMesh m = mesh_fundamental_domain(bolza_group(), 2);
  double worst = 0;
  for (size_t v = 0; v < m.vertices.size(); ++v)
    worst = std::max(worst, std::abs(m.vmap[v](m.vertices[m.vrep[v]]) - m.vertices[v]));
  CHECK(worst < 1e-8);
  // the eight corners are a single orbit
  for (int k = 1; k <= 8; ++k) CHECK(m.vrep[k] == m.vrep[1]);
  for (size_t e = 0; e < m.edges.size(); ++e) {
    int r = m.erep[e];
    cd a = m.emap[e](m.vertices[m.edges[r][0]]), b = m.emap[e](m.vertices[m.edges[r][1]]);
    cd p = m.vertices[m.edges[e][0]], q = m.vertices[m.edges[e][1]];
    if (m.esign[e] > 0) CHECK(std::abs(a - p) + std::abs(b - q) < 1e-8);
    else CHECK(std::abs(a - q) + std::abs(b - p) < 1e-8);
  }
}
