#pragma once
#include <array>
#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

namespace hl {

using cd = std::complex<double>;

enum class Model { disk, half_plane };

// entries are complex so that disk-model SU(1,1) elements are representable;
// half-plane elements have real entries
struct MoebiusTransform {
  cd a{1}, b{0}, c{0}, d{1};
  Model model = Model::disk;

  cd operator()(cd z) const { return (a * z + b) / (c * z + d); }
  cd derivative(cd z) const {
    cd q = c * z + d;
    return (a * d - b * c) / (q * q);
  }
  MoebiusTransform operator*(const MoebiusTransform& o) const;
  MoebiusTransform inverse() const;
  cd det() const { return a * d - b * c; }
  double det_residual() const { return std::abs(det() - 1.0); }
  double trace() const { return std::abs(a + d); }
  MoebiusTransform normalized() const;
  MoebiusTransform to_half_plane() const;
  MoebiusTransform to_disk() const;
  double distance(const MoebiusTransform& o) const;  // min over ± sign
};

// Cayley maps: disk -> upper half-plane and back
cd cayley_to_half_plane(cd z);
cd cayley_to_disk(cd w);

// letters: +k+1 is generator k, -(k+1) its inverse
using Word = std::vector<int>;

struct FuchsianGroup {
  int genus = 2;
  std::vector<MoebiusTransform> generators;
  Word relator;

  MoebiusTransform letter(int l) const;
  MoebiusTransform word(const Word& w) const;
  double relator_residual() const;
};

FuchsianGroup bolza_group();
FuchsianGroup make_group(int genus);  // only genus 2

struct EdgePairing {
  int edge = -1;     // index into boundary_edges
  int partner = -1;  // the stored word maps edge onto partner
  Word word;
};

// 7-point degree-5 rule on the reference triangle (barycentric, weights sum to 1)
struct TriQuad {
  double l1, l2, l3, w;
};
const std::array<TriQuad, 7>& dunavant7();

struct SurfaceMesh {
  int level = 0;
  FuchsianGroup group;
  std::vector<cd> vertices;  // Poincare disk
  std::vector<cd> klein;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<double> density;               // 4/(1-|z|^2)^2 per vertex

  std::vector<std::array<int, 2>> boundary_edges;  // oriented along the boundary
  std::vector<int> boundary_side;                  // octagon side 0..7
  std::vector<EdgePairing> pairings;

  // quotient structure: vertex v sits at vmap[v](vertices[vrep[v]])
  std::vector<int> vrep, vdof;
  std::vector<Word> vword;
  std::vector<MoebiusTransform> vmap;
  int n_vdof = 0;

  // unique undirected edges (a<b); edge e is the image of edge erep[e] under eword[e]
  std::vector<std::array<int, 2>> edges;
  std::vector<int> erep, edof, esign;
  std::vector<Word> eword;
  std::vector<MoebiusTransform> emap;
  int n_edof = 0;
  std::vector<std::array<int, 3>> tri_edges;  // edge opposite to local vertex i
  std::vector<std::array<int, 3>> tri_edge_sign;

  // per triangle: euclidean area, exact geodesic area, centroid
  std::vector<double> area_e, area_h;
  std::vector<cd> centroid;

  double hyperbolic_area() const;
  double quadrature_area() const;  // 7-point rule on straight triangles
  double max_edge_length() const;  // hyperbolic
  int n_tri() const { return static_cast<int>(triangles.size()); }
};

double hyperbolic_distance(cd z, cd w);
double geodesic_triangle_area(cd z1, cd z2, cd z3);

SurfaceMesh mesh_fundamental_domain(const FuchsianGroup& g, int level);

struct ValidationReport {
  bool pass = true;
  double area = 0, area_error = 0;  // relative
  double pairing_residual = 0;
  double min_quality = 0;
  std::vector<std::string> failures;
};

ValidationReport validate_mesh(const SurfaceMesh& m, double area_tol = -1, double pairing_tol = 1e-9);

nlohmann::json mesh_to_json(const SurfaceMesh& m);
SurfaceMesh mesh_from_json(const nlohmann::json& j);

}  // namespace hl
