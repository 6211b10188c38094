#include "hodgelab/surface.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>

#include "hodgelab/errors.hpp"

namespace hl {

namespace {
const cd I(0, 1);
constexpr double pi = std::numbers::pi;

MoebiusTransform mul(const MoebiusTransform& x, const MoebiusTransform& y) {
  MoebiusTransform r;
  r.a = x.a * y.a + x.b * y.c;
  r.b = x.a * y.b + x.b * y.d;
  r.c = x.c * y.a + x.d * y.c;
  r.d = x.c * y.b + x.d * y.d;
  r.model = x.model;
  return r;
}

// disk -> half-plane: w = i(1+z)/(1-z)
const MoebiusTransform C{I, I, -1.0, 1.0, Model::disk};
const MoebiusTransform Cinv{1.0, -I, 1.0, I, Model::disk};
}  // namespace

MoebiusTransform MoebiusTransform::operator*(const MoebiusTransform& o) const { return mul(*this, o); }

MoebiusTransform MoebiusTransform::inverse() const {
  cd det = a * d - b * c;
  return {d / det, -b / det, -c / det, a / det, model};
}

MoebiusTransform MoebiusTransform::normalized() const {
  cd s = std::sqrt(det());
  MoebiusTransform r{a / s, b / s, c / s, d / s, model};
  // fix the overall sign so the first nonzero entry has nonnegative real part
  cd lead = std::abs(r.a) > 1e-14 ? r.a : r.b;
  if (lead.real() < 0) r = {-r.a, -r.b, -r.c, -r.d, model};
  return r;
}

MoebiusTransform MoebiusTransform::to_half_plane() const {
  if (model == Model::half_plane) return *this;
  MoebiusTransform r = mul(mul(C, *this), Cinv).normalized();
  r.model = Model::half_plane;
  return r;
}

MoebiusTransform MoebiusTransform::to_disk() const {
  if (model == Model::disk) return *this;
  MoebiusTransform r = mul(mul(Cinv, *this), C).normalized();
  r.model = Model::disk;
  return r;
}

double MoebiusTransform::distance(const MoebiusTransform& o) const {
  MoebiusTransform x = normalized(), y = o.normalized();
  auto nrm = [](cd p, cd q, cd r, cd s) {
    return std::sqrt(std::norm(p) + std::norm(q) + std::norm(r) + std::norm(s));
  };
  double dp = nrm(x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d);
  double dm = nrm(x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d);
  return std::min(dp, dm);
}

cd cayley_to_half_plane(cd z) { return I * (1.0 + z) / (1.0 - z); }
cd cayley_to_disk(cd w) { return (w - I) / (w + I); }

MoebiusTransform FuchsianGroup::letter(int l) const {
  const MoebiusTransform& g = generators.at(std::abs(l) - 1);
  return l > 0 ? g : g.inverse();
}

MoebiusTransform FuchsianGroup::word(const Word& w) const {
  MoebiusTransform r;
  r.model = generators.empty() ? Model::disk : generators[0].model;
  for (int l : w) r = r * letter(l);
  return r;
}

double FuchsianGroup::relator_residual() const {
  MoebiusTransform id;
  id.model = generators[0].model;
  return word(relator).distance(id);
}

FuchsianGroup bolza_group() {
  FuchsianGroup g;
  g.genus = 2;
  const double a = 1.0 + std::sqrt(2.0);
  const double b = std::sqrt(2.0 + 2.0 * std::sqrt(2.0));
  for (int k = 0; k < 4; ++k) {
    cd e = std::polar(1.0, k * pi / 4);
    g.generators.push_back({a, b * e, b * std::conj(e), a, Model::disk});
  }
  g.relator = {1, -2, 3, -4, -1, 2, -3, 4};
  return g;
}

FuchsianGroup make_group(int genus) {
  if (genus != 2) throw Error(ErrorKind::UnsupportedGenus, "only genus 2 (Bolza) is provided, got " + std::to_string(genus));
  return bolza_group();
}

double hyperbolic_distance(cd z, cd w) {
  return 2.0 * std::atanh(std::abs(z - w) / std::abs(1.0 - std::conj(z) * w));
}

double geodesic_triangle_area(cd z1, cd z2, cd z3) {
  // move z1 to the origin; tan(A/2) = Im(conj(w2) w3) / (1 - Re(conj(w2) w3))
  cd w2 = (z2 - z1) / (1.0 - std::conj(z1) * z2);
  cd w3 = (z3 - z1) / (1.0 - std::conj(z1) * z3);
  cd p = std::conj(w2) * w3;
  return 2.0 * std::atan2(p.imag(), 1.0 - p.real());
}

namespace {

double density_at(cd z) {
  double s = 1.0 - std::norm(z);
  return 4.0 / (s * s);
}

cd klein_to_poincare(cd k) { return k / (1.0 + std::sqrt(1.0 - std::norm(k))); }

// hyperbolic midpoint of a Klein segment (hyperboloid average)
cd geodesic_midpoint_klein(cd a, cd b) {
  double wa = 1.0 / std::sqrt(1.0 - std::norm(a)), wb = 1.0 / std::sqrt(1.0 - std::norm(b));
  return (wa * a + wb * b) / (wa + wb);
}

}  // namespace

const std::array<TriQuad, 7>& dunavant7() {
  static const std::array<TriQuad, 7> q = [] {
    const double a1 = 0.059715871789770, b1 = 0.470142064105115;
    const double a2 = 0.797426985353087, b2 = 0.101286507323456;
    const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
    return std::array<TriQuad, 7>{TriQuad{1.0 / 3, 1.0 / 3, 1.0 / 3, w0}, TriQuad{a1, b1, b1, w1}, TriQuad{b1, a1, b1, w1},
                             TriQuad{b1, b1, a1, w1}, TriQuad{a2, b2, b2, w2}, TriQuad{b2, a2, b2, w2},
                             TriQuad{b2, b2, a2, w2}};
  }();
  return q;
}


double SurfaceMesh::hyperbolic_area() const {
  double s = 0;
  for (double a : area_h) s += a;
  return s;
}

double SurfaceMesh::quadrature_area() const {
  double s = 0;
  for (int t = 0; t < n_tri(); ++t) {
    const auto& tr = triangles[t];
    cd p0 = vertices[tr[0]], p1 = vertices[tr[1]], p2 = vertices[tr[2]];
    double acc = 0;
    for (const auto& q : dunavant7()) acc += q.w * density_at(q.l1 * p0 + q.l2 * p1 + q.l3 * p2);
    s += acc * area_e[t];
  }
  return s;
}

double SurfaceMesh::max_edge_length() const {
  double h = 0;
  for (const auto& e : edges) h = std::max(h, hyperbolic_distance(vertices[e[0]], vertices[e[1]]));
  return h;
}

SurfaceMesh mesh_fundamental_domain(const FuchsianGroup& g, int level) {
  if (level < 0 || level > 8) throw Error(ErrorKind::LevelOutOfRange, "level " + std::to_string(level) + " not in [0,8]");
  if (g.genus != 2 || g.generators.size() != 4) throw Error(ErrorKind::UnsupportedGenus, "mesh needs the Bolza group");

  SurfaceMesh m;
  m.level = level;
  m.group = g;

  // initial fan in the Klein model; corners at pi/8 + k pi/4
  const double r = std::pow(2.0, -0.25);
  const double rk = 2.0 * r / (1.0 + r * r);
  m.klein.push_back(0.0);
  for (int k = 0; k < 8; ++k) m.klein.push_back(std::polar(rk, pi / 8 + k * pi / 4));
  for (int k = 0; k < 8; ++k) m.triangles.push_back({0, 1 + k, 1 + (k + 1) % 8});

  // boundary edges as (a,b,side); side k lies between corners k-1 and k
  struct BE {
    int a, b, side;
  };
  std::vector<BE> bnd;
  for (int k = 0; k < 8; ++k) bnd.push_back({1 + k, 1 + (k + 1) % 8, (k + 1) % 8});

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      int id = static_cast<int>(m.klein.size());
      m.klein.push_back(geodesic_midpoint_klein(m.klein[a], m.klein[b]));
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> nt;
    nt.reserve(m.triangles.size() * 4);
    for (const auto& t : m.triangles) {
      int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
      nt.push_back({t[0], ab, ca});
      nt.push_back({ab, t[1], bc});
      nt.push_back({ca, bc, t[2]});
      nt.push_back({ab, bc, ca});
    }
    m.triangles = std::move(nt);
    std::vector<BE> nb;
    for (const auto& e : bnd) {
      int mm = midpoint(e.a, e.b);
      nb.push_back({e.a, mm, e.side});
      nb.push_back({mm, e.b, e.side});
    }
    bnd = std::move(nb);
  }

  const int nv = static_cast<int>(m.klein.size());
  m.vertices.resize(nv);
  m.density.resize(nv);
  for (int v = 0; v < nv; ++v) {
    m.vertices[v] = klein_to_poincare(m.klein[v]);
    m.density[v] = density_at(m.vertices[v]);
  }
  for (const auto& e : bnd) {
    m.boundary_edges.push_back({e.a, e.b});
    m.boundary_side.push_back(e.side);
  }

  // per triangle geometry
  const int nt = m.n_tri();
  m.area_e.resize(nt);
  m.area_h.resize(nt);
  m.centroid.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& tr = m.triangles[t];
    cd p0 = m.vertices[tr[0]], p1 = m.vertices[tr[1]], p2 = m.vertices[tr[2]];
    double ae = 0.5 * std::imag(std::conj(p1 - p0) * (p2 - p0));
    if (!(ae > 1e-14)) throw Error(ErrorKind::NonEmbeddedMesh, "triangle " + std::to_string(t) + " has area " + std::to_string(ae));
    m.area_e[t] = ae;
    m.area_h[t] = geodesic_triangle_area(p0, p1, p2);
    m.centroid[t] = (p0 + p1 + p2) / 3.0;
  }

  // boundary vertex lookup
  std::vector<int> bverts;
  for (const auto& e : m.boundary_edges) {
    bverts.push_back(e[0]);
    bverts.push_back(e[1]);
  }
  std::sort(bverts.begin(), bverts.end());
  bverts.erase(std::unique(bverts.begin(), bverts.end()), bverts.end());
  auto find_vertex = [&](cd z) {
    int best = -1;
    double bd = 1e-9;
    for (int v : bverts) {
      double dd = std::abs(m.vertices[v] - z);
      if (dd < bd) {
        bd = dd;
        best = v;
      }
    }
    return best;
  };
  // side s >= 4 is carried to side s-4 by generator s-4
  auto side_letter = [](int s) { return s >= 4 ? (s - 4 + 1) : -(s + 1); };

  // edge pairings
  const int nb = static_cast<int>(m.boundary_edges.size());
  for (int i = 0; i < nb; ++i) {
    int s = m.boundary_side[i];
    Word w{side_letter(s)};
    MoebiusTransform gm = g.word(w);
    int a = find_vertex(gm(m.vertices[m.boundary_edges[i][0]]));
    int b = find_vertex(gm(m.vertices[m.boundary_edges[i][1]]));
    int partner = -1;
    for (int j = 0; j < nb; ++j)
      if (m.boundary_edges[j][0] == b && m.boundary_edges[j][1] == a) partner = j;
    if (partner < 0) throw Error(ErrorKind::NonEmbeddedMesh, "boundary edge " + std::to_string(i) + " has no partner");
    m.pairings.push_back({i, partner, w});
  }

  // vertex orbits by breadth-first search over the side maps
  std::vector<std::vector<std::pair<int, int>>> links(nv);  // (target, letter)
  for (int i = 0; i < nb; ++i) {
    int s = m.boundary_side[i];
    int l = side_letter(s);
    MoebiusTransform gm = g.letter(l);
    for (int v : m.boundary_edges[i]) {
      int w = find_vertex(gm(m.vertices[v]));
      links[v].push_back({w, l});
      links[w].push_back({v, -l});
    }
  }
  m.vrep.assign(nv, -1);
  m.vword.assign(nv, {});
  m.vdof.assign(nv, -1);
  for (int v = 0; v < nv; ++v) {
    if (m.vrep[v] >= 0) continue;
    m.vrep[v] = v;
    m.vdof[v] = m.n_vdof;
    std::queue<int> q;
    q.push(v);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (auto [w, l] : links[u]) {
        if (m.vrep[w] >= 0) continue;
        m.vrep[w] = v;
        m.vdof[w] = m.n_vdof;
        Word ww{l};
        ww.insert(ww.end(), m.vword[u].begin(), m.vword[u].end());
        m.vword[w] = ww;
        q.push(w);
      }
    }
    ++m.n_vdof;
  }
  m.vmap.resize(nv);
  for (int v = 0; v < nv; ++v) m.vmap[v] = g.word(m.vword[v]);

  // unique edges
  std::map<std::pair<int, int>, int> eidx;
  m.tri_edges.resize(nt);
  m.tri_edge_sign.resize(nt);
  for (int t = 0; t < nt; ++t) {
    for (int i = 0; i < 3; ++i) {
      int a = m.triangles[t][(i + 1) % 3], b = m.triangles[t][(i + 2) % 3];
      auto key = std::minmax(a, b);
      auto it = eidx.find(key);
      int e;
      if (it == eidx.end()) {
        e = static_cast<int>(m.edges.size());
        m.edges.push_back({key.first, key.second});
        eidx.emplace(key, e);
      } else {
        e = it->second;
      }
      m.tri_edges[t][i] = e;
      m.tri_edge_sign[t][i] = a < b ? 1 : -1;
    }
  }
  const int ne = static_cast<int>(m.edges.size());
  m.erep.resize(ne);
  m.eword.assign(ne, {});
  m.esign.assign(ne, 1);
  for (int e = 0; e < ne; ++e) m.erep[e] = e;
  for (int i = 0; i < nb; ++i) {
    int s = m.boundary_side[i];
    if (s < 4) continue;
    // this edge is the image of its partner under the inverse side map
    const auto& be = m.boundary_edges[i];
    const auto& pe = m.boundary_edges[m.pairings[i].partner];
    int e = eidx.at(std::minmax(be[0], be[1]));
    int r = eidx.at(std::minmax(pe[0], pe[1]));
    Word w{-side_letter(s)};
    MoebiusTransform gm = g.word(w);
    int c = find_vertex(gm(m.vertices[m.edges[r][0]]));
    int d = find_vertex(gm(m.vertices[m.edges[r][1]]));
    m.erep[e] = r;
    m.eword[e] = w;
    m.esign[e] = (c == m.edges[e][0] && d == m.edges[e][1]) ? 1 : -1;
  }
  m.edof.assign(ne, -1);
  for (int e = 0; e < ne; ++e)
    if (m.erep[e] == e) m.edof[e] = m.n_edof++;
  for (int e = 0; e < ne; ++e) m.edof[e] = m.edof[m.erep[e]];
  m.emap.resize(ne);
  for (int e = 0; e < ne; ++e) m.emap[e] = g.word(m.eword[e]);
  return m;
}

ValidationReport validate_mesh(const SurfaceMesh& m, double area_tol, double pairing_tol) {
  ValidationReport rep;
  if (area_tol < 0) area_tol = m.level == 0 ? 0.05 : (m.level < 3 ? 0.01 : 1e-3);
  const double target = 4.0 * pi * (m.group.genus - 1);
  rep.area = m.hyperbolic_area();
  rep.area_error = std::abs(rep.area - target) / target;
  if (rep.area_error > area_tol) {
    rep.pass = false;
    rep.failures.push_back("area error " + std::to_string(rep.area_error));
  }
  const int nb = static_cast<int>(m.boundary_edges.size());
  for (const auto& p : m.pairings) {
    if (p.edge < 0 || p.edge >= nb || p.partner < 0 || p.partner >= nb) {
      rep.pass = false;
      rep.failures.push_back("pairing of boundary edge " + std::to_string(p.edge) + " out of range");
      rep.pairing_residual = INFINITY;
      continue;
    }
    MoebiusTransform gm = m.group.word(p.word);
    const auto& e = m.boundary_edges[p.edge];
    const auto& q = m.boundary_edges[p.partner];
    double res = std::max(std::abs(gm(m.vertices[e[0]]) - m.vertices[q[1]]),
                          std::abs(gm(m.vertices[e[1]]) - m.vertices[q[0]]));
    rep.pairing_residual = std::max(rep.pairing_residual, res);
    if (!(res <= pairing_tol)) {
      rep.pass = false;
      rep.failures.push_back("boundary edge " + std::to_string(p.edge) + " pairing residual " + std::to_string(res));
    }
  }
  rep.min_quality = 1.0;
  for (int t = 0; t < m.n_tri(); ++t) {
    const auto& tr = m.triangles[t];
    double s = 0;
    for (int i = 0; i < 3; ++i) s += std::norm(m.vertices[tr[i]] - m.vertices[tr[(i + 1) % 3]]);
    rep.min_quality = std::min(rep.min_quality, 4.0 * std::sqrt(3.0) * m.area_e[t] / s);
  }
  if (rep.min_quality < 0.05) {
    rep.pass = false;
    rep.failures.push_back("triangle quality " + std::to_string(rep.min_quality));
  }
  return rep;
}

nlohmann::json mesh_to_json(const SurfaceMesh& m) {
  using nlohmann::json;
  json j;
  j["level"] = m.level;
  json vs = json::array();
  for (cd z : m.vertices) vs.push_back({z.real(), z.imag()});
  j["vertices"] = vs;
  json ts = json::array();
  for (const auto& t : m.triangles) ts.push_back({t[0], t[1], t[2]});
  j["triangles"] = ts;
  json be = json::array();
  for (size_t i = 0; i < m.boundary_edges.size(); ++i)
    be.push_back({m.boundary_edges[i][0], m.boundary_edges[i][1], m.boundary_side[i]});
  j["boundary_edges"] = be;
  json ps = json::array();
  for (const auto& p : m.pairings) ps.push_back({{"edge", p.edge}, {"partner", p.partner}, {"word", p.word}});
  j["pairings"] = ps;
  j["density"] = m.density;
  return j;
}

SurfaceMesh mesh_from_json(const nlohmann::json& j) {
  // topology is regenerated from the level, then stored data are checked against it
  SurfaceMesh m = mesh_fundamental_domain(bolza_group(), j.at("level").get<int>());
  const auto& vs = j.at("vertices");
  if (vs.size() != m.vertices.size()) throw Error(ErrorKind::NonEmbeddedMesh, "vertex count mismatch");
  for (size_t i = 0; i < vs.size(); ++i) m.vertices[i] = cd(vs[i][0].get<double>(), vs[i][1].get<double>());
  m.pairings.clear();
  for (const auto& p : j.at("pairings"))
    m.pairings.push_back({p.at("edge").get<int>(), p.at("partner").get<int>(), p.at("word").get<Word>()});
  return m;
}

}  // namespace hl
