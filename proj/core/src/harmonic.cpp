#include "hodgelab/harmonic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hodgelab/errors.hpp"
#include "p2.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Trip = Eigen::Triplet<cd>;

namespace {
const cd I(0, 1);

// twisted simplicial cochains on the quotient
struct Cochains {
  SpMat d0, d1, Pa, Pb;  // Pa, Pb: cochain -> per-triangle dx and dy coefficients
  int r = 1;
};

Cochains build_cochains(const Calculus& C, Coef c) {
  const SurfaceMesh& m = C.mesh();
  HolonomyAction act = C.action(c);
  const int r = act.fiber_dim();
  const auto& Tv = C.transports(c);
  const int ne = static_cast<int>(m.edges.size());
  std::vector<MatrixXcd> Te(ne);
  for (int e = 0; e < ne; ++e)
    Te[e] = c == Coef::trivial ? MatrixXcd::Identity(1, 1) : act.holonomy(m.eword[e]);

  auto put = [&](std::vector<Trip>& tr, int row, int col, const MatrixXcd& B, cd s) {
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b)
        if (B(a, b) != 0.0) tr.emplace_back(row * r + a, col * r + b, s * B(a, b));
  };
  Cochains out;
  out.r = r;
  std::vector<Trip> t0, t1, ta, tb;
  for (int e = 0; e < ne; ++e) {
    if (m.erep[e] != e) continue;
    int a = m.edges[e][0], b = m.edges[e][1];
    put(t0, m.edof[e], m.vdof[b], Tv[b], 1.0);
    put(t0, m.edof[e], m.vdof[a], Tv[a], -1.0);
  }
  for (int t = 0; t < m.n_tri(); ++t) {
    for (int i = 0; i < 3; ++i) {
      int e = m.tri_edges[t][i];
      put(t1, t, m.edof[e], Te[e], double(m.tri_edge_sign[t][i] * m.esign[e]));
    }
    const auto& tri = m.triangles[t];
    cd p0 = m.vertices[tri[0]], p1 = m.vertices[tri[1]], p2 = m.vertices[tri[2]];
    cd d1 = p1 - p0, d2 = p2 - p0;
    double det = d1.real() * d2.imag() - d1.imag() * d2.real();
    // c01 along v0->v1 (edge opposite v2), c02 along v0->v2 (minus edge opposite v1)
    int e2 = m.tri_edges[t][2], e1 = m.tri_edges[t][1];
    double s01 = m.tri_edge_sign[t][2] * m.esign[e2];
    double s02 = -m.tri_edge_sign[t][1] * m.esign[e1];
    put(ta, t, m.edof[e2], Te[e2], s01 * d2.imag() / det);
    put(ta, t, m.edof[e1], Te[e1], -s02 * d1.imag() / det);
    put(tb, t, m.edof[e2], Te[e2], -s01 * d2.real() / det);
    put(tb, t, m.edof[e1], Te[e1], s02 * d1.real() / det);
  }
  out.d0.resize(m.n_edof * r, m.n_vdof * r);
  out.d0.setFromTriplets(t0.begin(), t0.end());
  out.d1.resize(m.n_tri() * r, m.n_edof * r);
  out.d1.setFromTriplets(t1.begin(), t1.end());
  out.Pa.resize(m.n_tri() * r, m.n_edof * r);
  out.Pa.setFromTriplets(ta.begin(), ta.end());
  out.Pb.resize(m.n_tri() * r, m.n_edof * r);
  out.Pb.setFromTriplets(tb.begin(), tb.end());
  return out;
}

// rank decision on ascending eigenvalues: largest ratio between consecutive values
int rank_by_gap(const VectorXd& ev, double& ratio, int start = 1) {
  int best = -1;
  ratio = 0;
  for (int k = start; k < ev.size(); ++k) {
    double lo = std::max(std::abs(ev(k - 1)), 1e-300);
    double q = ev(k) / lo;
    if (q > ratio) {
      ratio = q;
      best = k;
    }
  }
  return best;
}

void gram_schmidt(std::vector<Field>& v, const Calculus& C) {
  for (size_t j = 0; j < v.size(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (size_t i = 0; i < j; ++i) v[j].values -= C.inner(v[j], v[i]) * v[i].values;
    v[j].values /= C.norm(v[j]);
  }
}

// remove the image of dbar: nu - dbar G dbar* nu
void remove_exact(Field& nu, const Calculus& C) {
  FormKind sk = kinds::fun(nu.kind.coef);
  DiscreteOperator d = C.assemble("dbar", sk);
  DiscreteOperator lap = C.assemble("laplacian", sk);
  Field a = C.green_apply(lap, C.apply(C.adjoint(d), nu), 0);
  nu.values -= C.apply(d, a).values;
}

MatrixXcd gram_of(const std::vector<Field>& v, const Calculus& C) {
  MatrixXcd G(v.size(), v.size());
  for (size_t i = 0; i < v.size(); ++i)
    for (size_t j = 0; j < v.size(); ++j) G(i, j) = C.inner(v[j], v[i]);
  return G;
}

double coclosed_residual(const std::vector<Field>& v, const Calculus& C) {
  if (v.empty()) return 0;
  DiscreteOperator ds = C.adjoint(C.assemble("dbar", kinds::fun(v[0].kind.coef)));
  double scale = 0;
  for (int k = 0; k < 3; ++k) {
    Field g = C.random(v[0].kind, 77 + k);
    scale = std::max(scale, C.norm(C.apply(ds, g)) / C.norm(g));
  }
  double worst = 0;
  for (const auto& f : v) worst = std::max(worst, C.norm(C.apply(ds, f)) / (scale * C.norm(f)));
  return worst;
}

HarmonicBasis cochain_basis(Coef c, const Calculus& C, const HarmonicOptions& opt) {
  const SurfaceMesh& m = C.mesh();
  Cochains cc = build_cochains(C, c);
  const int r = cc.r;
  SpMat A = cc.d0 * SpMat(cc.d0.adjoint()) + SpMat(cc.d1.adjoint()) * cc.d1;
  A = 0.5 * (A + SpMat(A.adjoint()));
  SpMat Id(A.rows(), A.cols());
  Id.setIdentity();
  const int want = std::min<int>(2 * r + 2 + 6, A.rows());
  EigenResult er = lowest_eigenpairs(A, Id, want, 1e-10);

  HarmonicBasis hb;
  hb.kind = c;
  hb.eigenvalues = er.values;
  double ratio = 0;
  int d = rank_by_gap(er.values, ratio);
  hb.gap_ratio = ratio;
  if (ratio < opt.min_ratio || er.values(d - 1) > opt.gap * er.values(d))
    throw Error(ErrorKind::GapUndecidable, "cochain kernel gap ratio " + std::to_string(ratio));
  if (d % 2 != 0) throw Error(ErrorKind::GapUndecidable, "odd cochain kernel dimension " + std::to_string(d));

  // coclosed representatives for the per-triangle L2 metric
  VectorXd Ae(m.n_tri() * r);
  for (int t = 0; t < m.n_tri(); ++t) Ae.segment(t * r, r).setConstant(m.area_e[t]);
  SpMat D = diag_sparse(Ae);
  SpMat W = SpMat(cc.Pa.adjoint()) * D * cc.Pa + SpMat(cc.Pb.adjoint()) * D * cc.Pb;
  SpMat L = SpMat(cc.d0.adjoint()) * W * cc.d0;
  L = 0.5 * (L + SpMat(L.adjoint()));
  double tr = 0;
  for (int i = 0; i < L.rows(); ++i) tr += std::abs(L.coeff(i, i));
  SpMat Ls = L + (1e-10 * tr / L.rows()) * SpMat(diag_sparse(VectorXd(VectorXd::Ones(L.rows()))));
  Eigen::SimplicialLDLT<SpMat> ldlt(Ls);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SolverBreakdown, "cotan factorization failed");

  MatrixXcd H = er.vectors.leftCols(d);
  std::vector<VectorXcd> wa(d), wb(d);
  for (int j = 0; j < d; ++j) {
    VectorXcd h = H.col(j);
    VectorXcd rhs = cc.d0.adjoint() * (W * h);
    VectorXcd s = ldlt.solve(rhs);
    for (int it = 0; it < 10; ++it) s += ldlt.solve(rhs - L * s);
    h -= cc.d0 * s;
    wa[j] = cc.Pa * h;
    wb[j] = cc.Pb * h;
  }
  // (0,1) half: positive eigenspace of -i<*w_j, w_i>, * (a,b) = (-b,a)
  MatrixXcd S(d, d), G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      cd sw = (Ae.cwiseProduct(-wb[j]).dot(wa[i]) + Ae.cwiseProduct(wa[j]).dot(wb[i]));
      // dot(x, y) = x^H y, so swap to get sum A * u * conj(v)
      S(i, j) = -I * std::conj(sw);
      G(i, j) = std::conj(Ae.cwiseProduct(wa[j]).dot(wa[i]) + Ae.cwiseProduct(wb[j]).dot(wb[i]));
    }
  S = 0.5 * (S + S.adjoint()).eval();
  G = 0.5 * (G + G.adjoint()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXcd> es(S, G);
  int npos = 0;
  for (int i = 0; i < d; ++i)
    if (es.eigenvalues()(i) > 0) ++npos;
  if (npos != d / 2) throw Error(ErrorKind::GapUndecidable, "star splitting is not balanced");

  for (int k = 0; k < d / 2; ++k) {
    VectorXcd x = es.eigenvectors().col(d - 1 - k);
    VectorXcd a = VectorXcd::Zero(m.n_tri() * r), b = a;
    for (int j = 0; j < d; ++j) {
      a += x(j) * wa[j];
      b += x(j) * wb[j];
    }
    Field nu{kinds::f01(c), 0.5 * (a + I * b)};
    remove_exact(nu, C);
    hb.elements.push_back(nu);
  }
  gram_schmidt(hb.elements, C);
  hb.gram = gram_of(hb.elements, C);
  hb.laplacian_residual = coclosed_residual(hb.elements, C);
  return hb;
}

// ---- quadratic differentials with isoparametric P2 elements ----

struct P2System {
  std::shared_ptr<const SurfaceMesh> fine;
  std::vector<std::array<int, 6>> nodes;  // fine vertex ids per coarse triangle
  std::vector<cd> fac;                    // automorphy per fine vertex
  SpMat K, M;
};

P2System p2_system(const Calculus& C) {
  const SurfaceMesh& m = C.mesh();
  P2System S;
  S.fine = std::make_shared<const SurfaceMesh>(mesh_fundamental_domain(m.group, m.level + 1));
  const SurfaceMesh& f = *S.fine;
  Calculus Cf(S.fine, C.rep_ptr());
  const auto& T = Cf.transports(Coef::K2);
  S.fac.resize(f.vertices.size());
  for (size_t v = 0; v < f.vertices.size(); ++v) S.fac[v] = T[v](0, 0);
  const int nt = m.n_tri();
  S.nodes.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& a = f.triangles[4 * t];
    const auto& b = f.triangles[4 * t + 1];
    S.nodes[t] = {a[0], b[1], f.triangles[4 * t + 2][2], a[1], b[2], a[2]};
  }
  std::vector<Trip> tk, tm;
  for (int t = 0; t < nt; ++t) {
    const auto& nd = S.nodes[t];
    cd p[6], fc[6];
    int dof[6];
    for (int i = 0; i < 6; ++i) {
      p[i] = f.vertices[nd[i]];
      fc[i] = S.fac[nd[i]];
      dof[i] = f.vdof[nd[i]];
    }
    Eigen::Matrix<cd, 6, 6> Kl = Eigen::Matrix<cd, 6, 6>::Zero(), Ml = Kl;
    for (const auto& q : p2_rule()) {
      double N[6], Ns[6], Nt[6];
      p2_shape(q.s, q.t, N, Ns, Nt);
      cd z = 0, zs = 0, zt = 0;
      for (int i = 0; i < 6; ++i) {
        z += N[i] * p[i];
        zs += Ns[i] * p[i];
        zt += Nt[i] * p[i];
      }
      double det = zs.real() * zt.imag() - zt.real() * zs.imag();
      // inverse transpose of the jacobian applied to (Ns, Nt)
      double j00 = zs.real(), j01 = zt.real(), j10 = zs.imag(), j11 = zt.imag();
      double lam = 4.0 / std::pow(1.0 - std::norm(z), 2);
      Eigen::Matrix<cd, 6, 1> op, nf;
      for (int i = 0; i < 6; ++i) {
        double gx = (j11 * Ns[i] - j10 * Nt[i]) / det;
        double gy = (-j01 * Ns[i] + j00 * Nt[i]) / det;
        cd db = 0.5 * cd(gx, gy);
        op(i) = (db + 2.0 * z / (1.0 - std::norm(z)) * N[i]) * fc[i];
        nf(i) = N[i] * fc[i];
      }
      Kl += op.conjugate() * op.transpose() * (det * q.w);
      Ml += nf.conjugate() * nf.transpose() * (lam * det * q.w);
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        tk.emplace_back(dof[i], dof[j], Kl(i, j));
        tm.emplace_back(dof[i], dof[j], Ml(i, j));
      }
  }
  S.K.resize(f.n_vdof, f.n_vdof);
  S.K.setFromTriplets(tk.begin(), tk.end());
  S.M.resize(f.n_vdof, f.n_vdof);
  S.M.setFromTriplets(tm.begin(), tm.end());
  S.K = 0.5 * (S.K + SpMat(S.K.adjoint()));
  S.M = 0.5 * (S.M + SpMat(S.M.adjoint()));
  return S;
}

HarmonicBasis tx_basis(const Calculus& C, const HarmonicOptions& opt) {
  const SurfaceMesh& m = C.mesh();
  P2System S = p2_system(C);
  EigenResult er = lowest_eigenpairs(S.K, S.M, 6, 1e-9);
  HarmonicBasis hb;
  hb.kind = Coef::TX;
  hb.eigenvalues = er.values;
  double ratio = 0;
  int d = rank_by_gap(er.values, ratio);
  hb.gap_ratio = ratio;
  if (ratio < opt.tx_min_gap_ratio)
    throw Error(ErrorKind::GapUndecidable, "quadratic differential gap ratio " + std::to_string(ratio));
  const SurfaceMesh& f = *S.fine;
  for (int k = 0; k < d; ++k) {
    const VectorXcd& q = er.vectors.col(k);
    Field mu = C.zero(kinds::beltrami);
    for (int t = 0; t < m.n_tri(); ++t) {
      cd p[6], val[6];
      for (int i = 0; i < 6; ++i) {
        p[i] = f.vertices[S.nodes[t][i]];
        val[i] = S.fac[S.nodes[t][i]] * q(f.vdof[S.nodes[t][i]]);
      }
      cd num = 0;
      double den = 0;
      for (const auto& qp : p2_rule()) {
        double N[6], Ns[6], Nt[6];
        p2_shape(qp.s, qp.t, N, Ns, Nt);
        cd z = 0, zs = 0, zt = 0, fv = 0;
        for (int i = 0; i < 6; ++i) {
          z += N[i] * p[i];
          zs += Ns[i] * p[i];
          zt += Nt[i] * p[i];
          fv += N[i] * val[i];
        }
        double det = zs.real() * zt.imag() - zt.real() * zs.imag();
        double w = 4.0 / std::pow(1.0 - std::norm(z), 2) * det * qp.w;
        num += std::conj(fv) * w;
        den += w;
      }
      mu.values(t) = num / den;
    }
    remove_exact(mu, C);
    hb.elements.push_back(mu);
  }
  gram_schmidt(hb.elements, C);
  hb.gram = gram_of(hb.elements, C);
  hb.laplacian_residual = coclosed_residual(hb.elements, C);
  return hb;
}

}  // namespace

VectorXd quadratic_differential_spectrum(const Calculus& C, int count) {
  P2System S = p2_system(C);
  return lowest_eigenpairs(S.K, S.M, count, 1e-9).values;
}

HarmonicBasis harmonic_basis(Coef kind, const Calculus& C, const HarmonicOptions& opt) {
  switch (kind) {
    case Coef::TX: return tx_basis(C, opt);
    case Coef::trivial:
    case Coef::fundamental:
    case Coef::EndE:
    case Coef::AdE: return cochain_basis(kind, C, opt);
    default: throw Error(ErrorKind::KindMismatch, "no harmonic basis for this coefficient bundle");
  }
}

Field project(const Field& f, const HarmonicBasis& b, const Calculus& C) {
  Field out{f.kind, VectorXcd::Zero(f.values.size())};
  for (const auto& e : b.elements) {
    if (!(e.kind == f.kind)) throw Error(ErrorKind::KindMismatch, "project: " + f.kind.name() + " onto " + e.kind.name());
    out.values += C.inner(f, e) * e.values;
  }
  return out;
}

Field project_bar(const Field& f, const HarmonicBasis& b, const Calculus& C) {
  Field out{f.kind, VectorXcd::Zero(f.values.size())};
  for (const auto& e : b.elements) {
    Field eb = C.apply_primitive("conj_transpose", {e});
    if (!(eb.kind == f.kind)) throw Error(ErrorKind::KindMismatch, "project_bar: " + f.kind.name());
    out.values += C.inner(f, eb) * eb.values;
  }
  return out;
}

Field convert_coef(const Field& f, Coef to, const Calculus& C) {
  if (f.kind.coef == to) return f;
  const bool ok = (f.kind.coef == Coef::EndE && to == Coef::AdE) || (f.kind.coef == Coef::AdE && to == Coef::EndE);
  if (!ok) throw Error(ErrorKind::KindMismatch, "convert_coef between " + f.kind.name() + " and other bundle");
  MatrixXcd E = C.action(Coef::AdE).embed();
  const int nn = static_cast<int>(E.rows()), na = static_cast<int>(E.cols());
  const int from = f.kind.coef == Coef::EndE ? nn : na, tod = f.kind.coef == Coef::EndE ? na : nn;
  const int cells = static_cast<int>(f.values.size()) / from;
  Field out{{f.kind.degree, to}, VectorXcd::Zero(cells * tod)};
  for (int i = 0; i < cells; ++i) {
    if (to == Coef::AdE) out.values.segment(i * tod, tod) = E.adjoint() * f.values.segment(i * from, from);
    else out.values.segment(i * tod, tod) = E * f.values.segment(i * from, from);
  }
  return out;
}

}  // namespace hl
