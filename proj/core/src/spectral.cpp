#include "hodgelab/spectral.hpp"

#include <boost/math/special_functions/expint.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hodgelab/errors.hpp"
#include "p2.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::VectorXd;
using Trip = Eigen::Triplet<cd>;

namespace {
const double PI = std::numbers::pi;

// local P1 stiffness (conformally invariant) and masses for a triangle with
// euclidean vertices p and surface area a
void local_p1(const cd p[3], double area, MassScheme ms, double K[3][3], double M[3][3]) {
  double ae = 0.5 * std::imag(std::conj(p[1] - p[0]) * (p[2] - p[0]));
  cd g[3];
  for (int i = 0; i < 3; ++i) g[i] = cd(0, 1) * (p[(i + 2) % 3] - p[(i + 1) % 3]) / (2 * ae);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      K[i][j] = ae * std::real(g[i] * std::conj(g[j]));
      double cons = area * (i == j ? 2.0 : 1.0) / 12.0;
      double lump = i == j ? area / 3.0 : 0.0;
      M[i][j] = ms == MassScheme::lumped ? lump : ms == MassScheme::consistent ? cons : 0.5 * (cons + lump);
    }
}
// P1 on a straight Klein triangle (a geodesic triangle) with the exact Klein metric
// g = I/(1-r^2) + x x^T/(1-r^2)^2 integrated by quadrature
void local_klein(const cd p[3], MassScheme ms, double K[3][3], double M[3][3]) {
  double ae = 0.5 * std::imag(std::conj(p[1] - p[0]) * (p[2] - p[0]));
  Eigen::Vector2d g[3];
  for (int i = 0; i < 3; ++i) {
    cd e = cd(0, 1) * (p[(i + 2) % 3] - p[(i + 1) % 3]) / (2 * ae);
    g[i] << e.real(), e.imag();
  }
  double Mc[3][3] = {}, Ml[3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) K[i][j] = 0;
  for (const auto& q : dunavant7()) {
    cd x = q.l1 * p[0] + q.l2 * p[1] + q.l3 * p[2];
    double s = 1 - std::norm(x);
    Eigen::Vector2d xv(x.real(), x.imag());
    Eigen::Matrix2d Ginv = s * (Eigen::Matrix2d::Identity() - xv * xv.transpose());
    double vol = std::pow(s, -1.5) * q.w * ae;
    double l[3] = {q.l1, q.l2, q.l3};
    for (int i = 0; i < 3; ++i) {
      Ml[i] += l[i] * vol;
      for (int j = 0; j < 3; ++j) {
        K[i][j] += g[i].dot(Ginv * g[j]) * vol;
        Mc[i][j] += l[i] * l[j] * vol;
      }
    }
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double lump = i == j ? Ml[i] : 0.0;
      M[i][j] = ms == MassScheme::lumped ? lump : ms == MassScheme::consistent ? Mc[i][j] : 0.5 * (Mc[i][j] + lump);
    }
}
}  // namespace

namespace {
void finish(LaplaceProblem& L, const SurfaceMesh& m, Coef c) {
  L.K = 0.5 * (L.K + SpMat(L.K.adjoint()));
  L.M = 0.5 * (L.M + SpMat(L.M.adjoint()));
  L.label = c == Coef::trivial ? "lap0" : c == Coef::AdE ? "lapAdE" : "lap_" + kinds::fun(c).name();
  L.level = m.level;
  L.area = m.hyperbolic_area();
  L.euler = 2 - 2 * m.group.genus;
  L.h = m.max_edge_length();
  double tr = 1e300;
  for (const auto& g : m.group.generators) tr = std::min(tr, g.trace());
  L.systole = 2 * std::acosh(tr / 2);
}

// quadratic elements on the level-L Klein triangles; the nodes are the vertices
// of the midpoint-refined mesh, so the quotient comes from level L+1
LaplaceProblem p2_laplacian(const Calculus& C, Coef c) {
  const SurfaceMesh& m = C.mesh();
  auto fine = std::make_shared<const SurfaceMesh>(mesh_fundamental_domain(m.group, m.level + 1));
  Calculus Cf(fine, C.rep_ptr());
  const auto& T = Cf.transports(c);
  const int r = Cf.fiber_dim(c);
  const SurfaceMesh& f = *fine;
  std::vector<Trip> tk, tm;
  for (int t = 0; t < m.n_tri(); ++t) {
    const auto& a = f.triangles[4 * t];
    const auto& b = f.triangles[4 * t + 1];
    const int nd[6] = {a[0], b[1], f.triangles[4 * t + 2][2], a[1], b[2], a[2]};
    cd x0 = f.klein[nd[0]], e1 = f.klein[nd[1]] - x0, e2 = f.klein[nd[2]] - x0;
    double det = e1.real() * e2.imag() - e1.imag() * e2.real();
    double Kl[6][6] = {}, Ml[6][6] = {};
    for (const auto& q : p2_rule()) {
      double N[6], Ns[6], Nt[6];
      p2_shape(q.s, q.t, N, Ns, Nt);
      cd x = x0 + q.s * e1 + q.t * e2;
      double sq = 1 - std::norm(x);
      Eigen::Vector2d xv(x.real(), x.imag());
      Eigen::Matrix2d Ginv = sq * (Eigen::Matrix2d::Identity() - xv * xv.transpose());
      double vol = std::pow(sq, -1.5) * det * q.w;
      Eigen::Vector2d g[6];
      for (int i = 0; i < 6; ++i)
        g[i] << (e2.imag() * Ns[i] - e1.imag() * Nt[i]) / det, (-e2.real() * Ns[i] + e1.real() * Nt[i]) / det;
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          Kl[i][j] += g[i].dot(Ginv * g[j]) * vol;
          Ml[i][j] += N[i] * N[j] * vol;
        }
    }
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        MatrixXcd B = T[nd[i]].adjoint() * T[nd[j]];
        int di = f.vdof[nd[i]] * r, dj = f.vdof[nd[j]] * r;
        for (int p = 0; p < r; ++p)
          for (int q = 0; q < r; ++q)
            if (B(p, q) != 0.0) {
              tk.emplace_back(di + p, dj + q, Kl[i][j] * B(p, q));
              tm.emplace_back(di + p, dj + q, Ml[i][j] * B(p, q));
            }
      }
  }
  LaplaceProblem L;
  L.K.resize(f.n_vdof * r, f.n_vdof * r);
  L.K.setFromTriplets(tk.begin(), tk.end());
  L.M.resize(f.n_vdof * r, f.n_vdof * r);
  L.M.setFromTriplets(tm.begin(), tm.end());
  L.rank = r;
  finish(L, m, c);
  return L;
}
}  // namespace

LaplaceProblem surface_laplacian(const Calculus& C, Coef c, MassScheme ms, SpectralGeometry geom) {
  if (c == Coef::TX || c == Coef::K2) throw Error(ErrorKind::KindMismatch, "spectral Laplacians are for flat bundles");
  if (geom == SpectralGeometry::klein_p2) return p2_laplacian(C, c);
  const SurfaceMesh& m = C.mesh();
  const auto& T = C.transports(c);
  const int r = C.fiber_dim(c);
  std::vector<Trip> tk, tm;
  for (int t = 0; t < m.n_tri(); ++t) {
    const auto& tri = m.triangles[t];
    double K[3][3], M[3][3];
    if (geom == SpectralGeometry::klein) {
      cd p[3] = {m.klein[tri[0]], m.klein[tri[1]], m.klein[tri[2]]};
      local_klein(p, ms, K, M);
    } else {
      cd p[3] = {m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]};
      local_p1(p, m.area_h[t], ms, K, M);
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        MatrixXcd B = T[tri[i]].adjoint() * T[tri[j]];
        int di = m.vdof[tri[i]] * r, dj = m.vdof[tri[j]] * r;
        for (int a = 0; a < r; ++a)
          for (int b = 0; b < r; ++b) {
            if (K[i][j] != 0) tk.emplace_back(di + a, dj + b, K[i][j] * B(a, b));
            if (M[i][j] != 0) tm.emplace_back(di + a, dj + b, M[i][j] * B(a, b));
          }
      }
  }
  LaplaceProblem L;
  L.K.resize(m.n_vdof * r, m.n_vdof * r);
  L.K.setFromTriplets(tk.begin(), tk.end());
  L.M.resize(m.n_vdof * r, m.n_vdof * r);
  L.M.setFromTriplets(tm.begin(), tm.end());
  L.rank = r;
  finish(L, m, c);
  return L;
}

LaplaceProblem torus_laplacian(int level, MassScheme ms) {
  if (level < 1 || level > 9) throw Error(ErrorKind::LevelOutOfRange, "torus level must be in [1,9]");
  const int n = 1 << level;
  const double h = 1.0 / n;
  auto id = [&](int i, int j) { return ((j + n) % n) * n + (i + n) % n; };
  std::vector<Trip> tk, tm;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int quads[2][3][2] = {{{0, 0}, {1, 0}, {1, 1}}, {{0, 0}, {1, 1}, {0, 1}}};
      for (const auto& q : quads) {
        cd p[3];
        int d[3];
        for (int k = 0; k < 3; ++k) {
          p[k] = cd((i + q[k][0]) * h, (j + q[k][1]) * h);
          d[k] = id(i + q[k][0], j + q[k][1]);
        }
        double K[3][3], M[3][3];
        local_p1(p, 0.5 * h * h, ms, K, M);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            if (K[a][b] != 0) tk.emplace_back(d[a], d[b], K[a][b]);
            if (M[a][b] != 0) tm.emplace_back(d[a], d[b], M[a][b]);
          }
      }
    }
  LaplaceProblem L;
  L.K.resize(n * n, n * n);
  L.K.setFromTriplets(tk.begin(), tk.end());
  L.M.resize(n * n, n * n);
  L.M.setFromTriplets(tm.begin(), tm.end());
  L.K.prune(1e-300, 1);
  L.label = "torus";
  L.level = level;
  L.area = 1;
  L.euler = 0;
  L.rank = 1;
  L.h = h;
  L.systole = 1;
  return L;
}

SpectralSummary eigen_spectrum(const LaplaceProblem& lap, int m) {
  const int dof = static_cast<int>(lap.K.rows());
  if (m < 1)
    throw Error(ErrorKind::ConfigError, "eigenvalue count " + std::to_string(m) + " for " + std::to_string(dof) + " dofs");
  m = std::min(m, dof);
  EigenResult er = lowest_eigenpairs(lap.K, lap.M, m, 1e-9);
  SpectralSummary s;
  s.label = lap.label;
  s.level = lap.level;
  s.area = lap.area;
  s.euler = lap.euler;
  s.rank = lap.rank;
  s.h = lap.h;
  s.systole = lap.systole;
  s.eigenvalues = er.values.cwiseMax(0.0);
  s.residuals = er.residuals;
  s.converged = er.converged;
  const double top = std::max(s.eigenvalues.maxCoeff(), 1e-300);
  for (int k = 0; k < s.count(); ++k)
    if (s.eigenvalues(k) < 1e-8 * top) ++s.kernel_dim;
  const double lmax = s.eigenvalues(s.count() - 1);
  for (int k = 0; k < 8; ++k) {
    double t = 12.0 / lmax * std::pow(2.0, k);
    double th = 0;
    for (int i = 0; i < s.count(); ++i) th += std::exp(-s.eigenvalues(i) * t);
    s.heat.emplace_back(t, th);
  }
  if (!er.converged) throw Error(ErrorKind::EigenNotConverged, s.label + ": eigenpairs did not converge");
  return s;
}

LogDet zeta_logdet(const SpectralSummary& s, const TailParams& p) {
  std::vector<double> lam;
  for (int k = 0; k < s.count(); ++k)
    if (s.eigenvalues(k) >= 1e-8 * s.eigenvalues.maxCoeff()) lam.push_back(s.eigenvalues(k));
  const int nz = static_cast<int>(lam.size());
  LogDet out;
  if (nz < p.min_nonzero)
    throw Error(ErrorKind::TailFitUnstable, "only " + std::to_string(nz) + " nonzero eigenvalues (need " +
                                                std::to_string(p.min_nonzero) + ")");
  // Weyl fit on the upper half of the window
  {
    const int i0 = nz / 2;
    Eigen::MatrixXd A(nz - i0, 2);
    Eigen::VectorXd b(nz - i0);
    for (int i = i0; i < nz; ++i) {
      A(i - i0, 0) = lam[i];
      A(i - i0, 1) = 1;
      b(i - i0) = s.kernel_dim + i + 1;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.fit_condition = svd.singularValues()(0) / svd.singularValues()(1);
    if (!(out.fit_condition < p.max_condition))
      throw Error(ErrorKind::TailFitUnstable, "Weyl fit condition " + std::to_string(out.fit_condition));
    Eigen::VectorXd x = svd.solve(b);
    out.weyl_a = x(0);
    out.weyl_b = x(1);
    out.weyl_ratio = out.weyl_a / (s.rank * s.area / (4 * PI));
  }
  const double lmax = lam.back();
  const double t_min = p.t0_factor / lmax, t_geo = s.systole * s.systole / p.geodesic_decay;
  const double t0 = std::max(t_min, t_geo);
  out.t0 = t0;
  const double a0 = s.rank * s.area / (4 * PI);
  const double a1 = s.rank * s.euler / 6.0 - s.kernel_dim;
  const double a2 = s.rank * s.area / (60 * PI) * (s.euler != 0 ? 1.0 : 0.0);
  const double gamma = std::numbers::egamma;
  double sum = 0, disc = 0, res = 0;
  for (int i = 0; i < nz; ++i) {
    sum += boost::math::expint(1, lam[i] * t0);
    disc += std::exp(-lam[i] * t0) * lam[i] * s.h * s.h / 12.0;
  }
  for (int k = 0; k < s.count(); ++k)
    if (s.eigenvalues(k) > 0) res += std::exp(-s.eigenvalues(k) * t0) * s.residuals(k);
  out.logdet = a0 / t0 - a1 * (gamma + std::log(t0)) - a2 * t0 - sum;
  // Weyl tail beyond the window: a0 * int_{lmax}^inf E1(lambda t0) dlambda
  const double x = lmax * t0;
  out.err_tail = a0 / t0 * std::max(std::exp(-x) - x * boost::math::expint(1, x), 0.0);
  out.err_asymptotic = std::abs(a2) * t0 * t0;
  out.err_geodesic = a0 / t0 * std::exp(-s.systole * s.systole / (4 * t0)) * t0;
  out.err_discretization = disc;
  out.err_residual = res;
  out.err = out.err_tail + out.err_asymptotic + out.err_geodesic + out.err_discretization + out.err_residual;
  return out;
}

ComparisonReport torus_selftest(int level, int m) {
  ComparisonReport r;
  r.name = "torus_logdet";
  const double eta = std::tgamma(0.25) / (2 * std::pow(PI, 0.75));
  r.reference = std::log(std::pow(eta, 4));
  r.tolerance = 0.01;
  LaplaceProblem L = torus_laplacian(level);
  SpectralSummary s = eigen_spectrum(L, std::min<int>(m, L.K.rows()));
  LogDet ld = zeta_logdet(s);
  r.value = ld.logdet;
  r.error = std::abs(ld.logdet - r.reference);
  r.pass = r.error <= r.tolerance;
  r.details = {{"level", level},      {"count", s.count()},     {"t0", ld.t0},
               {"err", ld.err},       {"det", std::exp(ld.logdet)}, {"det_reference", std::pow(eta, 4)},
               {"kernel_dim", s.kernel_dim}};
  return r;
}

RicciPotential ricci_potential_value(const Calculus& C, int m_zero, int m_ade, Delta0 d0) {
  RicciPotential rp;
  rp.zero_summary = eigen_spectrum(surface_laplacian(C, Coef::trivial), m_zero);
  rp.ade_summary = eigen_spectrum(surface_laplacian(C, Coef::AdE), m_ade);
  rp.zero = zeta_logdet(rp.zero_summary);
  rp.ade = zeta_logdet(rp.ade_summary);
  if (d0 == Delta0::one_forms) {
    // nonzero 1-form spectrum is two copies of the function spectrum
    rp.zero.logdet *= 2;
    rp.zero.err *= 2;
  }
  rp.F = 0.5 * (rp.ade.logdet + rp.zero.logdet);
  rp.err = 0.5 * (rp.ade.err + rp.zero.err);
  return rp;
}

nlohmann::json summary_to_json(const SpectralSummary& s) {
  nlohmann::json j;
  j["operator"] = s.label;
  j["level"] = s.level;
  j["count"] = s.count();
  j["kernel_dim"] = s.kernel_dim;
  j["area"] = s.area;
  j["converged"] = s.converged;
  std::vector<double> ev(s.eigenvalues.data(), s.eigenvalues.data() + s.count());
  j["eigenvalues"] = ev;
  nlohmann::json heat = nlohmann::json::array();
  for (const auto& [t, th] : s.heat) heat.push_back({t, th});
  j["heat_trace"] = heat;
  j["logdet"] = s.logdet;
  j["err"] = s.err;
  return j;
}

std::string spectrum_csv(const SpectralSummary& s) {
  std::ostringstream o;
  o.precision(17);
  o << "index,eigenvalue,residual\n";
  for (int k = 0; k < s.count(); ++k) o << k << "," << s.eigenvalues(k) << "," << s.residuals(k) << "\n";
  return o.str();
}

}  // namespace hl
