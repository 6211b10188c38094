#include "hodgelab/deform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "hodgelab/errors.hpp"
#include "blocks.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Trip = Eigen::Triplet<cd>;

namespace {
const double PI = std::numbers::pi;

double sup_abs(const VectorXcd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

using detail::from_mat;
using detail::to_mat;

// maps (r1, r2, r3) to (0, 1, inf)
MoebiusTransform to_01inf(cd r1, cd r2, cd r3) {
  MoebiusTransform m{r2 - r3, -r1 * (r2 - r3), r2 - r1, -r3 * (r2 - r1), Model::disk};
  return m.normalized();
}

// 2D linear convolution with a fixed kernel by zero-padded FFT
class Convolver {
 public:
  Convolver(int n, const std::function<cd(int, int)>& kernel) : n_(n), P_(2 * n) {
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * P_ * P_));
    fwd_ = fftw_plan_dft_2d(P_, P_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(P_, P_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    std::memset(buf_, 0, sizeof(fftw_complex) * P_ * P_);
    for (int dj = -n + 1; dj < n; ++dj)
      for (int di = -n + 1; di < n; ++di) {
        cd k = kernel(di, dj);
        int ii = (di + P_) % P_, jj = (dj + P_) % P_;
        buf_[jj * P_ + ii][0] = k.real();
        buf_[jj * P_ + ii][1] = k.imag();
      }
    fftw_execute(fwd_);
    khat_.resize(P_ * P_);
    for (int k = 0; k < P_ * P_; ++k) khat_[k] = cd(buf_[k][0], buf_[k][1]);
  }
  ~Convolver() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  VectorXcd apply(const VectorXcd& f) {
    std::memset(buf_, 0, sizeof(fftw_complex) * P_ * P_);
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) {
        buf_[j * P_ + i][0] = f(j * n_ + i).real();
        buf_[j * P_ + i][1] = f(j * n_ + i).imag();
      }
    fftw_execute(fwd_);
    for (int k = 0; k < P_ * P_; ++k) {
      cd v = cd(buf_[k][0], buf_[k][1]) * khat_[k];
      buf_[k][0] = v.real();
      buf_[k][1] = v.imag();
    }
    fftw_execute(bwd_);
    const double s = 1.0 / (double(P_) * P_);
    VectorXcd out(n_ * n_);
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < n_; ++i) out(j * n_ + i) = cd(buf_[j * P_ + i][0], buf_[j * P_ + i][1]) * s;
    return out;
  }

 private:
  int n_, P_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
  std::vector<cd> khat_;
};

cd bilinear(const VectorXcd& g, int n, double h, cd z) {
  double x = (z.real() + 1) / h - 0.5, y = (z.imag() + 1) / h - 0.5;
  x = std::clamp(x, 0.0, n - 1.000001);
  y = std::clamp(y, 0.0, n - 1.000001);
  int i = static_cast<int>(x), j = static_cast<int>(y);
  double fx = x - i, fy = y - j;
  return (1 - fx) * (1 - fy) * g(j * n + i) + fx * (1 - fy) * g(j * n + i + 1) + (1 - fx) * fy * g((j + 1) * n + i) +
         fx * fy * g((j + 1) * n + i + 1);
}
}  // namespace

// ---------------- sampler ----------------

EquivariantSampler::EquivariantSampler(std::shared_ptr<const SurfaceMesh> mesh) : mesh_(std::move(mesh)) {
  const int ng = static_cast<int>(mesh_->group.generators.size());
  for (int k = 0; k < ng; ++k) {
    letters_.push_back(mesh_->group.letter(k + 1));
    letters_.push_back(mesh_->group.letter(-(k + 1)));
  }
  buckets_.assign(nb_ * nb_, {});
  auto cell = [&](double x) { return std::clamp(static_cast<int>((x + 1) / 2 * nb_), 0, nb_ - 1); };
  for (int t = 0; t < mesh_->n_tri(); ++t) {
    double x0 = 2, x1 = -2, y0 = 2, y1 = -2;
    for (int v : mesh_->triangles[t]) {
      cd p = mesh_->vertices[v];
      x0 = std::min(x0, p.real());
      x1 = std::max(x1, p.real());
      y0 = std::min(y0, p.imag());
      y1 = std::max(y1, p.imag());
    }
    for (int j = cell(y0); j <= cell(y1); ++j)
      for (int i = cell(x0); i <= cell(x1); ++i) buckets_[j * nb_ + i].push_back(t);
  }
}

int EquivariantSampler::locate(cd z, MoebiusTransform& M) const {
  M = MoebiusTransform{};
  for (int it = 0; it < 500; ++it) {
    int best = -1;
    double r = std::abs(z);
    for (size_t k = 0; k < letters_.size(); ++k) {
      double q = std::abs(letters_[k](z));
      if (q < r - 1e-13) {
        r = q;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) break;
    z = letters_[best](z);
    M = letters_[best] * M;
  }
  auto score = [&](int t) {
    const auto& tr = mesh_->triangles[t];
    cd p0 = mesh_->vertices[tr[0]], p1 = mesh_->vertices[tr[1]], p2 = mesh_->vertices[tr[2]];
    double den = std::imag(std::conj(p1 - p0) * (p2 - p0));
    double l1 = std::imag(std::conj(z - p0) * (p2 - p0)) / den;
    double l2 = std::imag(std::conj(p1 - p0) * (z - p0)) / den;
    double l0 = 1 - l1 - l2;
    return std::min({l0, l1, l2});
  };
  int nb = nb_;
  int i = std::clamp(static_cast<int>((z.real() + 1) / 2 * nb), 0, nb - 1);
  int j = std::clamp(static_cast<int>((z.imag() + 1) / 2 * nb), 0, nb - 1);
  int best = -1;
  double bs = -1e300;
  for (int t : buckets_[j * nb + i]) {
    double s = score(t);
    if (s > bs) {
      bs = s;
      best = t;
    }
  }
  if (best < 0 || bs < -1e-6) {
    // fallback: nearest centroid
    double dmin = 1e300;
    for (int t = 0; t < mesh_->n_tri(); ++t) {
      double d = std::abs(mesh_->centroid[t] - z);
      if (d < dmin) {
        dmin = d;
        best = t;
      }
    }
  }
  return best;
}

cd EquivariantSampler::beltrami_at(const VectorXcd& per_tri, cd z) const {
  MoebiusTransform M;
  int t = locate(z, M);
  cd dm = M.derivative(z);
  return per_tri(t) * std::conj(dm) / dm;
}

// ---------------- coefficients ----------------

BeltramiCoefficient zero_coefficient() {
  BeltramiCoefficient c;
  c.fn = [](cd) { return cd(0); };
  return c;
}

BeltramiCoefficient constant_coefficient(cd value, cd center, double radius) {
  BeltramiCoefficient c;
  c.fn = [=](cd z) { return std::abs(z - center) < radius ? value : cd(0); };
  c.sup_norm = std::abs(value);
  c.trunc_radius = 1.0;
  return c;
}

BeltramiCoefficient modified_coefficient(const TangentVector& tv, double scale, const Calculus& C, double trunc_radius) {
  const int nt = C.mesh().n_tri();
  VectorXcd mu = tv.mu.values.size() ? tv.mu.values : VectorXcd::Zero(nt);
  if (tv.mu.values.size() && !(tv.mu.kind == kinds::beltrami))
    throw Error(ErrorKind::KindMismatch, "modified_coefficient needs a Beltrami differential");
  if (scale * sup_abs(mu) >= 0.5)
    throw Error(ErrorKind::EllipticityViolated, "scale times sup|mu| = " + std::to_string(scale * sup_abs(mu)));
  VectorXcd coef = scale * mu;
  if (tv.nu.values.size() && C.norm(tv.nu) > 0) {
    Field q = C.apply_primitive("density_inverse_scale", {C.apply_primitive("trace", {tv.nu, tv.nu})});
    coef -= 0.5 * scale * scale * q.values;
  }
  BeltramiCoefficient out;
  out.sup_norm = sup_abs(coef);
  if (out.sup_norm >= 1) throw Error(ErrorKind::EllipticityViolated, "coefficient sup-norm " + std::to_string(out.sup_norm));
  out.trunc_radius = trunc_radius;
  auto S = std::make_shared<EquivariantSampler>(C.mesh_ptr());
  auto vals = std::make_shared<VectorXcd>(coef);
  out.fn = [S, vals](cd z) { return S->beltrami_at(*vals, z); };
  // transformation law at centroids and their generator images
  const auto& g = C.mesh().group;
  for (int t = 0; t < nt; t += std::max(1, nt / 64))
    for (const auto& G : g.generators) {
      cd z = C.mesh().centroid[t], w = G(z);
      if (std::abs(w) >= trunc_radius) continue;
      cd d = G.derivative(z);
      out.equivariance_residual =
          std::max(out.equivariance_residual, std::abs(out.fn(w) * std::conj(d) / d - out.fn(z)));
    }
  return out;
}

// ---------------- solver ----------------

MappingGrid solve_beltrami(const BeltramiCoefficient& coeff, const BeltramiParams& p) {
  if (p.grid < 16) throw Error(ErrorKind::GridTooCoarse, "grid must have at least 16 cells per side");
  const int n = p.grid;
  MappingGrid g;
  g.n = n;
  g.h = 2.0 / n;
  g.trunc_radius = coeff.trunc_radius;
  const double h = g.h;
  VectorXcd mu(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) mu(j * n + i) = coeff(g.cell_center(i, j));
  const double sup = sup_abs(mu);
  if (sup >= 1) throw Error(ErrorKind::EllipticityViolated, "sampled coefficient sup-norm " + std::to_string(sup));

  Convolver B(n, [&](int di, int dj) {
    if (di == 0 && dj == 0) return cd(0);
    cd d(di * h, dj * h);
    return -h * h / (PI * d * d);
  });
  VectorXcd hv = VectorXcd::Zero(n * n);
  if (sup > 0) {
    hv = mu;
    bool ok = false;
    for (int it = 1; it <= p.max_iter; ++it) {
      VectorXcd nh = mu.cwiseProduct(VectorXcd::Ones(n * n) + B.apply(hv));
      double inc = sup_abs(nh - hv) / sup;
      hv = nh;
      g.increments.push_back(inc);
      g.iterations = it;
      if (inc < p.tol) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      std::string trace;
      for (size_t k = 0; k < g.increments.size(); k += std::max<size_t>(1, g.increments.size() / 8))
        trace += " " + std::to_string(g.increments[k]);
      throw Error(ErrorKind::SeriesDiverged, "Neumann series stalled after " + std::to_string(p.max_iter) +
                                                 " iterations, increments:" + trace);
    }
  }
  g.last_increment = g.increments.empty() ? 0 : g.increments.back();
  VectorXcd Bh = B.apply(hv);
  g.dbar = hv;
  g.del = VectorXcd::Ones(n * n) + Bh;
  g.residual = sup_abs(hv - mu.cwiseProduct(g.del));

  auto zs = std::make_shared<std::vector<cd>>();
  auto vs = std::make_shared<std::vector<cd>>();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (hv(j * n + i) != 0.0) {
        zs->push_back(g.cell_center(i, j));
        vs->push_back(hv(j * n + i));
      }
  g.hsupport_z = zs;
  g.hsupport_v = vs;

  Convolver Cc(n, [&](int di, int dj) {
    if (di == 0 && dj == 0) return cd(0);
    return h * h / (PI * cd(di * h, dj * h));
  });
  VectorXcd raw = Cc.apply(hv);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) raw(j * n + i) += g.cell_center(i, j);

  const cd pins[3] = {-1.0, cd(0, -1), 1.0};
  for (cd q : pins) g.pinned_before.push_back(g(q));  // normalization is still identity here
  MoebiusTransform A = to_01inf(g.pinned_before[0], g.pinned_before[1], g.pinned_before[2]);
  MoebiusTransform P = to_01inf(pins[0], pins[1], pins[2]);
  g.normalization = (P.inverse() * A).normalized();
  for (cd q : pins) g.pinned_after.push_back(g(q));
  g.chi.resize(n * n);
  for (int k = 0; k < n * n; ++k) g.chi(k) = g.normalization(raw(k));
  return g;
}

cd MappingGrid::operator()(cd z) const {
  cd s = z;
  if (hsupport_z) {
    const auto& Z = *hsupport_z;
    const auto& V = *hsupport_v;
    const double w = h * h / PI, near = 2.5 * h;
    for (size_t k = 0; k < Z.size(); ++k) {
      cd d = z - Z[k];
      if (std::abs(d) > near) {
        s += w * V[k] / d;
      } else {
        // 4x4 sub-cells near the evaluation point
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            cd dd = d - cd(h * ((a + 0.5) / 4 - 0.5), h * ((b + 0.5) / 4 - 0.5));
            if (std::abs(dd) > 1e-14) s += w / 16 * V[k] / dd;
          }
      }
    }
  }
  return normalization(s);
}

cd MappingGrid::del_at(cd z) const {
  cd raw = normalization.inverse()(bilinear(chi, n, h, z));
  return normalization.derivative(raw) * bilinear(del, n, h, z);
}

cd MappingGrid::dbar_at(cd z) const {
  cd raw = normalization.inverse()(bilinear(chi, n, h, z));
  return normalization.derivative(raw) * bilinear(dbar, n, h, z);
}

nlohmann::json half_plane_samples(const MappingGrid& g, int nx, int ny, double x0, double x1, double y0, double y1) {
  nlohmann::json pts = nlohmann::json::array();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      cd w(x0 + (x1 - x0) * i / std::max(1, nx - 1), y0 + (y1 - y0) * j / std::max(1, ny - 1));
      cd v = cayley_to_half_plane(g(cayley_to_disk(w)));
      pts.push_back({w.real(), w.imag(), v.real(), v.imag()});
    }
  return pts;
}

nlohmann::json mapping_header(const MappingGrid& g) {
  nlohmann::json j;
  j["bounds"] = {-1.0, 1.0, -1.0, 1.0};
  j["cells"] = g.n;
  j["spacing"] = g.h;
  j["trunc_radius"] = g.trunc_radius;
  j["iterations"] = g.iterations;
  j["residual"] = g.residual;
  j["last_increment"] = g.last_increment;
  nlohmann::json pins = nlohmann::json::array();
  const char* names[3] = {"0", "1", "inf"};
  for (size_t k = 0; k < g.pinned_after.size(); ++k) {
    cd ref = k == 0 ? cd(-1) : k == 1 ? cd(0, -1) : cd(1);
    pins.push_back({{"half_plane_point", names[k]}, {"disk_point", {ref.real(), ref.imag()}},
                    {"error", std::abs(g.pinned_after[k] - ref)}});
  }
  j["pinned"] = pins;
  return j;
}

// ---------------- deformed group ----------------

DeformedGroup deformed_generators(const MappingGrid& map, const FuchsianGroup& g, double max_fit) {
  DeformedGroup out;
  out.group = g;
  for (size_t k = 0; k < g.generators.size(); ++k) {
    const MoebiusTransform& G = g.generators[k];
    // point of the isometric circle closest to the origin: the middle of the source side
    cd m = -G.d / G.c * (1.0 - 1.0 / std::abs(G.d));
    std::vector<cd> u, v;
    for (double s : {0.5, 0.65, 0.8, 0.95})
      for (double th : {-0.25, -0.15, -0.05, 0.05, 0.15, 0.25}) {
        cd z = m * s * std::polar(1.0, th);
        u.push_back(map(z));
        v.push_back(map(G(z)));
      }
    const int np = static_cast<int>(u.size());
    MatrixXcd A(np, 4);
    for (int i = 0; i < np; ++i) A.row(i) << u[i], 1.0, -u[i] * v[i], -v[i];
    Eigen::JacobiSVD<MatrixXcd> svd(A, Eigen::ComputeFullV);
    VectorXcd x = svd.matrixV().col(3);
    MoebiusTransform F{x(0), x(1), x(2), x(3), Model::disk};
    F = F.normalized();
    out.condition = std::max(out.condition, svd.singularValues()(0) / svd.singularValues()(2));
    double res = 0;
    for (int i = 0; i < np; ++i) res = std::max(res, std::abs(F(u[i]) - v[i]));
    out.fit_residual = std::max(out.fit_residual, res);
    out.group.generators[k] = F;
  }
  out.relator_residual = out.group.relator_residual();
  if (out.fit_residual > max_fit)
    throw Error(ErrorKind::FitResidualTooLarge, "Moebius fit residual " + std::to_string(out.fit_residual));
  return out;
}

// ---------------- operator derivatives ----------------

DerivativeSlot derivative_slot(const std::string& s) {
  if (s == "dbar_sections") return DerivativeSlot::dbar_sections;
  if (s == "dbar_forms") return DerivativeSlot::dbar_forms;
  if (s == "dbarstar_sections") return DerivativeSlot::dbarstar_sections;
  if (s == "dbarstar_forms") return DerivativeSlot::dbarstar_forms;
  throw Error(ErrorKind::ConfigError, "unknown derivative slot " + s);
}

namespace {
Coef direction_coef(const TangentVector& dir) {
  Coef c = dir.nu.kind.coef;
  if (c != Coef::EndE && c != Coef::AdE && c != Coef::trivial)
    throw Error(ErrorKind::KindMismatch, "operator_derivative needs a bundle-valued direction");
  if (dir.mu.values.size() && !(dir.mu.kind == kinds::beltrami))
    throw Error(ErrorKind::KindMismatch, "operator_derivative needs a Beltrami mu");
  return c;
}

using detail::bracket_blocks;
using detail::mul_blocks;

VectorXcd mu_of(const TangentVector& dir, const Calculus& C) {
  return dir.mu.values.size() ? dir.mu.values : VectorXcd::Zero(C.mesh().n_tri());
}
VectorXcd nu_of(const TangentVector& dir, Coef c, const Calculus& C) {
  return dir.nu.values.size() ? dir.nu.values : VectorXcd::Zero(C.size(kinds::f01(c)));
}

// L dbar on sections: ad(nu) - mu d
SpMat dbar_sections_variation(const TangentVector& dir, Coef c, const Calculus& C) {
  const int r = C.fiber_dim(c);
  SpMat ad = bracket_blocks(nu_of(dir, c, C), false, c, C) * C.average(c).A;
  SpMat md = mul_blocks(mu_of(dir, C), r, false) * C.assemble("partial", kinds::fun(c)).A;
  return ad - md;
}
}  // namespace

OperatorDerivative operator_derivative(const TangentVector& dir, DerivativeSlot which, const Calculus& C) {
  const Coef c = direction_coef(dir);
  const int r = C.fiber_dim(c);
  OperatorDerivative out{dir, which, {}};
  DiscreteOperator& op = out.op;
  switch (which) {
    case DerivativeSlot::dbar_sections:
      op = {dbar_sections_variation(dir, c, C), kinds::fun(c), kinds::f01(c), false, "L_dbar_sections"};
      break;
    case DerivativeSlot::dbar_forms: {
      SpMat Z(C.size(kinds::cell(c)), C.size(kinds::f01(c)));
      op = {Z, kinds::f01(c), kinds::cell(c), false, "L_dbar_forms"};
      break;
    }
    case DerivativeSlot::dbarstar_sections: {
      SpMat Z(C.size(kinds::fun(c)), C.size(kinds::fun(c)));
      op = {Z, kinds::fun(c), kinds::fun(c), false, "L_dbarstar_sections"};
      break;
    }
    case DerivativeSlot::dbarstar_forms: {
      // -*ad(nu)*: the conjugate-linear star turns the bracket into [nu^*, .],
      // then the cell values return to sections through the averaging adjoint
      SpMat star_ad = detail::ad_adjoint(nu_of(dir, c, C), c, C);
      DiscreteOperator pstar = C.adjoint(C.assemble("partial", kinds::fun(c)));
      SpMat mub = mul_blocks(mu_of(dir, C), r, true);
      op = {SpMat(star_ad - pstar.A * mub), kinds::f01(c), kinds::fun(c), false, "L_dbarstar_forms"};
      break;
    }
  }
  return out;
}

DiscreteOperator operator_family(const TangentVector& dir, DerivativeSlot which, double eps, const Calculus& C) {
  const Coef c = direction_coef(dir);
  DiscreteOperator d = C.assemble("dbar", kinds::fun(c));
  DiscreteOperator fam{SpMat(d.A + eps * dbar_sections_variation(dir, c, C)), d.dom, d.cod, false, "dbar_eps"};
  switch (which) {
    case DerivativeSlot::dbar_sections: return fam;
    case DerivativeSlot::dbarstar_forms: return C.adjoint(fam);
    case DerivativeSlot::dbar_forms: {
      SpMat Z(C.size(kinds::cell(c)), C.size(kinds::f01(c)));
      return {Z, kinds::f01(c), kinds::cell(c), false, "dbar_forms_eps"};
    }
    case DerivativeSlot::dbarstar_sections: {
      SpMat Z(C.size(kinds::fun(c)), C.size(kinds::fun(c)));
      return {Z, kinds::fun(c), kinds::fun(c), false, "dbarstar_sections_eps"};
    }
  }
  return fam;
}

// ---------------- Kodaira-Spencer ----------------

TangentVector kodaira_spencer(const TangentVector& tv, const MappingGrid* chi1, const MappingGrid* /*chi2*/,
                              const TangentVector& at, const HarmonicBasis& btx, const HarmonicBasis& be,
                              const Calculus& C) {
  auto nz = [&](const Field& f) { return f.values.size() && f.values.cwiseAbs().maxCoeff() > 0; };
  TangentVector out;
  if (!nz(at.mu) && !nz(at.nu)) {
    out.mu = tv.mu.values.size() ? project(tv.mu, btx, C) : C.zero(kinds::beltrami);
    out.nu = tv.nu.values.size() ? project(tv.nu, be, C) : C.zero(kinds::f01(be.kind));
    return out;
  }
  if (!chi1) throw Error(ErrorKind::MissingChiData, "Kodaira-Spencer away from the origin needs chi_1");
  const int nt = C.mesh().n_tri();
  VectorXcd num = tv.mu.values.size() ? tv.mu.values : VectorXcd::Zero(nt);
  if (nz(tv.nu) && nz(at.nu)) {
    Field q = C.apply_primitive("density_inverse_scale", {C.apply_primitive("trace", {tv.nu, at.nu})});
    num -= q.values;
  }
  VectorXcd amu = at.mu.values.size() ? at.mu.values : VectorXcd::Zero(nt);
  for (int t = 0; t < nt; ++t) num(t) /= 1.0 - std::norm(amu(t));
  EquivariantSampler S(C.mesh_ptr());
  Field mu = C.zero(kinds::beltrami);
  for (int t = 0; t < nt; ++t) {
    cd z = C.mesh().centroid[t];
    cd w = (*chi1)(z);
    cd d = chi1->del_at(z);
    mu.values(t) = S.beltrami_at(num, w) * std::conj(d) / d;
  }
  out.mu = project(mu, btx, C);
  out.nu = tv.nu.values.size() ? project(tv.nu, be, C) : C.zero(kinds::f01(be.kind));
  return out;
}

}  // namespace hl
