#include "hodgelab/calculus.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hodgelab/errors.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Trip = Eigen::Triplet<cd>;

namespace {
const cd I(0, 1);

const char* coef_name(Coef c) {
  switch (c) {
    case Coef::trivial: return "trivial";
    case Coef::fundamental: return "fundamental";
    case Coef::EndE: return "EndE";
    case Coef::AdE: return "AdE";
    case Coef::TX: return "TX";
    case Coef::K2: return "K2";
  }
  return "?";
}

int weight(Coef c) { return c == Coef::TX ? -1 : (c == Coef::K2 ? 2 : 0); }

}  // namespace

std::string FormKind::name() const {
  const char* d = "function";
  switch (degree) {
    case Degree::function: d = "function"; break;
    case Degree::form10: d = "(1,0)"; break;
    case Degree::form01: d = "(0,1)"; break;
    case Degree::cell: d = "cell"; break;
    case Degree::form02: d = "(0,2)"; break;
  }
  return std::string(d) + ":" + coef_name(coef);
}

nlohmann::json field_to_json(const Field& f) {
  nlohmann::json v = nlohmann::json::array();
  for (int i = 0; i < f.values.size(); ++i) v.push_back({f.values(i).real(), f.values(i).imag()});
  return {{"kind", f.kind.name()}, {"values", v}};
}

MatrixXcd block_matrix(const VectorXcd& v, int t, int n) {
  return Eigen::Map<const MatrixXcd>(v.data() + static_cast<long>(t) * n * n, n, n);
}

void set_block(VectorXcd& v, int t, const MatrixXcd& m) {
  const long nn = m.rows() * m.cols();
  v.segment(t * nn, nn) = Eigen::Map<const VectorXcd>(m.data(), nn);
}

struct Calculus::Factor {
  Eigen::SimplicialLDLT<SpMat> ldlt;
  SpMat K, M;
  double eps = 0;
};

Calculus::Calculus(std::shared_ptr<const SurfaceMesh> mesh, std::shared_ptr<const UnitaryRep> rep)
    : mesh_(std::move(mesh)), rep_(std::move(rep)) {}

HolonomyAction Calculus::action(Coef c) const {
  switch (c) {
    case Coef::fundamental: return {rep_.get(), ActionKind::fundamental};
    case Coef::EndE: return {rep_.get(), ActionKind::EndE};
    case Coef::AdE: return {rep_.get(), ActionKind::AdE};
    default: return {rep_.get(), ActionKind::trivial};
  }
}

int Calculus::fiber_dim(Coef c) const { return action(c).fiber_dim(); }

int Calculus::size(FormKind k) const {
  int r = fiber_dim(k.coef);
  return (k.is_section() ? mesh_->n_vdof : mesh_->n_tri()) * r;
}

const VectorXd& Calculus::mass(FormKind k) const {
  auto key = k.name();
  auto it = masses_.find(key);
  if (it != masses_.end()) return it->second;
  const SurfaceMesh& m = *mesh_;
  const int r = fiber_dim(k.coef);
  VectorXd d = VectorXd::Zero(size(k));
  if (k.is_section()) {
    for (int t = 0; t < m.n_tri(); ++t)
      for (int v : m.triangles[t])
        for (int a = 0; a < r; ++a) d(m.vdof[v] * r + a) += m.area_h[t] / 3.0;
  } else {
    for (int t = 0; t < m.n_tri(); ++t) {
      double w = 0;
      switch (k.degree) {
        case Degree::cell: w = m.area_h[t]; break;
        case Degree::form02: w = m.area_e[t] / lambda_t(t); break;
        default: w = k.weighted() ? m.area_h[t] : m.area_e[t]; break;
      }
      for (int a = 0; a < r; ++a) d(t * r + a) = w;
    }
  }
  return masses_.emplace(key, d).first->second;
}

const std::vector<MatrixXcd>& Calculus::transports(Coef c) const {
  auto it = transports_.find(static_cast<int>(c));
  if (it != transports_.end()) return it->second;
  const SurfaceMesh& m = *mesh_;
  const int nv = static_cast<int>(m.vertices.size());
  std::vector<MatrixXcd> T(nv);
  HolonomyAction act = action(c);
  const int mw = weight(c);
  for (int v = 0; v < nv; ++v) {
    if (mw != 0) {
      cd gp = m.vmap[v].derivative(m.vertices[m.vrep[v]]);
      cd f = std::pow(std::abs(gp) / gp, mw);
      T[v] = MatrixXcd::Constant(1, 1, f);
    } else if (c == Coef::trivial) {
      T[v] = MatrixXcd::Identity(1, 1);
    } else {
      T[v] = act.holonomy(m.vword[v]);
    }
  }
  return transports_.emplace(static_cast<int>(c), std::move(T)).first->second;
}

namespace {

// per-triangle P1 -> P0 stencil with transports; coeff(t, i) scalar
template <class F>
SpMat p1_to_p0(const SurfaceMesh& m, const std::vector<MatrixXcd>& T, int r, F coeff) {
  std::vector<Trip> trips;
  trips.reserve(m.n_tri() * 3 * r * r);
  for (int t = 0; t < m.n_tri(); ++t)
    for (int i = 0; i < 3; ++i) {
      int v = m.triangles[t][i];
      cd c = coeff(t, i);
      const MatrixXcd& Tv = T[v];
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b)
          if (Tv(a, b) != 0.0) trips.emplace_back(t * r + a, m.vdof[v] * r + b, c * Tv(a, b));
    }
  SpMat A(m.n_tri() * r, m.n_vdof * r);
  A.setFromTriplets(trips.begin(), trips.end());
  return A;
}

cd grad_phi(const SurfaceMesh& m, int t, int i) {
  // gradient of the hat function as a complex number gx + i gy
  const auto& tr = m.triangles[t];
  cd e = m.vertices[tr[(i + 2) % 3]] - m.vertices[tr[(i + 1) % 3]];
  return I * e / (2.0 * m.area_e[t]);
}

}  // namespace

DiscreteOperator Calculus::average(Coef c) const {
  const int r = fiber_dim(c);
  DiscreteOperator op;
  op.A = p1_to_p0(*mesh_, transports(c), r, [](int, int) { return cd(1.0 / 3.0); });
  op.dom = kinds::fun(c);
  op.cod = kinds::cell(c);
  op.name = "average";
  return op;
}

DiscreteOperator Calculus::assemble(const std::string& which, FormKind kind, double c) const {
  const SurfaceMesh& m = *mesh_;
  const int r = fiber_dim(kind.coef);
  DiscreteOperator op;
  op.name = which;
  op.dom = op.cod = kind;
  if (which == "dbar" || which == "partial") {
    if (!kind.is_section()) throw Error(ErrorKind::KindMismatch, which + " needs a section kind, got " + kind.name());
    const bool bar = which == "dbar";
    const int mw = weight(kind.coef);
    op.cod = {bar ? Degree::form01 : Degree::form10, kind.coef};
    op.A = p1_to_p0(m, transports(kind.coef), r, [&](int t, int i) -> cd {
      cd g = grad_phi(m, t, i);
      cd d = bar ? 0.5 * g : 0.5 * std::conj(g);
      if (mw == 0) return d;
      // unitary frame: lambda^{-1/2} (d f -/+ (m/2) f d log lambda)
      cd z = m.centroid[t];
      cd dl = 2.0 * (bar ? z : std::conj(z)) / (1.0 - std::norm(z));
      double sgn = bar ? 1.0 : -1.0;
      return (d + sgn * 0.5 * mw * dl / 3.0) / std::sqrt(lambda_t(t));
    });
    for (int t = 0; t < m.n_tri(); ++t)
      if (!(m.area_e[t] > 1e-14)) throw Error(ErrorKind::SingularAssembly, "degenerate triangle " + std::to_string(t));
    return op;
  }
  if (which == "star") {
    cd f;
    if (kind.degree == Degree::form01) f = I;
    else if (kind.degree == Degree::form10) f = -I;
    else throw Error(ErrorKind::KindMismatch, "star acts on 1-forms, got " + kind.name());
    op.A = diag_sparse(VectorXcd(VectorXcd::Constant(size(kind), f)));
    return op;
  }
  if (which == "mass") {
    op.A = diag_sparse(mass(kind));
    return op;
  }
  if (which == "laplacian" || which == "shifted_laplacian") {
    const double shift = which == "shifted_laplacian" ? c : 0.0;
    if (kind.is_section()) {
      DiscreteOperator d = assemble("dbar", kind);
      op.A = compose(adjoint(d), d).A;
    } else if (kind.degree == Degree::form01 && !kind.weighted()) {
      DiscreteOperator d = assemble("dbar", kinds::fun(kind.coef));
      op.A = compose(d, adjoint(d)).A;
    } else if (kind.degree == Degree::form10 && !kind.weighted()) {
      DiscreteOperator d = assemble("partial", kinds::fun(kind.coef));
      op.A = compose(d, adjoint(d)).A;
    } else {
      throw Error(ErrorKind::KindMismatch, "no laplacian on " + kind.name());
    }
    if (shift != 0.0) {
      SpMat Id(op.A.rows(), op.A.cols());
      Id.setIdentity();
      op.A += shift * Id;
    }
    op.name = "laplacian";
    return op;
  }
  throw Error(ErrorKind::KindMismatch, "unknown operator " + which);
}

DiscreteOperator Calculus::adjoint(const DiscreteOperator& op) const {
  DiscreteOperator r;
  VectorXd md = mass(op.dom), mc = mass(op.cod);
  SpMat AH = op.A.adjoint();
  r.A = diag_sparse(VectorXd(md.cwiseInverse())) * AH * diag_sparse(mc);
  r.dom = op.cod;
  r.cod = op.dom;
  r.adjoint_flag = !op.adjoint_flag;
  r.name = op.name;
  return r;
}

DiscreteOperator Calculus::compose(const DiscreteOperator& a, const DiscreteOperator& b) const {
  if (!(a.dom == b.cod))
    throw Error(ErrorKind::KindMismatch, "compose " + a.dom.name() + " after " + b.cod.name());
  DiscreteOperator r;
  r.A = (a.A * b.A).pruned();
  r.dom = b.dom;
  r.cod = a.cod;
  r.name = a.name + "*" + b.name;
  return r;
}

void Calculus::check_kind(const Field& f, FormKind k, const char* what) const {
  if (!(f.kind == k)) throw Error(ErrorKind::KindMismatch, std::string(what) + ": expected " + k.name() + ", got " + f.kind.name());
}

Field Calculus::apply(const DiscreteOperator& op, const Field& f) const {
  check_kind(f, op.dom, op.name.c_str());
  return {op.cod, op.A * f.values};
}

cd Calculus::inner(const Field& a, const Field& b) const {
  check_kind(b, a.kind, "inner");
  const VectorXd& m = mass(a.kind);
  cd s = 0;
  for (int i = 0; i < a.values.size(); ++i) s += m(i) * a.values(i) * std::conj(b.values(i));
  return s;
}

Field Calculus::random(FormKind k, std::uint64_t seed) const { return {k, random_matrix(size(k), 1, seed).col(0)}; }

std::shared_ptr<Calculus::Factor> Calculus::factor(const DiscreteOperator& lap, double shift) const {
  std::ostringstream key;
  key << lap.name << "|" << lap.dom.name() << "|" << std::setprecision(17) << shift << "|" << lap.A.nonZeros();
  auto it = factors_.find(key.str());
  if (it != factors_.end()) return it->second;
  auto f = std::make_shared<Factor>();
  f->M = mass_matrix(lap.dom);
  f->K = f->M * lap.A;
  f->K = (0.5 * (f->K + SpMat(f->K.adjoint()))).pruned();
  double kd = 0, md = 0;
  for (int i = 0; i < f->K.rows(); ++i) {
    kd += std::abs(f->K.coeff(i, i));
    md += std::abs(f->M.coeff(i, i));
  }
  f->eps = shift > 0 ? shift : 1e-8 * kd / md;
  SpMat A = f->K + f->eps * f->M;
  f->ldlt.compute(A);
  if (f->ldlt.info() != Eigen::Success) throw Error(ErrorKind::SolverBreakdown, "factorization of " + lap.name + " failed");
  factors_.emplace(key.str(), f);
  return f;
}

const MatrixXcd& Calculus::kernel(const DiscreteOperator& lap) const {
  std::string key = lap.name + "|" + lap.dom.name() + "|" + std::to_string(lap.A.nonZeros());
  auto it = kernels_.find(key);
  if (it != kernels_.end()) return it->second;
  if (!(lap.dom == lap.cod) || !lap.dom.is_section())
    throw Error(ErrorKind::KindMismatch, "kernel needs a section Laplacian");
  SpMat M = mass_matrix(lap.dom);
  SpMat K = M * lap.A;
  K = 0.5 * (K + SpMat(K.adjoint()));
  const int want = std::min<int>(8, K.rows());
  EigenResult er = lowest_eigenpairs(K, M, want, 1e-9);
  double kd = 0, md = 0;
  for (int i = 0; i < K.rows(); ++i) {
    kd += std::abs(K.coeff(i, i));
    md += std::abs(M.coeff(i, i));
  }
  const double thresh = 1e-8 * kd / md;
  int k = 0;
  while (k < er.values.size() && er.values(k) < thresh) ++k;
  MatrixXcd Z = er.vectors.leftCols(k);
  // re-orthonormalize in the mass inner product
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < j; ++i) Z.col(j) -= Z.col(i).dot(M * Z.col(j)) * Z.col(i);
    Z.col(j) /= std::sqrt(std::abs(Z.col(j).dot(M * Z.col(j))));
  }
  return kernels_.emplace(key, Z).first->second;
}

Field Calculus::green_apply(const DiscreteOperator& lap, const Field& f, double shift) const {
  check_kind(f, lap.dom, "green_apply");
  if (shift < 0) throw Error(ErrorKind::ConfigError, "negative shift");
  auto fac = factor(lap, shift);
  const SpMat& M = fac->M;
  VectorXcd rhs = f.values;
  MatrixXcd Z;
  if (shift == 0) {
    Z = kernel(lap);
    if (Z.cols() > 0) rhs -= Z * (Z.adjoint() * (M * rhs));
  }
  const double fn = (M * f.values).norm();
  VectorXcd b = M * rhs;
  if (b.norm() <= 1e-14 * fn || fn == 0) {
    last_residual_ = 0;
    return {f.kind, VectorXcd::Zero(rhs.size())};
  }
  auto project = [&](VectorXcd& x) {
    if (Z.cols() > 0) x -= Z * (Z.adjoint() * (M * x));
  };
  SpMat A = fac->K;
  if (shift > 0) A += shift * M;
  VectorXcd x = fac->ldlt.solve(b);
  project(x);
  const double bn = std::max(b.norm(), 1e-300);
  double rel = (b - A * x).norm() / bn;
  int it = 0;
  while (rel > 1e-12 && it < 30) {
    VectorXcd dx = fac->ldlt.solve(b - A * x);
    project(dx);
    x += dx;
    rel = (b - A * x).norm() / bn;
    ++it;
  }
  last_residual_ = b.norm() == 0 ? 0 : rel;
  if (b.norm() != 0 && !(rel <= 1e-9))
    throw Error(ErrorKind::SolverBreakdown, "green_apply residual " + std::to_string(rel) + " after " + std::to_string(it) + " refinements");
  return {f.kind, x};
}

namespace {

// fiber vector <-> n x n matrix for EndE / AdE
MatrixXcd to_mat(const VectorXcd& v, const MatrixXcd& E, int n) {
  VectorXcd w = E * v;
  return Eigen::Map<const MatrixXcd>(w.data(), n, n);
}
VectorXcd from_mat(const MatrixXcd& m, const MatrixXcd& E) {
  VectorXcd w = Eigen::Map<const VectorXcd>(m.data(), m.size());
  return E.adjoint() * w;
}

}  // namespace

Field Calculus::apply_primitive(const std::string& token, const std::vector<Field>& in) const {
  const SurfaceMesh& m = *mesh_;
  const int nt = m.n_tri();
  auto need = [&](size_t k) {
    if (in.size() != k) throw Error(ErrorKind::KindMismatch, token + " takes " + std::to_string(k) + " inputs");
  };
  auto matrix_coef = [&](Coef c) {
    if (c != Coef::EndE && c != Coef::AdE) throw Error(ErrorKind::KindMismatch, token + " needs EndE or AdE values");
  };
  if (token == "mul_beltrami" || token == "mul_beltrami_conj") {
    need(2);
    check_kind(in[0], kinds::beltrami, token.c_str());
    const bool cj = token == "mul_beltrami_conj";
    const Field& w = in[1];
    Degree want = cj ? Degree::form01 : Degree::form10;
    if (w.kind.degree != want) throw Error(ErrorKind::KindMismatch, token + " got " + w.kind.name());
    const int r = fiber_dim(w.kind.coef);
    Field out{{cj ? Degree::form10 : Degree::form01, w.kind.coef}, w.values};
    for (int t = 0; t < nt; ++t) {
      cd mu = cj ? std::conj(in[0].values(t)) : in[0].values(t);
      out.values.segment(t * r, r) *= mu;
    }
    return out;
  }
  if (token == "ad") {
    need(2);
    matrix_coef(in[0].kind.coef);
    const Coef c = in[0].kind.coef;
    check_kind(in[0], kinds::f01(c), "ad");
    check_kind(in[1], kinds::fun(c), "ad");
    const int n = rep_->n, r = fiber_dim(c);
    MatrixXcd E = action(c).embed();
    VectorXcd s = average(c).A * in[1].values;
    Field out = zero(kinds::f01(c));
    for (int t = 0; t < nt; ++t) {
      MatrixXcd nu = to_mat(in[0].values.segment(t * r, r), E, n), st = to_mat(s.segment(t * r, r), E, n);
      out.values.segment(t * r, r) = from_mat(nu * st - st * nu, E);
    }
    return out;
  }
  if (token == "conj_transpose" || token == "star_conj") {
    need(1);
    matrix_coef(in[0].kind.coef);
    const Coef c = in[0].kind.coef;
    Degree d = in[0].kind.degree;
    if (d != Degree::form01 && d != Degree::form10) throw Error(ErrorKind::KindMismatch, token + " needs a 1-form");
    Degree od = d == Degree::form01 ? Degree::form10 : Degree::form01;
    const int n = rep_->n, r = fiber_dim(c);
    MatrixXcd E = action(c).embed();
    cd f = token == "star_conj" ? (od == Degree::form01 ? I : -I) : cd(1);
    Field out = zero({od, c});
    for (int t = 0; t < nt; ++t)
      out.values.segment(t * r, r) = f * from_mat(to_mat(in[0].values.segment(t * r, r), E, n).adjoint(), E);
    return out;
  }
  if (token == "trace") {
    need(2);
    matrix_coef(in[0].kind.coef);
    const Coef c = in[0].kind.coef;
    check_kind(in[0], kinds::f01(c), "trace");
    check_kind(in[1], kinds::f01(c), "trace");
    const int n = rep_->n, r = fiber_dim(c);
    MatrixXcd E = action(c).embed();
    Field out = zero(kinds::f02);
    for (int t = 0; t < nt; ++t)
      out.values(t) = (to_mat(in[0].values.segment(t * r, r), E, n) * to_mat(in[1].values.segment(t * r, r), E, n)).trace();
    return out;
  }
  if (token == "density_inverse_scale") {
    need(1);
    check_kind(in[0], kinds::f02, token.c_str());
    Field out = zero(kinds::beltrami);
    for (int t = 0; t < nt; ++t) {
      // 1/density = (1-|z|^2)^2/4 is quartic, the 7 point rule is exact
      const auto& tr = m.triangles[t];
      double s = 0;
      for (const auto& q : dunavant7()) {
        double w = 1.0 - std::norm(q.l1 * m.vertices[tr[0]] + q.l2 * m.vertices[tr[1]] + q.l3 * m.vertices[tr[2]]);
        s += q.w * 0.25 * w * w;
      }
      out.values(t) = in[0].values(t) * s;
    }
    return out;
  }
  if (token == "wedge_integrate") {
    need(2);
    if (in[0].kind.degree != Degree::form01) throw Error(ErrorKind::KindMismatch, "wedge_integrate needs (0,1)-forms");
    Field out{kinds::fun(Coef::trivial), VectorXcd::Constant(1, inner(in[0], in[1]))};
    return out;
  }
  throw Error(ErrorKind::KindMismatch, "unknown primitive " + token);
}

void write_matrix_market(const DiscreteOperator& op, const std::string& path) {
  std::ofstream o(path);
  o << "%%MatrixMarket matrix coordinate complex general\n";
  o << "% " << op.name << " " << op.dom.name() << " -> " << op.cod.name() << (op.adjoint_flag ? " adjoint" : "") << "\n";
  o << op.A.rows() << " " << op.A.cols() << " " << op.A.nonZeros() << "\n";
  o << std::setprecision(17);
  for (int k = 0; k < op.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(op.A, k); it; ++it)
      o << it.row() + 1 << " " << it.col() + 1 << " " << it.value().real() << " " << it.value().imag() << "\n";
}

}  // namespace hl
