#include "hodgelab/bundle.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "hodgelab/errors.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXcd UnitaryRep::letter(int l) const {
  const MatrixXcd& u = images.at(std::abs(l) - 1);
  return l > 0 ? u : MatrixXcd(u.adjoint());
}

MatrixXcd UnitaryRep::word(const Word& w) const {
  MatrixXcd r = MatrixXcd::Identity(n, n);
  for (int l : w) r = r * letter(l);
  return r;
}

UnitaryRep UnitaryRep::conjugated(const MatrixXcd& V) const {
  UnitaryRep r = *this;
  for (auto& u : r.images) u = V * u * V.adjoint();
  return r;
}

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd r(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

MatrixXcd haar_unitary(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  MatrixXcd z(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) z(i, j) = {N(rng), N(rng)};
  Eigen::HouseholderQR<MatrixXcd> qr(z);
  MatrixXcd q = qr.householderQ();
  MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    std::complex<double> ph = r(i, i) / std::abs(r(i, i));
    q.col(i) *= ph;
  }
  return q;
}

namespace {

MatrixXcd project_unitary(const MatrixXcd& a) {
  Eigen::JacobiSVD<MatrixXcd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

MatrixXcd expi_hermitian(const MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
  Eigen::VectorXcd ph = (std::complex<double>(0, 1) * es.eigenvalues().cast<std::complex<double>>()).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

// Hermitian basis of gl(n) (n^2 elements) for the Gauss-Newton parametrization
std::vector<MatrixXcd> hermitian_basis(int n) {
  std::vector<MatrixXcd> b;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      MatrixXcd e = MatrixXcd::Zero(n, n);
      if (i == j) e(i, i) = 1;
      else if (i < j) e(i, j) = e(j, i) = 1;
      else {
        e(i, j) = {0, 1};
        e(j, i) = {0, -1};
      }
      b.push_back(e);
    }
  return b;
}

double relator_defect(const UnitaryRep& r) {
  return (r.word(r.relator) - MatrixXcd::Identity(r.n, r.n)).norm();
}

// Gauss-Newton on U_k <- U_k exp(i H_k) for the relator equation
bool polish(UnitaryRep& r, int max_it = 60) {
  const int n = r.n, ng = static_cast<int>(r.images.size());
  const auto basis = hermitian_basis(n);
  const int np = ng * n * n;
  const std::complex<double> I(0, 1);
  for (int it = 0; it < max_it; ++it) {
    MatrixXcd W = r.word(r.relator);
    MatrixXcd R = W - MatrixXcd::Identity(n, n);
    double res = R.norm();
    if (res < 1e-13) return true;
    // prefix/suffix products
    const int m = static_cast<int>(r.relator.size());
    std::vector<MatrixXcd> A(m), pre(m + 1), suf(m + 1);
    for (int j = 0; j < m; ++j) A[j] = r.letter(r.relator[j]);
    pre[0] = MatrixXcd::Identity(n, n);
    for (int j = 0; j < m; ++j) pre[j + 1] = pre[j] * A[j];
    suf[m] = MatrixXcd::Identity(n, n);
    for (int j = m - 1; j >= 0; --j) suf[j] = A[j] * suf[j + 1];
    MatrixXd J = MatrixXd::Zero(2 * n * n, np);
    for (int g = 0; g < ng; ++g)
      for (size_t b = 0; b < basis.size(); ++b) {
        MatrixXcd dW = MatrixXcd::Zero(n, n);
        for (int j = 0; j < m; ++j) {
          int l = r.relator[j];
          if (std::abs(l) - 1 != g) continue;
          MatrixXcd dA = l > 0 ? MatrixXcd(A[j] * (I * basis[b])) : MatrixXcd(-I * basis[b] * A[j]);
          dW += pre[j] * dA * suf[j + 1];
        }
        int col = g * n * n + static_cast<int>(b);
        for (int i = 0; i < n * n; ++i) {
          J(i, col) = dW(i % n, i / n).real();
          J(n * n + i, col) = dW(i % n, i / n).imag();
        }
      }
    VectorXd rv(2 * n * n);
    for (int i = 0; i < n * n; ++i) {
      rv(i) = R(i % n, i / n).real();
      rv(n * n + i) = R(i % n, i / n).imag();
    }
    VectorXd step = J.completeOrthogonalDecomposition().solve(-rv);
    // damped update
    double t = 1.0;
    UnitaryRep trial = r;
    for (int ls = 0; ls < 20; ++ls, t *= 0.5) {
      trial = r;
      for (int g = 0; g < ng; ++g) {
        MatrixXcd H = MatrixXcd::Zero(n, n);
        for (size_t b = 0; b < basis.size(); ++b) H += t * step(g * n * n + b) * basis[b];
        trial.images[g] = project_unitary(r.images[g] * expi_hermitian(H));
      }
      if (relator_defect(trial) < res) break;
    }
    if (relator_defect(trial) >= res) return false;
    r = trial;
  }
  return relator_defect(r) < 1e-10;
}

}  // namespace

UnitaryRep trivial_rep(const FuchsianGroup& g, int n) {
  UnitaryRep r;
  r.n = n;
  r.relator = g.relator;
  r.images.assign(g.generators.size(), MatrixXcd::Identity(n, n));
  return r;
}

UnitaryRep random_unitary_rep(const FuchsianGroup& g, int n, int k, std::uint64_t seed, double margin_min,
                              int max_retries) {
  if (k != 0) throw Error(ErrorKind::UnsupportedDegree, "degree " + std::to_string(k) + " (only k = 0)");
  if (n < 1 || n > 3) throw Error(ErrorKind::ConfigError, "rank must be 1, 2 or 3");
  std::mt19937_64 seeder(seed);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    UnitaryRep r;
    r.n = n;
    r.k = k;
    r.seed = seed;
    r.relator = g.relator;
    for (size_t i = 0; i < g.generators.size(); ++i) r.images.push_back(haar_unitary(n, seeder()));
    if (!polish(r)) continue;
    RepResiduals res = rep_residuals(r);
    if (res.relator_residual <= 1e-10 && res.irreducibility_margin > margin_min) return r;
  }
  throw Error(ErrorKind::MaxRetriesExceeded, "no irreducible representation found for seed " + std::to_string(seed));
}

RepResiduals rep_residuals(const UnitaryRep& r) {
  RepResiduals out;
  out.relator_residual = relator_defect(r);
  for (const auto& u : r.images)
    out.unitarity = std::max(out.unitarity, (u.adjoint() * u - MatrixXcd::Identity(r.n, r.n)).norm());
  if (r.n == 1) {
    out.irreducibility_margin = std::numeric_limits<double>::infinity();
    out.commutant_dim = 1;
    return out;
  }
  const int d = r.n * r.n;
  MatrixXcd A = MatrixXcd::Zero(d, d);
  for (const auto& u : r.images) {
    MatrixXcd B = MatrixXcd::Identity(d, d) - kron(u.conjugate(), u);
    A += B.adjoint() * B;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(A);
  out.irreducibility_margin = es.eigenvalues()(1);
  for (int i = 0; i < d; ++i)
    if (es.eigenvalues()(i) < 1e-10) ++out.commutant_dim;
  return out;
}

MatrixXcd traceless_basis(int n) {
  // generalized Gell-Mann matrices scaled to unit Frobenius norm
  std::vector<MatrixXcd> mats;
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      MatrixXcd a = MatrixXcd::Zero(n, n), b = MatrixXcd::Zero(n, n);
      a(i, j) = a(j, i) = s;
      b(i, j) = {0, -s};
      b(j, i) = {0, s};
      mats.push_back(a);
      mats.push_back(b);
    }
  for (int l = 1; l < n; ++l) {
    MatrixXcd c = MatrixXcd::Zero(n, n);
    double nrm = 1.0 / std::sqrt(l * (l + 1.0));
    for (int i = 0; i < l; ++i) c(i, i) = nrm;
    c(l, l) = -l * nrm;
    mats.push_back(c);
  }
  MatrixXcd E(n * n, mats.size());
  for (size_t k = 0; k < mats.size(); ++k) E.col(k) = Eigen::Map<const Eigen::VectorXcd>(mats[k].data(), n * n);
  return E;
}

int HolonomyAction::fiber_dim() const {
  int n = rep ? rep->n : 1;
  switch (kind) {
    case ActionKind::trivial: return 1;
    case ActionKind::fundamental: return n;
    case ActionKind::EndE: return n * n;
    case ActionKind::AdE: return n * n - 1;
  }
  return 1;
}

int HolonomyAction::matrix_size() const {
  return (kind == ActionKind::EndE || kind == ActionKind::AdE) && rep ? rep->n : 0;
}

MatrixXcd HolonomyAction::embed() const {
  int n = rep ? rep->n : 1;
  if (kind == ActionKind::EndE) return MatrixXcd::Identity(n * n, n * n);
  if (kind == ActionKind::AdE) return traceless_basis(n);
  return MatrixXcd::Identity(fiber_dim(), fiber_dim());
}

MatrixXcd HolonomyAction::act(const MatrixXcd& U) const {
  switch (kind) {
    case ActionKind::trivial: return MatrixXcd::Identity(1, 1);
    case ActionKind::fundamental: return U;
    case ActionKind::EndE: return kron(U.conjugate(), U);
    case ActionKind::AdE: {
      MatrixXcd E = embed();
      return E.adjoint() * kron(U.conjugate(), U) * E;
    }
  }
  return U;
}

nlohmann::json rep_to_json(const UnitaryRep& r) {
  using nlohmann::json;
  json ims = json::array();
  for (const auto& u : r.images) {
    json m = json::array();
    for (int i = 0; i < r.n; ++i) {
      json row = json::array();
      for (int j = 0; j < r.n; ++j) row.push_back({u(i, j).real(), u(i, j).imag()});
      m.push_back(row);
    }
    ims.push_back(m);
  }
  return {{"n", r.n}, {"k", r.k}, {"seed", r.seed}, {"relator", r.relator}, {"images", ims}};
}

UnitaryRep rep_from_json(const nlohmann::json& j) {
  UnitaryRep r;
  r.n = j.at("n").get<int>();
  r.k = j.at("k").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.relator = j.at("relator").get<Word>();
  for (const auto& m : j.at("images")) {
    MatrixXcd u(r.n, r.n);
    for (int i = 0; i < r.n; ++i)
      for (int c = 0; c < r.n; ++c) u(i, c) = {m[i][c][0].get<double>(), m[i][c][1].get<double>()};
    r.images.push_back(u);
  }
  return r;
}

}  // namespace hl
