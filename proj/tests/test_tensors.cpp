#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "common.hpp"
#include "hodgelab/errors.hpp"
#include "hodgelab/harmonic.hpp"
#include "hodgelab/tensors.hpp"

using namespace hl;

namespace {

struct Bases {
  HarmonicBasis tx, ade, ende;
};

const Bases& bases(int level) {
  static std::map<int, Bases> cache;
  auto it = cache.find(level);
  if (it == cache.end()) {
    const Calculus& C = *testutil::calc(level);
    it = cache.emplace(level, Bases{harmonic_basis(Coef::TX, C), harmonic_basis(Coef::AdE, C),
                                    harmonic_basis(Coef::EndE, C)}).first;
  }
  return it->second;
}

struct Setup {
  const Calculus& C;
  const Bases& b;
  TensorContext ctx;
  TangentBasis B;
  explicit Setup(int level)
      : C(*testutil::calc(level)), b(bases(level)), ctx{C, b.tx, b.ade, {}}, B(tangent_basis(b.tx, b.ade, C)) {}
};

const TensorResult& hessian3() {
  static TensorResult H = [] {
    Setup s(3);
    return metric_hessian(s.B, s.ctx);
  }();
  return H;
}

const std::vector<cd>& term_part(const TensorResult& r, const std::string& label) {
  for (const auto& [l, v] : r.terms)
    if (l == label) return v;
  FAIL("missing term " << label);
  static std::vector<cd> none;
  return none;
}

TangentVector nu_only(const Field& nu) { return {Field{kinds::beltrami, {}}, nu}; }
TangentVector mu_only(const Field& mu, Coef c) { return {mu, Field{kinds::f01(c), {}}}; }

Field combo(const HarmonicBasis& b, const std::vector<double>& w) {
  Field f = b.elements[0];
  f.values.setZero();
  for (size_t i = 0; i < w.size(); ++i) f.values += w[i] * b.elements[i].values;
  return f;
}

}  // namespace

TEST_CASE("every shipped formula type-checks") {
  const auto names = builtin_formula_names();
  CHECK(names.size() == 7);
  for (const auto& n : names) {
    CAPTURE(n);
    CHECK_NOTHROW(typecheck(builtin_formula(n), Coef::AdE));
  }
  TensorOptions tx;
  tx.delta0c = "tx";
  CHECK_NOTHROW(typecheck(builtin_formula("metric_hessian"), Coef::AdE, tx));
  tx.delta0c = "nonsense";
  CHECK_THROWS_AS(typecheck(builtin_formula("metric_hessian"), Coef::AdE, tx), Error);
}

TEST_CASE("flipping one token kind is rejected") {
  FormulaIR f = builtin_formula("ricci_form");
  auto& p = f.terms[0].left[0];
  REQUIRE(!p.ops.empty());
  p.ops.back() = "mubar:1";  // (1,0) expected, (0,1) supplied
  try {
    typecheck(f, Coef::AdE);
    FAIL("mutation accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::KindMismatch);
    CHECK(std::string(e.what()).find(f.terms[0].label) != std::string::npos);
  }
  FormulaIR g = builtin_formula("kahler_lemma");
  g.terms[1].right[0].ops = {"dbar"};
  CHECK_THROWS_AS(typecheck(g, Coef::AdE), Error);
}

TEST_CASE("formula JSON round-trips exactly") {
  for (const auto& n : builtin_formula_names()) {
    const auto j = formula_to_json(builtin_formula(n));
    const auto j2 = formula_to_json(formula_from_json(j));
    CHECK(j.dump() == j2.dump());
  }
}

TEST_CASE("rank factors") {
  const double pi = std::numbers::pi;
  CHECK(rank_factor("n/2pi", 2) == 2 / (2 * pi));
  CHECK(rank_factor("n^2/12pi", 2) == 4 / (12 * pi));
  CHECK(rank_factor("(n^2-1)/6pi", 2) == 3 / (6 * pi));
  CHECK_THROWS_AS(rank_factor("bogus", 2), Error);
}

TEST_CASE("base metric on the orthonormal tangent basis") {
  Setup s(3);
  const int D = s.B.dim();
  REQUIRE(D == 6);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      auto m = base_metric(s.B.elements[a], s.B.elements[b], s.C);
      auto mt = base_metric(s.B.elements[b], s.B.elements[a], s.C);
      CHECK(std::abs(m.g - (a == b ? 1.0 : 0.0)) <= 1e-8);
      CHECK(std::abs(m.g - std::conj(mt.g)) <= 1e-10);
    }
  for (int a = 0; a < D; ++a) {
    auto m = base_metric(s.B.elements[a], s.B.elements[a], s.C);
    CHECK(m.g.real() > 0);
    CHECK(std::abs(m.g.imag()) <= 1e-12);
    CHECK(std::abs(m.omega_M) <= 1e-14);
    CHECK(std::abs(m.omega_T) <= 1e-14);
  }
  // omega(u, iu) = Re g(iu, iu) = |u|^2
  TangentVector iu = s.B.elements[0];
  iu.mu.values *= cd(0, 1);
  CHECK(base_metric(s.B.elements[0], iu, s.C).omega_T.real() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("base metric rejects mismatched kinds") {
  Setup s(2);
  TangentVector ok{s.b.tx.elements[0], Field{kinds::f01(Coef::AdE), {}}};
  TangentVector bad = ok;
  bad.mu.kind = kinds::f10(Coef::TX);
  CHECK_THROWS_AS(base_metric(ok, bad, s.C), Error);
  CHECK_THROWS_AS(base_metric(bad, ok, s.C), Error);
}

TEST_CASE("metric Hessian: mu-only combinations keep only the last two terms") {
  const auto& H = hessian3();
  const int D = H.dims[0], ntx = 3;
  for (const auto& [label, part] : H.terms) {
    double mu_norm = 0, nu_norm = 0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b)
        for (int c = 0; c < D; ++c)
          for (int d = 0; d < D; ++d) {
            double v = std::norm(part[H.index({a, b, c, d})]);
            if (a < ntx && b < ntx && c < ntx && d < ntx) mu_norm += v;
            if (a >= ntx && b >= ntx && c >= ntx && d >= ntx) nu_norm += v;
          }
    CAPTURE(label);
    if (label == "T10" || label == "T11") {
      CHECK(mu_norm > 1e-6);
    } else {
      CHECK(mu_norm == 0.0);
    }
    if (label == "T1" || label == "T2") {
      CHECK(nu_norm > 1e-6);
    } else {
      CHECK(nu_norm == 0.0);
    }
  }
}

TEST_CASE("metric Hessian Hermitian defect and audit") {
  const auto& H = hessian3();
  double d = hessian_hermitian_defect(H);
  CHECK(std::isfinite(d));
  CHECK(d <= 0.05);
  CHECK(H.meta["hermitian_defect"].get<double>() == d);
  for (const auto& z : H.entries) CHECK(std::isfinite(std::abs(z)));

  Setup s(3);
  AuditReport a = audit_metric_hessian(s.B, s.ctx);
  CHECK(a.verbatim_defect == doctest::Approx(d).epsilon(1e-12));
  CHECK(a.audited_defect <= a.verbatim_defect);
  CHECK(a.audited_defect <= 1e-10);
  REQUIRE(a.changes.size() == 1);
  CHECK(a.changes[0].term == "T7");
  CHECK(a.changes[0].variant == "barred");
}

TEST_CASE("metric Hessian is the sum of its terms") {
  const auto& H = hessian3();
  std::vector<cd> sum(H.entries.size(), 0.0);
  for (const auto& [l, v] : H.terms)
    for (size_t k = 0; k < v.size(); ++k) sum[k] += v[k];
  double diff = 0;
  for (size_t k = 0; k < sum.size(); ++k) diff = std::max(diff, std::abs(sum[k] - H.entries[k]));
  CHECK(diff <= 1e-12);
}

TEST_CASE("trace of the projection is the basis dimension") {
  const Calculus& C = *testutil::calc(2);
  const auto& b = bases(2);
  CHECK(trace_over_basis([](const Field& f) { return f; }, b.ende, C).real() == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(trace_over_basis([&](const Field& f) { return project(f, b.ade, C); }, b.ade, C).real() ==
        doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("projection-trace identity against a dense matrix") {
  const Calculus& C = *testutil::calc(2);
  const auto& b = bases(2);
  const int N = static_cast<int>(b.ade.elements[0].values.size());
  REQUIRE(N <= 2000);
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd F(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) F(i, j) = cd(nd(g), nd(g)) / double(N);
  const Eigen::VectorXd m = C.mass(b.ade.elements[0].kind);
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(N, N);
  for (const auto& e : b.ade.elements) P += e.values * (m.cast<cd>().cwiseProduct(e.values)).adjoint();
  cd brute = (P * F * P).trace();
  cd sum = trace_over_basis([&](const Field& f) { return Field{f.kind, F * f.values}; }, b.ade, C);
  CHECK(std::abs(brute - sum) <= 1e-8 * std::max(1.0, std::abs(sum)));
}

TEST_CASE("Ricci form: zero slots, Hermitian defect reported") {
  Setup s(2);
  Slots z;
  z[1] = mu_only(Field{kinds::beltrami, {}}, Coef::AdE);
  z[2] = z[1];
  CHECK(evaluate(builtin_formula("ricci_form"), z, s.ctx) == cd(0.0));
  TensorResult R = ricci_form(s.B, s.ctx);
  CHECK(std::isfinite(ricci_hermitian_defect(R)));
  // mu-only first group is Hermitian under the swap 1 <-> 2
  const auto& r1 = term_part(R, "R1");
  const int D = s.B.dim();
  double num = 0, den = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      cd x = cd(0, 1) * r1[a * D + b], y = cd(0, 1) * r1[b * D + a];
      num += std::norm(x - std::conj(y));
      den += std::norm(x);
    }
  CHECK(den > 0);
  CHECK(std::sqrt(num / den) <= 1e-8);
}

TEST_CASE("evaluators are linear in each slot") {
  Setup s(2);
  const auto& b = s.b;
  Slots base;
  base[0] = {b.tx.elements[2], b.ade.elements[0]};
  base[1] = {b.tx.elements[1], b.ade.elements[1]};
  base[2] = {b.tx.elements[2], b.ade.elements[2]};
  base[3] = {b.tx.elements[0], b.ade.elements[1]};
  base[4] = {b.tx.elements[1], b.ade.elements[0]};
  for (const std::string name : {"metric_hessian", "ricci_form", "logdet_ade", "kahler_lemma"}) {
    const FormulaIR& f = builtin_formula(name);
    for (int slot : f.slots) {
      CAPTURE(name);
      CAPTURE(slot);
      Slots x = base, y = base, xy = base;
      y[slot] = {combo(b.tx, {0.3, -0.2, 0.9}), combo(b.ade, {-0.4, 0.7, 0.1})};
      const double a = 0.7, c = -1.3;
      xy[slot].mu.values = a * x[slot].mu.values + c * y[slot].mu.values;
      xy[slot].nu.values = a * x[slot].nu.values + c * y[slot].nu.values;
      cd lhs = evaluate(f, xy, s.ctx), rhs = a * evaluate(f, x, s.ctx) + c * evaluate(f, y, s.ctx);
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    }
  }
}

TEST_CASE("log det variations") {
  Setup s(2);
  LogdetVariations v = logdet_variations(s.B, s.ctx);
  CHECK(v.ade.meta["filled_by_symmetry"].get<int>() == 9);
  const int D = s.B.dim();
  for (int a = 3; a < D; ++a)
    for (int b = 0; b < 3; ++b) CHECK(v.ade.at({a, b}) == std::conj(v.ade.at({b, a})));
  // mu-only block, n = 2: omega_T enters with -3i/6pi
  const FormulaIR& f = builtin_formula("logdet_ade");
  for (const auto& t : f.terms)
    if (t.label == "mm_omega") {
      cd c = t.coefficient * rank_factor(t.rank_factor, 2);
      CHECK(std::abs(c - cd(0, -3.0 / (6 * std::numbers::pi))) <= 1e-15);
    }
  const auto& om = term_part(v.ade, "mm_omega");
  for (int a = 0; a < 3; ++a) {
    auto bm = base_metric(s.B.elements[a], s.B.elements[a], s.C);
    CHECK(std::abs(om[a * D + a] - cd(0, -3.0 / (6 * std::numbers::pi)) * cd(0, 0.5) * bm.g) <= 1e-12);
  }
  Slots z;
  z[1] = mu_only(Field{kinds::beltrami, {}}, Coef::AdE);
  z[2] = z[1];
  CHECK(evaluate(f, z, s.ctx) == cd(0.0));
  CHECK(evaluate(builtin_formula("logdet_delta0"), z, s.ctx) == cd(0.0));
}

TEST_CASE("Kahler residual vanishes exactly without nu or mu2") {
  Setup s(2);
  TangentVector nu0 = s.B.elements[3], nu1 = s.B.elements[4], mu2 = s.B.elements[0];
  TangentVector none{Field{kinds::beltrami, {}}, Field{kinds::f01(Coef::AdE), {}}};
  CHECK(kahler_first_derivative_residual(none, nu1, mu2, s.ctx) == 0.0);
  CHECK(kahler_first_derivative_residual(nu0, nu1, none, s.ctx) == 0.0);
  CHECK(kahler_first_derivative_residual(mu2, nu1, mu2, s.ctx) == 0.0);
  CHECK(kahler_first_derivative_residual(nu0, nu1, mu2, s.ctx) > 0.0);
}

TEST_CASE("Kahler residual converges under refinement") {
  double prev = 0;
  for (int level = 2; level <= 4; ++level) {
    Setup s(level);
    KahlerSummary k = kahler_residual_summary(s.B, s.ctx);
    CHECK(k.triples == 27);
    CHECK(k.rms <= k.max);
    if (level == 3) CHECK(k.rms <= 1e-3);
    if (level > 2) CHECK(prev / k.rms >= 2.0);
    prev = k.rms;
  }
}

TEST_CASE("Ricci potential identity report") {
  Setup s(2);
  IdentityReport r = ricci_potential_identity(s.B, s.ctx, 2);
  const double pi = std::numbers::pi;
  CHECK(r.coefficients_exact);
  CHECK(r.coefficient_M == 2 / (2 * pi));
  CHECK(r.coefficient_T == 4 / (12 * pi));
  CHECK(std::isfinite(r.relative));
  CHECK(r.lhs.rows() == 6);
  CHECK((r.residual - (r.lhs - r.rhs)).norm() == 0.0);
  CHECK(r.block_residual.size() == 4);
  CHECK(!r.attribution.empty());
  auto j = identity_to_json(r);
  CHECK(j["coefficients"]["exact"].get<bool>());
}

TEST_CASE("tensor JSON keeps the per-term breakdown") {
  Setup s(2);
  TensorResult R = evaluate_tensor(builtin_formula("base_metric"), s.B, s.ctx);
  auto j = tensor_to_json(R);
  CHECK(j["terms"].size() == 2);
  CHECK(j["dims"] == nlohmann::json::array({6, 6}));
  CHECK((R.matrix() - Eigen::MatrixXcd::Identity(6, 6)).norm() <= 1e-8);
}
