#include "hodgelab/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hodgelab/deform.hpp"
#include "hodgelab/errors.hpp"
#include "hodgelab/spectral.hpp"

namespace hl {

const char* version() { return HODGELAB_VERSION; }

// ---------------- config ----------------

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(ws) - a + 1);
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T x{};
  is >> x;
  if (is.fail() || !is.eof()) throw Error(ErrorKind::ConfigError, "bad value for " + key + ": '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::ConfigError, "bad value for " + key + ": '" + v + "'");
}

}  // namespace

void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "level") c.level = parse_num<int>(key, v);
  else if (key == "level_min") c.level_min = parse_num<int>(key, v);
  else if (key == "level_max") c.level_max = parse_num<int>(key, v);
  else if (key == "rank") c.rank = parse_num<int>(key, v);
  else if (key == "degree") c.degree = parse_num<int>(key, v);
  else if (key == "seed") c.seed = parse_num<std::uint64_t>(key, v);
  else if (key == "shift") c.shift = parse_num<double>(key, v);
  else if (key == "delta0c") {
    if (v != "functions" && v != "tx") throw Error(ErrorKind::ConfigError, "delta0c must be functions or tx");
    c.delta0c = v;
  } else if (key == "audit") c.audit = parse_bool(key, v);
  else if (key == "formula") c.formula = v;
  else if (key == "operator") {
    if (v != "lap0" && v != "lapAdE") throw Error(ErrorKind::ConfigError, "operator must be lap0 or lapAdE");
    c.op = v;
  } else if (key == "count") c.count = parse_num<int>(key, v);
  else if (key == "grid") c.grid = parse_num<int>(key, v);
  else if (key == "scale") c.scale = parse_num<double>(key, v);
  else if (key == "trunc_radius") c.trunc_radius = parse_num<double>(key, v);
  else if (key == "max_iter") c.max_iter = parse_num<int>(key, v);
  else if (key == "tx_min_gap_ratio") c.tx_min_gap_ratio = parse_num<double>(key, v);
  else if (key == "output") c.output = v;
  else if (key == "criteria") {
    c.criteria.clear();
    if (v != "all") {
      std::istringstream is(v);
      std::string tok;
      while (std::getline(is, tok, ',')) {
        int id = parse_num<int>(key, trim(tok));
        if (id < 1 || id > 10) throw Error(ErrorKind::ConfigError, "criteria ids run from 1 to 10");
        c.criteria.push_back(id);
      }
    }
  } else {
    throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
  }
  if (c.level_min > c.level_max) throw Error(ErrorKind::ConfigError, "level_min exceeds level_max");
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(n) + ": expected key = value");
    set_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["level"] = c.level;
  j["level_min"] = c.level_min;
  j["level_max"] = c.level_max;
  j["rank"] = c.rank;
  j["degree"] = c.degree;
  j["seed"] = c.seed;
  j["shift"] = c.shift;
  j["delta0c"] = c.delta0c;
  j["audit"] = c.audit;
  j["formula"] = c.formula;
  j["operator"] = c.op;
  j["count"] = c.count;
  j["grid"] = c.grid;
  j["scale"] = c.scale;
  j["trunc_radius"] = c.trunc_radius;
  j["max_iter"] = c.max_iter;
  j["tx_min_gap_ratio"] = c.tx_min_gap_ratio;
  j["output"] = c.output;
  j["criteria"] = c.criteria;
  return j;
}

std::string config_to_text(const RunConfig& c) {
  std::ostringstream os;
  const nlohmann::json j = config_to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const nlohmann::json& v = it.value();
    os << k << " = ";
    if (k == "criteria") {
      if (c.criteria.empty()) os << "all";
      for (size_t i = 0; i < c.criteria.size(); ++i) os << (i ? "," : "") << c.criteria[i];
    } else if (v.is_string()) {
      os << v.get<std::string>();
    } else {
      os << v.dump();
    }
    os << "\n";
  }
  return os.str();
}

// ---------------- workspace ----------------

Workspace::Workspace(RunConfig cfg) : cfg_(std::move(cfg)) {
  rep_ = std::make_shared<const UnitaryRep>(random_unitary_rep(bolza_group(), cfg_.rank, cfg_.degree, cfg_.seed));
}

std::shared_ptr<const Calculus> Workspace::calculus(int level) {
  auto it = calc_.find(level);
  if (it != calc_.end()) return it->second;
  auto m = std::make_shared<const SurfaceMesh>(mesh_fundamental_domain(bolza_group(), level));
  return calc_.emplace(level, std::make_shared<const Calculus>(m, rep_)).first->second;
}

const HarmonicBasis& Workspace::basis(Coef c, int level) {
  auto key = std::make_pair(static_cast<int>(c), level);
  auto it = bases_.find(key);
  if (it != bases_.end()) return it->second;
  HarmonicOptions opt;
  opt.tx_min_gap_ratio = cfg_.tx_min_gap_ratio;
  return bases_.emplace(key, harmonic_basis(c, *calculus(level), opt)).first->second;
}

TensorContext Workspace::context(int level) {
  TensorOptions opt;
  opt.delta0c = cfg_.delta0c;
  opt.shift = cfg_.shift;
  const HarmonicBasis& tx = basis(Coef::TX, level);
  const HarmonicBasis& e = basis(Coef::AdE, level);
  return TensorContext{*calculus(level), tx, e, opt};
}

// ---------------- criteria ----------------

namespace {

CriterionResult start(int id, const std::string& name) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  return r;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::vector<int> levels(const RunConfig& c) {
  std::vector<int> v;
  for (int l = c.level_min; l <= c.level_max; ++l) v.push_back(l);
  return v;
}

CriterionResult c1_area(Workspace& ws) {
  CriterionResult r = start(1, "gauss_bonnet");
  const int L = ws.config().level;
  ValidationReport v = validate_mesh(ws.calculus(L)->mesh());
  r.details = {{"level", L}, {"area", v.area}, {"reference", 4 * M_PI}, {"relative_error", v.area_error},
               {"tolerance", 1e-3}, {"pairing_residual", v.pairing_residual}};
  r.pass = v.area_error <= 1e-3;
  r.summary = "area error " + fmt(v.area_error) + " at level " + std::to_string(L) + " (tol 1e-3)";
  return r;
}

CriterionResult c2_dims(Workspace& ws) {
  CriterionResult r = start(2, "harmonic_dimensions");
  const std::map<std::string, int> want = {{"TX", 3}, {"EndE", 5}, {"AdE", 3}, {"ker_lap_AdE", 0}};
  r.pass = true;
  nlohmann::json per = nlohmann::json::object();
  std::string gaps;
  for (int L : levels(ws.config())) {
    const auto& C = *ws.calculus(L);
    const HarmonicBasis& tx = ws.basis(Coef::TX, L);
    std::map<std::string, int> got = {{"TX", tx.dim()},
                                      {"EndE", ws.basis(Coef::EndE, L).dim()},
                                      {"AdE", ws.basis(Coef::AdE, L).dim()},
                                      {"ker_lap_AdE", static_cast<int>(C.kernel(C.assemble("laplacian", kinds::fun(Coef::AdE))).cols())}};
    nlohmann::json j = got;
    j["tx_gap_ratio"] = tx.gap_ratio;
    per[std::to_string(L)] = j;
    if (got != want) r.pass = false;
    gaps += (gaps.empty() ? "" : "/") + fmt(tx.gap_ratio);
  }
  r.details = {{"expected", want}, {"levels", per}};
  r.summary = "TX/EndE/AdE/ker = 3/5/3/0 " + std::string(r.pass ? "at" : "NOT at") + " every level " +
              std::to_string(ws.config().level_min) + "-" + std::to_string(ws.config().level_max) +
              " (TX gap ratios " + gaps + ")";
  return r;
}

CriterionResult c3_hodge(Workspace& ws) {
  CriterionResult r = start(3, "hodge_exactness");
  const int L = ws.config().level;
  const Calculus& C = *ws.calculus(L);
  double adj = 0;
  for (Coef c : {Coef::trivial, Coef::EndE, Coef::AdE, Coef::TX}) {
    DiscreteOperator d = C.assemble("dbar", kinds::fun(c));
    DiscreteOperator ds = C.adjoint(d);
    for (int k = 0; k < 20; ++k) {
      Field f = C.random(kinds::fun(c), 100 + k), g = C.random(d.cod, 900 + k);
      double e = std::abs(C.inner(C.apply(d, f), g) - C.inner(f, C.apply(ds, g))) /
                 (C.norm(C.apply(d, f)) * C.norm(g));
      adj = std::max(adj, e);
    }
  }
  double orth = 0, idem = 0;
  for (Coef c : {Coef::EndE, Coef::AdE}) {
    const HarmonicBasis& b = ws.basis(c, L);
    Field f = C.random(kinds::f01(c), 21);
    DiscreteOperator d = C.assemble("dbar", kinds::fun(c));
    DiscreteOperator lap = C.assemble("laplacian", kinds::fun(c));
    Field ex = C.apply(d, C.green_apply(lap, C.apply(C.adjoint(d), f), 0.0));
    Field h = project(f, b, C);
    Field co{f.kind, f.values - ex.values - h.values};
    const double n2 = std::pow(C.norm(f), 2);
    orth = std::max({orth, std::abs(C.inner(ex, h)) / n2, std::abs(C.inner(ex, co)) / n2, std::abs(C.inner(h, co)) / n2});
  }
  for (Coef c : {Coef::EndE, Coef::AdE, Coef::TX}) {
    const HarmonicBasis& b = ws.basis(c, L);
    Field f = C.random(b.elements[0].kind, 31);
    Field p = project(f, b, C), pp = project(p, b, C);
    idem = std::max(idem, C.norm(Field{p.kind, pp.values - p.values}) / C.norm(p));
  }
  r.pass = adj <= 1e-10 && orth <= 1e-8 && idem <= 1e-12;
  r.details = {{"level", L},
               {"adjointness", adj},
               {"orthogonality", orth},
               {"idempotence", idem},
               {"tolerances", {1e-10, 1e-8, 1e-12}}};
  r.summary = "adjointness " + fmt(adj) + ", orthogonality " + fmt(orth) + ", idempotence " + fmt(idem);
  return r;
}

CriterionResult c4_beltrami(Workspace& ws) {
  CriterionResult r = start(4, "beltrami_solver");
  const RunConfig& cfg = ws.config();
  BeltramiParams p;
  p.grid = cfg.grid;
  p.max_iter = cfg.max_iter;

  BeltramiParams p64 = p;
  p64.grid = 64;
  MappingGrid g0 = solve_beltrami(zero_coefficient(), p64);
  double id_err = 0;
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 7; ++j) {
      cd z(-0.6 + 0.2 * i, -0.6 + 0.2 * j);
      id_err = std::max(id_err, std::abs(g0(z) - z));
    }

  const cd c(0.06, 0.08);
  MappingGrid gc = solve_beltrami(constant_coefficient(c, 0, 0.5), p);
  double aff = 0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      cd z(-0.2 + 0.1 * i, -0.2 + 0.1 * j);
      aff = std::max(aff, std::abs(gc.dbar_at(z) / gc.del_at(z) - c));
    }

  const int L = cfg.level;
  const Calculus& C = *ws.calculus(L);
  TangentVector tv{ws.basis(Coef::TX, L).elements[0], C.zero(kinds::f01(Coef::EndE))};
  double rel[2];
  for (int k = 0; k < 2; ++k) {
    BeltramiCoefficient mu = modified_coefficient(tv, cfg.scale / (1 << k), C);
    mu.trunc_radius = cfg.trunc_radius;
    rel[k] = deformed_generators(solve_beltrami(mu, p), bolza_group()).relator_residual;
  }
  const double ratio = rel[0] / rel[1];
  r.pass = id_err <= 1e-12 && aff <= 1e-6 && std::abs(ratio - 2) <= 0.4;
  r.details = {{"identity_error", id_err},
               {"constant_coefficient_error", aff},
               {"constant_coefficient_residual", gc.residual},
               {"eps", cfg.scale},
               {"relator_residual", {rel[0], rel[1]}},
               {"ratio", ratio}};
  r.summary = "identity " + fmt(id_err) + ", affine " + fmt(aff) + ", relator ratio " + fmt(ratio) + " (want 2 +-20%)";
  return r;
}

CriterionResult c5_derivatives(Workspace& ws) {
  CriterionResult r = start(5, "operator_derivatives");
  const int L = ws.config().level;
  const Calculus& C = *ws.calculus(L);
  const double eps = 1e-4;
  std::vector<TangentVector> dirs = {{ws.basis(Coef::TX, L).elements[0], C.zero(kinds::f01(Coef::EndE))},
                                     {C.zero(kinds::beltrami), ws.basis(Coef::EndE, L).elements[2]}};
  double worst = 0;
  nlohmann::json rows = nlohmann::json::array();
  const char* names[2] = {"mu", "nu"};
  for (size_t i = 0; i < dirs.size(); ++i)
    for (DerivativeSlot s : {DerivativeSlot::dbar_sections, DerivativeSlot::dbarstar_forms}) {
      OperatorDerivative D = operator_derivative(dirs[i], s, C);
      DiscreteOperator fp = operator_family(dirs[i], s, eps, C), fm = operator_family(dirs[i], s, -eps, C);
      Field f = C.random(D.op.dom, 5);
      Eigen::VectorXcd fd = (fp.A * f.values - fm.A * f.values) / (2 * eps);
      Eigen::VectorXcd ex = D.op.A * f.values;
      double e = (fd - ex).norm() / ex.norm();
      worst = std::max(worst, e);
      rows.push_back({{"direction", names[i]}, {"operator", s == DerivativeSlot::dbar_sections ? "dbar" : "dbarstar"},
                      {"relative_error", e}});
    }
  r.pass = worst <= 1e-6;
  r.details = {{"level", L}, {"eps", eps}, {"checks", rows}};
  r.summary = "worst finite-difference mismatch " + fmt(worst) + " (tol 1e-6)";
  return r;
}

CriterionResult c6_kahler(Workspace& ws) {
  CriterionResult r = start(6, "kahler_cancellation");
  const RunConfig& cfg = ws.config();
  nlohmann::json per = nlohmann::json::object();
  std::vector<double> rms;
  for (int L : levels(cfg)) {
    TensorContext ctx = ws.context(L);
    KahlerSummary k = kahler_residual_summary(tangent_basis(ctx.tx, ctx.e, ctx.C), ctx);
    per[std::to_string(L)] = {{"rms", k.rms}, {"max", k.max}, {"triples", k.triples}};
    rms.push_back(k.rms);
  }
  r.pass = true;
  std::string chain;
  for (size_t i = 0; i < rms.size(); ++i) {
    const int L = cfg.level_min + static_cast<int>(i);
    if (L == cfg.level && rms[i] > 1e-3) r.pass = false;
    if (i > 0 && rms[i - 1] / rms[i] < 2) r.pass = false;
    chain += (i ? " -> " : "") + fmt(rms[i]);
  }
  r.details = {{"levels", per}, {"statistic", "rms over unit harmonic inputs"}, {"tolerance", 1e-3}, {"min_ratio", 2}};
  r.summary = "rms residual " + chain + " (<= 1e-3 at level " + std::to_string(cfg.level) + ", >= 2x per level)";
  return r;
}

CriterionResult c7_hessian(Workspace& ws) {
  CriterionResult r = start(7, "hessian_hermitian");
  const RunConfig& cfg = ws.config();
  nlohmann::json per = nlohmann::json::object();
  std::vector<double> d;
  std::string chain;
  for (int L : levels(cfg)) {
    TensorContext ctx = ws.context(L);
    TangentBasis B = tangent_basis(ctx.tx, ctx.e, ctx.C);
    AuditReport a = audit_metric_hessian(B, ctx);
    nlohmann::json changes = nlohmann::json::array();
    for (const auto& c : a.changes) changes.push_back({{"unit", c.unit}, {"sign", c.sign}, {"variant", c.variant}});
    per[std::to_string(L)] = {{"verbatim", a.verbatim_defect}, {"audited", a.audited_defect}, {"audit_changes", changes}};
    d.push_back(a.verbatim_defect);
    chain += (chain.empty() ? "" : " -> ") + fmt(a.verbatim_defect);
  }
  r.pass = true;
  for (size_t i = 0; i < d.size(); ++i) {
    const int L = cfg.level_min + static_cast<int>(i);
    if (L == cfg.level && d[i] > 0.05) r.pass = false;
    if (i > 0 && !(d[i] < d[i - 1])) r.pass = false;
  }
  r.details = {{"levels", per}, {"tolerance", 0.05}, {"judged_on", "verbatim transcription"}, {"delta0c", cfg.delta0c}};
  r.summary = "verbatim defect " + chain + " (<= 5% at level " + std::to_string(cfg.level) + ", decreasing)";
  const auto& audited = per[std::to_string(cfg.level)];
  if (!audited.is_null()) r.summary += "; audited " + fmt(audited["audited"].get<double>());
  return r;
}

CriterionResult c8_identity(Workspace& ws) {
  CriterionResult r = start(8, "ricci_potential_identity");
  const RunConfig& cfg = ws.config();
  nlohmann::json per = nlohmann::json::object();
  std::vector<double> rel;
  bool exact = true;
  std::string chain;
  double fm = 0, ft = 0, cm = 0, ct = 0;
  for (int L : levels(cfg)) {
    TensorContext ctx = ws.context(L);
    IdentityReport id = ricci_potential_identity(tangent_basis(ctx.tx, ctx.e, ctx.C), ctx, cfg.rank);
    nlohmann::json j = identity_to_json(id);
    j.erase("lhs");
    j.erase("rhs");
    per[std::to_string(L)] = j;
    rel.push_back(id.relative);
    exact = exact && id.coefficients_exact;
    chain += (chain.empty() ? "" : " -> ") + fmt(id.relative);
    fm = id.fitted_M;
    ft = id.fitted_T;
    cm = id.coefficient_M;
    ct = id.coefficient_T;
  }
  bool dec = true;
  for (size_t i = 1; i < rel.size(); ++i) dec = dec && rel[i] < rel[i - 1];
  r.pass = dec && exact;
  r.details = {{"levels", per},
               {"strictly_decreasing", dec},
               {"coefficients_exact", exact},
               {"implied_normalization", {{"omega_M", cm != 0 ? fm / cm : 0.0}, {"omega_T", ct != 0 ? ft / ct : 0.0}}}};
  r.summary = "relative residual " + chain + (dec ? " (decreasing)" : " (NOT decreasing)") + ", coefficients " +
              (exact ? "exact" : "NOT exact") + "; fitted/read omega_M " + fmt(cm != 0 ? fm / cm : 0.0) +
              ", omega_T " + fmt(ct != 0 ? ft / ct : 0.0);
  return r;
}

CriterionResult c9_zeta(Workspace& ws) {
  CriterionResult r = start(9, "zeta_pipeline");
  const RunConfig& cfg = ws.config();
  ComparisonReport t = torus_selftest();
  const double rel_torus = std::abs(std::exp(t.value) - std::exp(t.reference)) / std::exp(t.reference);

  const int L = cfg.level;
  const Calculus& C = *ws.calculus(L);
  nlohmann::json ld = nlohmann::json::object();
  bool stable = true;
  for (Coef c : {Coef::trivial, Coef::AdE}) {
    LaplaceProblem lap = surface_laplacian(C, c);
    LogDet a = zeta_logdet(eigen_spectrum(lap, cfg.count));
    LogDet b = zeta_logdet(eigen_spectrum(lap, 2 * cfg.count));
    const double change = std::abs(a.logdet - b.logdet);
    stable = stable && change < b.err;
    ld[c == Coef::trivial ? "lap0" : "lapAdE"] = {{"m", {cfg.count, 2 * cfg.count}},
                                                   {"logdet", {a.logdet, b.logdet}},
                                                   {"err", b.err},
                                                   {"change", change}};
  }

  Eigen::MatrixXcd V = haar_unitary(cfg.rank, cfg.seed + 1000);
  auto rep2 = std::make_shared<const UnitaryRep>(ws.rep()->conjugated(V));
  Calculus C2(C.mesh_ptr(), rep2);
  SpectralSummary s0 = eigen_spectrum(surface_laplacian(C, Coef::AdE), cfg.count);
  SpectralSummary s1 = eigen_spectrum(surface_laplacian(C2, Coef::AdE), cfg.count);
  const double inv = (s0.eigenvalues - s1.eigenvalues).cwiseAbs().maxCoeff();

  r.pass = rel_torus <= 0.01 && stable && inv <= 1e-8;
  r.details = {{"torus", {{"det", std::exp(t.value)}, {"reference", std::exp(t.reference)}, {"relative_error", rel_torus}}},
               {"bolza_level", L},
               {"bolza", ld},
               {"conjugation_max_change", inv}};
  r.summary = "torus det error " + fmt(rel_torus) + ", log det doubling " + (stable ? "within" : "OUTSIDE") +
              " error, conjugation change " + fmt(inv);
  return r;
}

// a reduced report assembled from scratch: meshes, bases, tensors, spectra
std::string determinism_payload(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.level = cfg.level_min;
  Workspace ws(c);
  nlohmann::json j = report_envelope("determinism", c);
  const int L = c.level;
  j["mesh"] = mesh_to_json(ws.calculus(L)->mesh());
  TensorContext ctx = ws.context(L);
  TangentBasis B = tangent_basis(ctx.tx, ctx.e, ctx.C);
  j["ricci"] = tensor_to_json(ricci_form(B, ctx));
  j["logdet_ade"] = tensor_to_json(logdet_variations(B, ctx).ade);
  j["identity"] = identity_to_json(ricci_potential_identity(B, ctx, c.rank));
  j["spectrum"] = summary_to_json(eigen_spectrum(surface_laplacian(ctx.C, Coef::AdE), 20));
  return dump_report(j);
}

CriterionResult c10_determinism(Workspace& ws) {
  CriterionResult r = start(10, "determinism");
  const std::string a = determinism_payload(ws.config()), b = determinism_payload(ws.config());
  r.pass = a == b;
  r.details = {{"bytes", a.size()}, {"identical", r.pass}, {"hash", std::to_string(std::hash<std::string>{}(a))}};
  r.summary = std::to_string(a.size()) + " byte report " + (r.pass ? "identical" : "DIFFERS") + " across two runs";
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, Workspace& ws) {
  static const std::map<int, std::pair<std::string, CriterionResult (*)(Workspace&)>> table = {
      {1, {"gauss_bonnet", c1_area}},          {2, {"harmonic_dimensions", c2_dims}},
      {3, {"hodge_exactness", c3_hodge}},      {4, {"beltrami_solver", c4_beltrami}},
      {5, {"operator_derivatives", c5_derivatives}}, {6, {"kahler_cancellation", c6_kahler}},
      {7, {"hessian_hermitian", c7_hessian}},  {8, {"ricci_potential_identity", c8_identity}},
      {9, {"zeta_pipeline", c9_zeta}},         {10, {"determinism", c10_determinism}}};
  auto it = table.find(id);
  if (it == table.end()) throw Error(ErrorKind::ConfigError, "no criterion " + std::to_string(id));
  try {
    return it->second.second(ws);
  } catch (const Error& e) {
    if (e.is_config()) throw;
    CriterionResult r = start(id, it->second.first);
    r.breakdown = true;
    r.summary = e.what();
    r.details = {{"error", error_name(e.kind())}, {"message", e.what()}};
    return r;
  }
}

std::vector<CriterionResult> run_acceptance(Workspace& ws, const std::function<void(const CriterionResult&)>& progress) {
  std::vector<int> ids = ws.config().criteria;
  if (ids.empty())
    for (int i = 1; i <= 10; ++i) ids.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : ids) {
    out.push_back(run_criterion(id, ws));
    if (progress) progress(out.back());
  }
  return out;
}

std::string criterion_line(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "criterion %2d %s %s: ", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str());
  return head + r.summary;
}

nlohmann::json report_envelope(const std::string& command, const RunConfig& c) {
  return {{"schema", "hodgelab-report/1"}, {"command", command}, {"version", version()}, {"config", config_to_json(c)}};
}

nlohmann::json acceptance_report(const RunConfig& c, const std::vector<CriterionResult>& results) {
  nlohmann::json j = report_envelope("verify", c);
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& r : results) {
    arr.push_back({{"id", r.id},
                   {"name", r.name},
                   {"pass", r.pass},
                   {"breakdown", r.breakdown},
                   {"summary", r.summary},
                   {"details", r.details}});
    all = all && r.pass;
  }
  j["criteria"] = arr;
  j["pass"] = all;
  return j;
}

std::string dump_report(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace hl
