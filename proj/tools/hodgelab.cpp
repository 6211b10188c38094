// hodgelab: build instances, run the verification suite, write JSON reports
#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hodgelab/acceptance.hpp"
#include "hodgelab/deform.hpp"
#include "hodgelab/errors.hpp"
#include "hodgelab/spectral.hpp"

using namespace hl;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
  out << text;
}

fs::path out_dir(const RunConfig& c) {
  fs::path d(c.output);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw Error(ErrorKind::ConfigError, "cannot create output directory " + d.string());
  return d;
}

void emit(const RunConfig& c, const std::string& name, const nlohmann::json& j) {
  fs::path p = out_dir(c) / name;
  write_file(p, dump_report(j));
  std::cout << "wrote " << p.string() << "\n";
}

const char* coef_name(Coef c) {
  switch (c) {
    case Coef::trivial: return "trivial";
    case Coef::fundamental: return "E";
    case Coef::EndE: return "EndE";
    case Coef::AdE: return "AdE";
    case Coef::TX: return "TX";
    case Coef::K2: return "K2";
  }
  return "?";
}

std::string formula_name(const std::string& s) {
  if (s == "ricci") return "ricci_form";
  if (s == "hessian" || s == "metric") return "metric_hessian";
  if (s == "logdet") return "logdet_ade";
  if (s == "identity") return "ricci_potential";
  if (s == "kahler") return "kahler_lemma";
  return s;
}

int cmd_init(const RunConfig& c) {
  auto m = mesh_fundamental_domain(bolza_group(), c.level);
  auto rep = random_unitary_rep(bolza_group(), c.rank, c.degree, c.seed);
  nlohmann::json mj = report_envelope("init", c);
  mj["mesh"] = mesh_to_json(m);
  ValidationReport v = validate_mesh(m);
  mj["validation"] = {{"pass", v.pass}, {"area", v.area}, {"area_error", v.area_error},
                      {"pairing_residual", v.pairing_residual}, {"min_quality", v.min_quality}, {"failures", v.failures}};
  emit(c, "mesh.json", mj);
  nlohmann::json rj = report_envelope("init", c);
  rj["rep"] = rep_to_json(rep);
  RepResiduals rr = rep_residuals(rep);
  rj["residuals"] = {{"relator", rr.relator_residual}, {"irreducibility_margin", rr.irreducibility_margin}, {"unitarity", rr.unitarity}};
  emit(c, "rep.json", rj);
  return v.pass ? 0 : 1;
}

int cmd_hodge(const RunConfig& c) {
  Workspace ws(c);
  const Calculus& C = *ws.calculus(c.level);
  nlohmann::json j = report_envelope("hodge", c);
  nlohmann::json bases = nlohmann::json::object();
  for (Coef k : {Coef::TX, Coef::EndE, Coef::AdE}) {
    const HarmonicBasis& b = ws.basis(k, c.level);
    const double gram = (b.gram - Eigen::MatrixXcd::Identity(b.dim(), b.dim())).norm();
    std::vector<double> ev(b.eigenvalues.data(), b.eigenvalues.data() + b.eigenvalues.size());
    bases[coef_name(k)] = {{"dim", b.dim()}, {"gap_ratio", b.gap_ratio}, {"eigenvalues", ev},
                           {"laplacian_residual", b.laplacian_residual}, {"gram_defect", gram}};
    std::cout << coef_name(k) << ": dim " << b.dim() << "\n";
  }
  j["bases"] = bases;
  nlohmann::json ker = nlohmann::json::object();
  for (Coef k : {Coef::trivial, Coef::EndE, Coef::AdE})
    ker[coef_name(k)] = C.kernel(C.assemble("laplacian", kinds::fun(k))).cols();
  j["section_kernels"] = ker;
  emit(c, "hodge.json", j);
  return 0;
}

int cmd_tensors(const RunConfig& c) {
  Workspace ws(c);
  TensorContext ctx = ws.context(c.level);
  TangentBasis B = tangent_basis(ctx.tx, ctx.e, ctx.C);
  const std::string name = formula_name(c.formula);
  const FormulaIR& f = builtin_formula(name);
  nlohmann::json j = report_envelope("tensors", c);
  j["formula"] = formula_to_json(f);
  TensorResult r = evaluate_tensor(f, B, ctx);
  if (name == "logdet_ade") r = logdet_variations(B, ctx).ade;
  j["result"] = tensor_to_json(r);
  if (r.dims.size() == 4) j["hermitian_defect"] = hessian_hermitian_defect(r);
  if (name == "ricci_form") j["hermitian_defect"] = ricci_hermitian_defect(r);
  if (name == "ricci_potential") j["identity"] = identity_to_json(ricci_potential_identity(B, ctx, c.rank));
  if (name == "kahler_lemma") {
    KahlerSummary k = kahler_residual_summary(B, ctx);
    j["kahler"] = {{"rms", k.rms}, {"max", k.max}, {"triples", k.triples}};
  }
  std::cout << name << ": " << r.entries.size() << " entries, norm " << r.norm() << "\n";
  for (const auto& [label, part] : r.terms) {
    double s = 0;
    for (const auto& z : part) s += std::norm(z);
    std::printf("  %-12s %.6e\n", label.c_str(), std::sqrt(s));
  }
  if (c.audit && r.dims.size() >= 2 && r.dims.size() != 3) {
    AuditReport a = audit_formula(f, B, ctx);
    j["audit"] = audit_to_json(a);
    std::printf("audit: defect %.4e -> %.4e\n", a.verbatim_defect, a.audited_defect);
    std::printf("  %-8s %-22s %-5s %-10s %s\n", "term", "unit", "sign", "variant", "norm");
    for (const auto& u : a.units)
      std::printf("  %-8s %-22s %+d    %-10s %.4e\n", u.term.c_str(), u.unit.c_str(), u.sign,
                  u.variant.empty() ? "-" : u.variant.c_str(), u.norm);
  }
  emit(c, "tensors_" + name + ".json", j);
  return 0;
}

int cmd_spectral(const RunConfig& c) {
  Workspace ws(c);
  const Coef k = c.op == "lap0" ? Coef::trivial : Coef::AdE;
  SpectralSummary s = eigen_spectrum(surface_laplacian(*ws.calculus(c.level), k), c.count);
  LogDet ld = zeta_logdet(s);
  nlohmann::json j = report_envelope("spectral", c);
  j["summary"] = summary_to_json(s);
  j["logdet"] = {{"value", ld.logdet}, {"err", ld.err}, {"t0", ld.t0}, {"weyl_ratio", ld.weyl_ratio},
                 {"err_tail", ld.err_tail}, {"err_asymptotic", ld.err_asymptotic}, {"err_geodesic", ld.err_geodesic},
                 {"err_discretization", ld.err_discretization}, {"err_residual", ld.err_residual}};
  fs::path csv = out_dir(c) / ("spectrum_" + c.op + ".csv");
  write_file(csv, spectrum_csv(s));
  std::cout << "wrote " << csv.string() << "\n";
  std::printf("%s: %d eigenvalues, log det %.10f +- %.2e\n", c.op.c_str(), s.count(), ld.logdet, ld.err);
  emit(c, "spectral_" + c.op + ".json", j);
  return 0;
}

int cmd_beltrami(const RunConfig& c) {
  Workspace ws(c);
  const Calculus& C = *ws.calculus(c.level);
  TangentVector tv{ws.basis(Coef::TX, c.level).elements[0], C.zero(kinds::f01(Coef::EndE))};
  BeltramiCoefficient mu = modified_coefficient(tv, c.scale, C);
  mu.trunc_radius = c.trunc_radius;
  BeltramiParams p;
  p.grid = c.grid;
  p.max_iter = c.max_iter;
  MappingGrid g = solve_beltrami(mu, p);
  DeformedGroup d = deformed_generators(g, bolza_group());

  // cell values of the normalized map, row-major, (re, im) little-endian doubles
  std::string bin(static_cast<size_t>(g.chi.size()) * 2 * sizeof(double), '\0');
  for (long i = 0; i < g.chi.size(); ++i) {
    double re = g.chi(i).real(), im = g.chi(i).imag();
    std::memcpy(&bin[(2 * i) * sizeof(double)], &re, sizeof(double));
    std::memcpy(&bin[(2 * i + 1) * sizeof(double)], &im, sizeof(double));
  }
  fs::path bp = out_dir(c) / "mapping.bin";
  write_file(bp, bin);
  std::cout << "wrote " << bp.string() << "\n";

  nlohmann::json j = report_envelope("beltrami", c);
  j["grid"] = mapping_header(g);
  j["grid"]["binary"] = {{"file", "mapping.bin"}, {"layout", "row-major cells, complex128 (re, im)"}, {"count", g.chi.size()}};
  j["coefficient"] = {{"sup_norm", mu.sup_norm}, {"equivariance_residual", mu.equivariance_residual}};
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& m : d.group.generators)
    gens.push_back({{m.a.real(), m.a.imag()}, {m.b.real(), m.b.imag()}, {m.c.real(), m.c.imag()}, {m.d.real(), m.d.imag()}});
  j["deformed_group"] = {{"generators", gens}, {"fit_residual", d.fit_residual},
                         {"relator_residual", d.relator_residual}, {"condition", d.condition}};
  std::printf("beltrami: %d iterations, residual %.3e, relator %.3e\n", g.iterations, g.residual, d.relator_residual);
  emit(c, "beltrami.json", j);
  return 0;
}

int cmd_verify(const RunConfig& c) {
  Workspace ws(c);
  auto results = run_acceptance(ws, [](const CriterionResult& r) { std::cout << criterion_line(r) << std::endl; });
  emit(c, "verify.json", acceptance_report(c, results));
  bool breakdown = false, pass = true;
  for (const auto& r : results) {
    breakdown = breakdown || r.breakdown;
    pass = pass && r.pass;
  }
  return breakdown ? 3 : pass ? 0 : 1;
}

void diagnose(const std::string& kind, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hodgelab: Hodge theory and moduli tensors on the Bolza surface"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> sets;
  std::string output;
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--set", sets, "override one config key (key=value)")->allow_extra_args(false);
  app.add_option("--output", output, "output directory");
  app.set_version_flag("--version", std::string(version()));

  std::map<std::string, std::string> flags;
  auto opt = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  auto* init = app.add_subcommand("init", "write mesh and representation JSON");
  opt(init, "--level", "level", "mesh level");
  opt(init, "--rank", "rank", "bundle rank n");
  opt(init, "--seed", "seed", "representation seed");
  auto* hodge = app.add_subcommand("hodge", "harmonic bases and dimension report");
  opt(hodge, "--level", "level", "mesh level");
  auto* tensors = app.add_subcommand("tensors", "evaluate a shipped formula");
  opt(tensors, "--level", "level", "mesh level");
  opt(tensors, "--formula", "formula", "formula name");
  opt(tensors, "--delta0c", "delta0c", "functions | tx");
  tensors->add_flag_callback("--audit", [&flags] { flags["audit"] = "true"; }, "search sign/conjugation variants");
  auto* spectral = app.add_subcommand("spectral", "eigenvalues and zeta-regularized log det");
  opt(spectral, "--level", "level", "mesh level");
  opt(spectral, "--operator", "operator", "lap0 | lapAdE");
  opt(spectral, "--count", "count", "number of eigenvalues");
  auto* beltrami = app.add_subcommand("beltrami", "solve the Beltrami equation and refit the group");
  opt(beltrami, "--level", "level", "mesh level");
  opt(beltrami, "--scale", "scale", "deformation size");
  opt(beltrami, "--trunc-radius", "trunc_radius", "coefficient support radius");
  opt(beltrami, "--max-iter", "max_iter", "Neumann series iterations");
  opt(beltrami, "--grid", "grid", "cells per side");
  auto* verify = app.add_subcommand("verify", "run the acceptance suite");
  opt(verify, "--criteria", "criteria", "comma separated ids or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, "--set needs key=value, got '" + s + "'");
      set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) set_config_value(cfg, k, v);
    if (!output.empty()) cfg.output = output;

    if (init->parsed()) return cmd_init(cfg);
    if (hodge->parsed()) return cmd_hodge(cfg);
    if (tensors->parsed()) return cmd_tensors(cfg);
    if (spectral->parsed()) return cmd_spectral(cfg);
    if (beltrami->parsed()) return cmd_beltrami(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
  } catch (const Error& e) {
    diagnose(error_name(e.kind()), e.what());
    return e.is_config() ? 2 : 3;
  } catch (const std::exception& e) {
    diagnose("internal", e.what());
    return 3;
  }
  return 2;
}
