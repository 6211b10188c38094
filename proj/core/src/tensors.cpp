#include "hodgelab/tensors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>

#include "blocks.hpp"
#include "hodgelab/errors.hpp"

namespace hl {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// generated from formulas/*.json at configure time
extern const std::vector<std::pair<std::string, std::string>>& embedded_formulas();

namespace {

const double PI = std::numbers::pi;
const cd I(0, 1);

// ---------------- json ----------------

nlohmann::json cd_json(cd z) { return nlohmann::json::array({z.real(), z.imag()}); }
cd json_cd(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

Pipeline pipe_from(const nlohmann::json& j) {
  Pipeline p;
  p.input = j.at("input").get<std::string>();
  p.ops = j.value("ops", std::vector<std::string>{});
  if (j.contains("coef")) p.coef = json_cd(j["coef"]);
  return p;
}
nlohmann::json pipe_to(const Pipeline& p) {
  nlohmann::json j;
  j["input"] = p.input;
  j["ops"] = p.ops;
  if (p.coef != cd(1.0, 0.0)) j["coef"] = cd_json(p.coef);
  return j;
}
std::vector<Pipeline> pipes_from(const nlohmann::json& j) {
  std::vector<Pipeline> v;
  for (const auto& x : j) v.push_back(pipe_from(x));
  return v;
}
nlohmann::json pipes_to(const std::vector<Pipeline>& v) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : v) j.push_back(pipe_to(p));
  return j;
}

// ---------------- tokens ----------------

struct Tok {
  std::string name, arg;
  int slot() const { return arg.empty() ? -1 : std::stoi(arg); }
};
Tok split(const std::string& s) {
  auto c = s.find(':');
  if (c == std::string::npos) return {s, ""};
  return {s.substr(0, c), s.substr(c + 1)};
}

const std::set<std::string> slot_ops_mu = {"mu", "mubar", "mulcoef", "mulcoef10", "mucell"};
const std::set<std::string> slot_ops_nu = {"ad", "adstar", "star_ad_star", "star_bracket", "trmul"};

bool matrix_coef(Coef c) { return c == Coef::EndE || c == Coef::AdE; }

[[noreturn]] void mismatch(const std::string& where, const std::string& tok, const FormKind& k) {
  throw Error(ErrorKind::KindMismatch, where + ": token '" + tok + "' cannot act on " + k.name());
}

// static kind transition of one token
FormKind step(const std::string& where, const std::string& tok, const FormKind& k, Coef sector,
              const std::map<std::string, FormKind>& auxk) {
  Tok t = split(tok);
  const Degree d = k.degree;
  const Coef c = k.coef;
  auto need = [&](bool ok) {
    if (!ok) mismatch(where, tok, k);
  };
  if (slot_ops_mu.count(t.name) || slot_ops_nu.count(t.name)) {
    int s = t.slot();
    if (s < 0 || s > 4) throw Error(ErrorKind::KindMismatch, where + ": token '" + tok + "' needs a slot 0..4");
  }
  if (t.name == "dbar" || t.name == "del") {
    need(d == Degree::function);
    return {t.name == "dbar" ? Degree::form01 : Degree::form10, c};
  }
  if (t.name == "dbarstar" || t.name == "star_del") {
    need(d == Degree::form01 && c != Coef::K2);
    return kinds::fun(c);
  }
  if (t.name == "delstar" || t.name == "star_dbar") {
    need(d == Degree::form10 && c != Coef::K2);
    return kinds::fun(c);
  }
  if (t.name == "green" || t.name == "green10") {
    need(d == Degree::function && c != Coef::K2);
    return k;
  }
  if (t.name == "green_half") {
    need(k == kinds::fun(Coef::trivial));
    return k;
  }
  if (t.name == "mu") {
    need(d == Degree::form10);
    return {Degree::form01, c};
  }
  if (t.name == "mubar" || t.name == "mulcoef10") {
    need(d == Degree::form01);
    return {Degree::form10, c};
  }
  if (t.name == "mulcoef") {
    need(d == Degree::form01);
    return k;
  }
  if (t.name == "conjT") {
    need(matrix_coef(c) && (d == Degree::form01 || d == Degree::form10));
    return {d == Degree::form01 ? Degree::form10 : Degree::form01, c};
  }
  if (t.name == "ad") {
    need(d == Degree::function && c == sector && matrix_coef(c));
    return kinds::f01(c);
  }
  if (t.name == "adstar" || t.name == "star_ad_star" || t.name == "star_bracket") {
    need(d == Degree::form01 && c == sector && matrix_coef(c));
    return kinds::fun(c);
  }
  if (t.name == "bracket") {
    auto it = auxk.find(t.arg);
    if (it == auxk.end()) throw Error(ErrorKind::KindMismatch, where + ": unknown auxiliary '" + t.arg + "'");
    need(matrix_coef(c) && (d == Degree::form01 || d == Degree::form10) && it->second == kinds::fun(c));
    return k;
  }
  if (t.name == "proj") {
    need((d == Degree::form01 && c == sector) || k == kinds::beltrami);
    return k;
  }
  if (t.name == "projbar") {
    need(d == Degree::form10 && c == sector);
    return k;
  }
  if (t.name == "as_cell") {
    need(k == kinds::f10(Coef::TX));
    return kinds::cell(Coef::trivial);
  }
  if (t.name == "ginv") {
    need(k == kinds::cell(Coef::trivial));
    return k;
  }
  if (t.name == "cell_to_sec") {
    need(k == kinds::cell(Coef::trivial));
    return kinds::fun(Coef::trivial);
  }
  if (t.name == "avg") {
    need(d == Degree::function);
    return kinds::cell(c);
  }
  if (t.name == "mucell") {
    need(k == kinds::cell(Coef::trivial));
    return kinds::beltrami;
  }
  if (t.name == "trmul") {
    need(d == Degree::form01 && c == sector && matrix_coef(c));
    return kinds::f02;
  }
  if (t.name == "density_inverse_scale") {
    need(k == kinds::f02);
    return kinds::beltrami;
  }
  throw Error(ErrorKind::KindMismatch, where + ": unknown token '" + tok + "'");
}

FormKind input_kind(const std::string& where, const std::string& in, Coef sector, const std::string& trace_sector,
                    const std::map<std::string, FormKind>& auxk) {
  if (in == "basis") {
    if (trace_sector == "TX") return kinds::beltrami;
    if (trace_sector == "E") return kinds::f01(sector);
    throw Error(ErrorKind::KindMismatch, where + ": basis input outside a trace term");
  }
  if (in.rfind("aux:", 0) == 0) {
    auto it = auxk.find(in.substr(4));
    if (it == auxk.end()) throw Error(ErrorKind::KindMismatch, where + ": unknown auxiliary " + in);
    return it->second;
  }
  if (in.size() == 3 && (in.rfind("mu", 0) == 0 || in.rfind("nu", 0) == 0) && in[2] >= '0' && in[2] <= '4')
    return in[0] == 'm' ? kinds::beltrami : kinds::f01(sector);
  throw Error(ErrorKind::KindMismatch, where + ": unknown input '" + in + "'");
}

FormKind pipe_kind(const std::string& where, const Pipeline& p, Coef sector, const std::string& ts,
                   const std::map<std::string, FormKind>& auxk) {
  FormKind k = input_kind(where, p.input, sector, ts, auxk);
  for (const auto& tok : p.ops) k = step(where, tok, k, sector, auxk);
  return k;
}

FormKind list_kind(const std::string& where, const std::vector<Pipeline>& v, Coef sector, const std::string& ts,
                   const std::map<std::string, FormKind>& auxk) {
  if (v.empty()) throw Error(ErrorKind::KindMismatch, where + ": empty pipeline list");
  FormKind k = pipe_kind(where, v[0], sector, ts, auxk);
  for (size_t i = 1; i < v.size(); ++i)
    if (!(pipe_kind(where, v[i], sector, ts, auxk) == k))
      throw Error(ErrorKind::KindMismatch, where + ": summands of different kinds");
  return k;
}

const std::vector<Pipeline>& left_of(const FormulaTerm& t, const TensorOptions& opt) {
  if (t.readings.empty()) return t.left;
  auto it = t.readings.find(opt.delta0c);
  if (it == t.readings.end())
    throw Error(ErrorKind::ConfigError, "term " + t.label + " has no reading '" + opt.delta0c + "'");
  return it->second;
}

void typecheck_term(const FormulaTerm& t, Coef sector, const TensorOptions& opt) {
  const std::string where = "term " + t.label;
  std::map<std::string, FormKind> auxk;
  for (const auto& [name, v] : t.aux) auxk[name] = list_kind(where, v, sector, t.sector, auxk);
  if (t.pairing == "omega") {
    if (t.sector != "E" && t.sector != "TX") throw Error(ErrorKind::KindMismatch, where + ": omega needs a sector");
    return;
  }
  auto check_left = [&](const std::vector<Pipeline>& left) {
    FormKind lk = list_kind(where, left, sector, t.sector, auxk);
    if (t.pairing == "inner") {
      FormKind rk = list_kind(where, t.right, sector, t.sector, auxk);
      if (!(lk == rk)) throw Error(ErrorKind::KindMismatch, where + ": pairs " + lk.name() + " with " + rk.name());
    } else if (t.pairing == "density") {
      if (!(lk == kinds::cell(Coef::trivial))) throw Error(ErrorKind::KindMismatch, where + ": density of " + lk.name());
    } else if (t.pairing == "trace") {
      FormKind bk = input_kind(where, "basis", sector, t.sector, auxk);
      if (!(lk == bk)) throw Error(ErrorKind::KindMismatch, where + ": trace of a map into " + lk.name());
    } else {
      throw Error(ErrorKind::KindMismatch, where + ": unknown pairing " + t.pairing);
    }
  };
  if (t.readings.empty()) {
    check_left(t.left);
  } else {
    (void)left_of(t, opt);
    for (const auto& [name, v] : t.readings) check_left(v);
  }
}

bool is_zero(const Field& f) { return f.values.size() == 0 || f.values.isZero(0.0); }

// ---------------- evaluation engine ----------------

class Engine {
 public:
  Engine(const TensorContext& ctx) : ctx_(ctx), C_(ctx.C) {}

  void set_slots(const Slots* s, std::array<int, 5> ids) {
    slots_ = s;
    ids_ = ids;
  }
  void clear_memo() { memo_.clear(); }

  cd term(const FormulaTerm& t, int term_id, int n) {
    cd scale = t.coefficient * (t.rank_factor.empty() ? 1.0 : rank_factor(t.rank_factor, n));
    if (t.pairing == "omega") {
      const Slots& s = *slots_;
      const Field& a = t.sector == "TX" ? s[1].mu : s[1].nu;
      const Field& b = t.sector == "TX" ? s[2].mu : s[2].nu;
      if (is_zero(a) || is_zero(b)) return 0;
      return scale * cd(0, 0.5) * C_.inner(a, b);
    }
    term_ = &t;
    term_id_ = term_id;
    const auto& left = left_of(t, ctx_.opt);
    if (t.pairing == "trace") {
      const HarmonicBasis& b = t.sector == "TX" ? ctx_.tx : ctx_.e;
      cd sum = 0;
      for (int i = 0; i < b.dim(); ++i) {
        basis_ = &b.elements[i];
        basis_id_ = i;
        auto L = run_list(left, "L");
        if (L) sum += C_.inner(*L, b.elements[i]);
      }
      basis_ = nullptr;
      basis_id_ = -1;
      return scale * sum;
    }
    auto L = run_list(left, "L");
    if (!L) return 0;
    if (t.pairing == "density") {
      const VectorXd& m = C_.mass(L->kind);
      return scale * (m.cast<cd>().array() * L->values.array()).sum();
    }
    auto R = run_list(t.right, "R");
    if (!R) return 0;
    return scale * C_.inner(*L, *R);
  }

 private:
  std::optional<Field> run_list(const std::vector<Pipeline>& v, const std::string& tag) {
    std::optional<Field> acc;
    for (size_t i = 0; i < v.size(); ++i) {
      auto r = run(v[i], tag + std::to_string(i));
      if (!r) continue;
      if (!acc) {
        acc = Field{r->kind, v[i].coef * r->values};
      } else {
        acc->values += v[i].coef * r->values;
      }
    }
    return acc;
  }

  std::string memo_key(const Pipeline& p, const std::string& tag) {
    std::set<int> used;
    collect_slots(p, used);
    std::string k = std::to_string(term_id_) + "|" + tag;
    for (int s : used) k += "|" + std::to_string(s) + "=" + std::to_string(ids_[s]);
    if (p.input == "basis") k += "|b" + std::to_string(basis_id_);
    return k;
  }

  void collect_slots(const Pipeline& p, std::set<int>& used) {
    if (p.input.rfind("aux:", 0) == 0) {
      for (const auto& q : term_->aux.at(p.input.substr(4))) collect_slots(q, used);
    } else if (p.input != "basis") {
      used.insert(p.input[2] - '0');
    }
    for (const auto& tok : p.ops) {
      Tok t = split(tok);
      if (slot_ops_mu.count(t.name) || slot_ops_nu.count(t.name)) used.insert(t.slot());
      if (t.name == "bracket")
        for (const auto& q : term_->aux.at(t.arg)) collect_slots(q, used);
    }
  }

  std::optional<Field> run(const Pipeline& p, const std::string& tag) {
    const std::string key = memo_key(p, tag);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    std::optional<Field> x = input(p.input);
    for (const auto& tok : p.ops) {
      if (!x) break;
      x = apply(tok, *x);
    }
    memo_.emplace(key, x);
    return x;
  }

  std::optional<Field> input(const std::string& in) {
    if (in == "basis") return *basis_;
    if (in.rfind("aux:", 0) == 0) return aux(in.substr(4));
    const TangentVector& tv = (*slots_)[in[2] - '0'];
    const Field& f = in[0] == 'm' ? tv.mu : tv.nu;
    if (is_zero(f)) return std::nullopt;
    return f;
  }

  std::optional<Field> aux(const std::string& name) {
    auto it = term_->aux.find(name);
    if (it == term_->aux.end()) throw Error(ErrorKind::KindMismatch, "unknown auxiliary " + name);
    return run_list(it->second, "A" + name);
  }

  const Field* slot_mu(int k) {
    const Field& f = (*slots_)[k].mu;
    return is_zero(f) ? nullptr : &f;
  }
  const Field* slot_nu(int k) {
    const Field& f = (*slots_)[k].nu;
    return is_zero(f) ? nullptr : &f;
  }

  const DiscreteOperator& op(const std::string& which, Coef c) {
    std::string key = which + std::to_string(static_cast<int>(c));
    auto it = ops_.find(key);
    if (it != ops_.end()) return it->second;
    DiscreteOperator o;
    if (which == "dbar" || which == "partial" || which == "laplacian") {
      o = C_.assemble(which, kinds::fun(c));
    } else if (which == "dbarstar") {
      o = C_.adjoint(op("dbar", c));
    } else if (which == "delstar") {
      o = C_.adjoint(op("partial", c));
    } else if (which == "laplacian10") {
      o = C_.compose(op("delstar", c), op("partial", c));
      o.name = "laplacian10";
    } else if (which == "avg") {
      o = C_.average(c);
    } else if (which == "avgstar") {
      o = C_.adjoint(op("avg", c));
    }
    return ops_.emplace(key, std::move(o)).first->second;
  }

  std::optional<Field> apply(const std::string& tok, const Field& x) {
    Tok t = split(tok);
    const Coef c = x.kind.coef;
    if (t.name == "dbar") return C_.apply(op("dbar", c), x);
    if (t.name == "del") return C_.apply(op("partial", c), x);
    if (t.name == "dbarstar") return C_.apply(op("dbarstar", c), x);
    if (t.name == "delstar") return C_.apply(op("delstar", c), x);
    if (t.name == "star_del") {
      Field y = C_.apply(op("dbarstar", c), x);
      y.values *= I;
      return y;
    }
    if (t.name == "star_dbar") {
      Field y = C_.apply(op("delstar", c), x);
      y.values *= -I;
      return y;
    }
    if (t.name == "green") return C_.green_apply(op("laplacian", c), x, 0.0);
    if (t.name == "green10") return C_.green_apply(op("laplacian10", c), x, 0.0);
    if (t.name == "green_half") return C_.green_apply(op("laplacian", c), x, ctx_.opt.shift);
    if (t.name == "mu" || t.name == "mubar") {
      const Field* mu = slot_mu(t.slot());
      if (!mu) return std::nullopt;
      return C_.apply_primitive(t.name == "mu" ? "mul_beltrami" : "mul_beltrami_conj", {*mu, x});
    }
    if (t.name == "mulcoef" || t.name == "mulcoef10" || t.name == "mucell") {
      const Field* mu = slot_mu(t.slot());
      if (!mu) return std::nullopt;
      FormKind k = x.kind;
      if (t.name == "mulcoef10") k = kinds::f10(c);
      if (t.name == "mucell") k = kinds::beltrami;
      const int r = static_cast<int>(x.values.size() / mu->values.size());
      return Field{k, detail::mul_blocks(mu->values, r, false) * x.values};
    }
    if (t.name == "conjT") return C_.apply_primitive("conj_transpose", {x});
    if (t.name == "ad") {
      const Field* nu = slot_nu(t.slot());
      if (!nu) return std::nullopt;
      return C_.apply_primitive("ad", {*nu, x});
    }
    if (t.name == "adstar" || t.name == "star_ad_star" || t.name == "star_bracket") {
      const Field* nu = slot_nu(t.slot());
      if (!nu) return std::nullopt;
      // *ad(nu)* = -ad(nu)^*; *[*a, nu] = ad(nu)^* a
      Field y{kinds::fun(c), detail::ad_adjoint(nu->values, c, C_) * x.values};
      if (t.name == "star_ad_star") y.values = -y.values;
      return y;
    }
    if (t.name == "bracket") {
      auto s = aux(t.arg);
      if (!s) return std::nullopt;
      Field w = x;
      const bool ten = x.kind.degree == Degree::form10;
      if (ten) w = C_.apply_primitive("conj_transpose", {x});
      // [s, w] = -[w, s]; for (1,0)-forms [s, w] = ([w^*, s^*])^* ... via conj_transpose of [s^*, w^*]
      Field y;
      if (!ten) {
        y = C_.apply_primitive("ad", {w, *s});
        y.values = -y.values;
      } else {
        // w = x^*, want [s, x] = -( [s^*, x^*] )^* = ( [x^*, s^*] )^*
        Field sc{s->kind, conj_sections(*s)};
        y = C_.apply_primitive("ad", {w, sc});
        y = C_.apply_primitive("conj_transpose", {y});
      }
      return y;
    }
    if (t.name == "proj") return project(x, x.kind == kinds::beltrami ? ctx_.tx : ctx_.e, C_);
    if (t.name == "projbar") return project_bar(x, ctx_.e, C_);
    if (t.name == "as_cell") return Field{kinds::cell(Coef::trivial), x.values};
    if (t.name == "ginv") {
      Field y = x;
      for (int i = 0; i < y.values.size(); ++i) y.values(i) /= C_.lambda_t(i);
      return y;
    }
    if (t.name == "cell_to_sec") {
      // L2 projection of cell values onto sections
      VectorXcd m = C_.mass(x.kind).cast<cd>().cwiseProduct(x.values);
      VectorXcd b = op("avg", Coef::trivial).A.adjoint() * m;
      return Field{kinds::fun(Coef::trivial), b.cwiseQuotient(C_.mass(kinds::fun(Coef::trivial)).cast<cd>())};
    }
    if (t.name == "avg") return C_.apply(op("avg", c), x);
    if (t.name == "trmul") {
      const Field* nu = slot_nu(t.slot());
      if (!nu) return std::nullopt;
      return C_.apply_primitive("trace", {x, *nu});
    }
    if (t.name == "density_inverse_scale") return C_.apply_primitive("density_inverse_scale", {x});
    throw Error(ErrorKind::KindMismatch, "unknown token '" + tok + "'");
  }

  // pointwise conjugate transpose of a matrix-valued section
  VectorXcd conj_sections(const Field& s) {
    const Coef c = s.kind.coef;
    const int n = C_.rep().n, r = C_.fiber_dim(c);
    MatrixXcd E = C_.action(c).embed();
    VectorXcd out(s.values.size());
    for (long v = 0; v < s.values.size() / r; ++v)
      out.segment(v * r, r) = detail::from_mat(detail::to_mat(s.values.segment(v * r, r), E, n).adjoint(), E);
    return out;
  }

  const TensorContext& ctx_;
  const Calculus& C_;
  const Slots* slots_ = nullptr;
  std::array<int, 5> ids_{};
  const FormulaTerm* term_ = nullptr;
  int term_id_ = -1;
  const Field* basis_ = nullptr;
  int basis_id_ = -1;
  std::map<std::string, std::optional<Field>> memo_;
  std::map<std::string, DiscreteOperator> ops_;
};

int rank_of(const TensorContext& ctx) { return ctx.C.rep().n; }

}  // namespace

// ---------------- IR plumbing ----------------

FormulaIR formula_from_json(const nlohmann::json& j) {
  FormulaIR f;
  f.name = j.at("name").get<std::string>();
  f.version = j.value("version", 1);
  f.anchor = j.value("anchor", "");
  f.verbatim = j.value("verbatim", "");
  f.slots = j.value("slots", std::vector<int>{});
  for (const auto& t : j.at("terms")) {
    FormulaTerm ft;
    ft.label = t.at("label").get<std::string>();
    ft.line = t.value("line", 0);
    ft.verbatim = t.value("verbatim", "");
    ft.note = t.value("note", "");
    ft.block = t.value("block", "");
    if (t.contains("coefficient")) ft.coefficient = json_cd(t["coefficient"]);
    ft.rank_factor = t.value("rank_factor", "");
    ft.pairing = t.value("pairing", "inner");
    ft.sector = t.value("sector", "");
    if (t.contains("aux"))
      for (const auto& [k, v] : t["aux"].items()) ft.aux[k] = pipes_from(v);
    if (t.contains("left")) ft.left = pipes_from(t["left"]);
    if (t.contains("right")) ft.right = pipes_from(t["right"]);
    if (t.contains("readings"))
      for (const auto& [k, v] : t["readings"].items()) ft.readings[k] = pipes_from(v);
    if (t.contains("variants"))
      for (const auto& v : t["variants"])
        ft.variants.push_back({v.at("name").get<std::string>(), v.at("replace").get<std::map<std::string, std::string>>()});
    f.terms.push_back(std::move(ft));
  }
  for (const auto& [k, v] : j.items())
    if (k != "name" && k != "version" && k != "anchor" && k != "verbatim" && k != "slots" && k != "terms")
      f.extra[k] = v;
  return f;
}

nlohmann::json formula_to_json(const FormulaIR& f) {
  nlohmann::json j;
  j["name"] = f.name;
  j["version"] = f.version;
  j["anchor"] = f.anchor;
  if (!f.verbatim.empty()) j["verbatim"] = f.verbatim;
  j["slots"] = f.slots;
  if (f.extra.is_object())
    for (const auto& [k, v] : f.extra.items()) j[k] = v;
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : f.terms) {
    nlohmann::json x;
    x["label"] = t.label;
    x["line"] = t.line;
    x["verbatim"] = t.verbatim;
    if (!t.note.empty()) x["note"] = t.note;
    if (!t.block.empty()) x["block"] = t.block;
    x["coefficient"] = cd_json(t.coefficient);
    if (!t.rank_factor.empty()) x["rank_factor"] = t.rank_factor;
    x["pairing"] = t.pairing;
    if (!t.sector.empty()) x["sector"] = t.sector;
    if (!t.aux.empty()) {
      nlohmann::json a = nlohmann::json::object();
      for (const auto& [k, v] : t.aux) a[k] = pipes_to(v);
      x["aux"] = a;
    }
    if (!t.left.empty()) x["left"] = pipes_to(t.left);
    if (!t.right.empty()) x["right"] = pipes_to(t.right);
    if (!t.readings.empty()) {
      nlohmann::json r = nlohmann::json::object();
      for (const auto& [k, v] : t.readings) r[k] = pipes_to(v);
      x["readings"] = r;
    }
    if (!t.variants.empty()) {
      nlohmann::json vs = nlohmann::json::array();
      for (const auto& v : t.variants) vs.push_back({{"name", v.name}, {"replace", v.replace}});
      x["variants"] = vs;
    }
    terms.push_back(x);
  }
  j["terms"] = terms;
  return j;
}

std::vector<std::string> builtin_formula_names() {
  std::vector<std::string> v;
  for (const auto& [name, text] : embedded_formulas()) v.push_back(name);
  return v;
}

const FormulaIR& builtin_formula(const std::string& name) {
  static std::map<std::string, FormulaIR> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  for (const auto& [n, text] : embedded_formulas())
    if (n == name) return cache.emplace(name, formula_from_json(nlohmann::json::parse(text))).first->second;
  throw Error(ErrorKind::ConfigError, "unknown formula " + name);
}

double rank_factor(const std::string& name, int n) {
  const double d = n;
  if (name == "n/2pi") return d / (2 * PI);
  if (name == "2n/2pi") return 2 * d / (2 * PI);
  if (name == "n^2/12pi") return d * d / (12 * PI);
  if (name == "(n^2-1)/6pi") return (d * d - 1) / (6 * PI);
  if (name == "1/6pi") return 1 / (6 * PI);
  throw Error(ErrorKind::ConfigError, "unknown rank factor " + name);
}

void typecheck(const FormulaIR& f, Coef sector, const TensorOptions& opt) {
  for (const auto& t : f.terms) typecheck_term(t, sector, opt);
}

// ---------------- evaluation ----------------

TangentBasis tangent_basis(const HarmonicBasis& tx, const HarmonicBasis& e, const Calculus& C) {
  (void)C;
  TangentBasis B;
  for (const auto& m : tx.elements) B.elements.push_back({m, Field{kinds::f01(e.kind), {}}});
  for (const auto& n : e.elements) B.elements.push_back({Field{kinds::beltrami, {}}, n});
  B.n_tx = tx.dim();
  B.n_e = e.dim();
  return B;
}

cd evaluate_term(const FormulaTerm& t, const Slots& s, const TensorContext& ctx) {
  Engine eng(ctx);
  eng.set_slots(&s, {-1, -2, -3, -4, -5});
  return eng.term(t, 0, rank_of(ctx));
}

cd evaluate(const FormulaIR& f, const Slots& s, const TensorContext& ctx) {
  Engine eng(ctx);
  eng.set_slots(&s, {-1, -2, -3, -4, -5});
  cd sum = 0;
  for (size_t i = 0; i < f.terms.size(); ++i) {
    eng.clear_memo();
    sum += eng.term(f.terms[i], static_cast<int>(i), rank_of(ctx));
  }
  return sum;
}

cd trace_over_basis(const std::function<Field(const Field&)>& F, const HarmonicBasis& b, const Calculus& C) {
  cd s = 0;
  for (const auto& e : b.elements) s += C.inner(F(e), e);
  return s;
}

size_t TensorResult::index(const std::vector<int>& ix) const {
  size_t k = 0;
  for (size_t i = 0; i < dims.size(); ++i) k = k * dims[i] + ix[i];
  return k;
}

double TensorResult::norm() const {
  double s = 0;
  for (const auto& z : entries) s += std::norm(z);
  return std::sqrt(s);
}

MatrixXcd TensorResult::matrix() const {
  if (dims.size() != 2) throw Error(ErrorKind::KindMismatch, label + " is not a matrix");
  MatrixXcd m(dims[0], dims[1]);
  for (int a = 0; a < dims[0]; ++a)
    for (int b = 0; b < dims[1]; ++b) m(a, b) = entries[a * dims[1] + b];
  return m;
}

nlohmann::json tensor_to_json(const TensorResult& r) {
  auto flat = [](const std::vector<cd>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& z : v) a.push_back({z.real(), z.imag()});
    return a;
  };
  nlohmann::json j;
  j["label"] = r.label;
  j["dims"] = r.dims;
  j["entries"] = flat(r.entries);
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [name, v] : r.terms) {
    double s = 0;
    for (const auto& z : v) s += std::norm(z);
    terms.push_back({{"term", name}, {"norm", std::sqrt(s)}, {"entries", flat(v)}});
  }
  j["terms"] = terms;
  j["meta"] = r.meta;
  return j;
}

TensorResult evaluate_tensor(const FormulaIR& f, const TangentBasis& B, const TensorContext& ctx) {
  typecheck(f, ctx.e.kind, ctx.opt);
  const int D = B.dim();
  const int r = static_cast<int>(f.slots.size());
  TensorResult res;
  res.label = f.name;
  res.dims.assign(r, D);
  size_t total = 1;
  for (int i = 0; i < r; ++i) total *= D;
  res.entries.assign(total, 0.0);
  Engine eng(ctx);
  const int n = rank_of(ctx);
  Slots s;
  std::vector<int> ix(r);
  for (size_t ti = 0; ti < f.terms.size(); ++ti) {
    const FormulaTerm& t = f.terms[ti];
    eng.clear_memo();
    std::vector<cd> part(total, 0.0);
    for (size_t k = 0; k < total; ++k) {
      size_t q = k;
      for (int i = r - 1; i >= 0; --i) {
        ix[i] = static_cast<int>(q % D);
        q /= D;
      }
      std::array<int, 5> ids{-1, -1, -1, -1, -1};
      for (int i = 0; i < r; ++i) {
        s[f.slots[i]] = B.elements[ix[i]];
        ids[f.slots[i]] = ix[i];
      }
      eng.set_slots(&s, ids);
      part[k] = eng.term(t, static_cast<int>(ti), n);
      res.entries[k] += part[k];
    }
    res.terms.emplace_back(t.label, std::move(part));
  }
  res.meta["formula"] = f.name;
  res.meta["version"] = f.version;
  res.meta["basis"] = {{"tx", B.n_tx}, {"bundle", B.n_e}};
  res.meta["delta0c"] = ctx.opt.delta0c;
  return res;
}

BaseMetric base_metric(const TangentVector& tv1, const TangentVector& tv2, const Calculus& C) {
  auto pair = [&](const Field& a, const Field& b) -> cd {
    if (is_zero(a) || is_zero(b)) return 0;
    if (!(a.kind == b.kind)) throw Error(ErrorKind::KindMismatch, "base_metric pairs " + a.kind.name() + " with " + b.kind.name());
    return C.inner(a, b);
  };
  if (!is_zero(tv1.mu) && !(tv1.mu.kind == kinds::beltrami))
    throw Error(ErrorKind::KindMismatch, "base_metric needs Beltrami differentials");
  cd gt = pair(tv1.mu, tv2.mu), gm = pair(tv1.nu, tv2.nu);
  BaseMetric b;
  b.g = gt + gm;
  b.omega_T = std::real(I * gt);
  b.omega_M = std::real(I * gm);
  return b;
}

TensorResult metric_hessian(const TangentBasis& B, const TensorContext& ctx) {
  TensorResult H = evaluate_tensor(builtin_formula("metric_hessian"), B, ctx);
  H.meta["hermitian_defect"] = hessian_hermitian_defect(H);
  return H;
}

double hessian_hermitian_defect(const TensorResult& H) {
  if (H.dims.size() != 4) throw Error(ErrorKind::KindMismatch, "hermitian defect needs a 4-tensor");
  const int D = H.dims[0];
  double num = 0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      for (int c = 0; c < D; ++c)
        for (int d = 0; d < D; ++d) num += std::norm(H.at({a, b, c, d}) - std::conj(H.at({b, a, d, c})));
  const double den = H.norm();
  return den > 0 ? std::sqrt(num) / den : 0.0;
}

namespace {

std::vector<Pipeline>* unit_list(FormulaTerm& t, const TensorOptions& opt, std::string& tag) {
  for (auto& [k, v] : t.aux)
    if (v.size() > 1) {
      tag = "aux:" + k;
      return &v;
    }
  if (!t.readings.empty()) {
    auto& v = t.readings.at(opt.delta0c);
    if (v.size() > 1) {
      tag = "left";
      return &v;
    }
  } else if (t.left.size() > 1) {
    tag = "left";
    return &t.left;
  }
  if (t.right.size() > 1) {
    tag = "right";
    return &t.right;
  }
  return nullptr;
}

std::vector<cd> tensor_entries_for(const FormulaTerm& t, const FormulaIR& f, const TangentBasis& B, const TensorContext& ctx) {
  FormulaIR one = f;
  one.terms = {t};
  return evaluate_tensor(one, B, ctx).entries;
}

}  // namespace

AuditReport audit_metric_hessian(const TangentBasis& B, const TensorContext& ctx) {
  return audit_formula(builtin_formula("metric_hessian"), B, ctx);
}

AuditReport audit_formula(const FormulaIR& f, const TangentBasis& B, const TensorContext& ctx) {
  typecheck(f, ctx.e.kind, ctx.opt);
  // Ric and the potential identity are i times Hermitian, the rest Hermitian
  const bool i_herm = f.name == "ricci_form" || f.name == "ricci_potential";
  struct Unit {
    std::string term, name;
    std::vector<std::string> variant_names;
    std::vector<std::vector<cd>> contrib;  // per variant, sign +1
  };
  std::vector<Unit> units;
  for (const auto& t0 : f.terms) {
    FormulaTerm t = t0;
    std::string tag;
    std::vector<Pipeline>* list = unit_list(t, ctx.opt, tag);
    const size_t count = list ? list->size() : 1;
    for (size_t u = 0; u < count; ++u) {
      Unit U;
      U.term = t.label;
      U.name = list ? t.label + "/" + tag + "#" + std::to_string(u) : t.label;
      std::vector<std::pair<std::string, std::map<std::string, std::string>>> vars = {{"", {}}};
      for (const auto& v : t.variants) vars.push_back({v.name, v.replace});
      for (const auto& [vname, rep] : vars) {
        FormulaTerm tv = t;
        std::string tag2;
        std::vector<Pipeline>* l2 = unit_list(tv, ctx.opt, tag2);
        if (l2) {
          Pipeline keep = (*l2)[u];
          *l2 = {keep};
        }
        bool touched = vname.empty();
        auto rewrite = [&](std::vector<Pipeline>& ps) {
          for (auto& p : ps)
            for (auto& tok : p.ops) {
              auto it = rep.find(tok);
              if (it != rep.end()) {
                tok = it->second;
                touched = true;
              }
            }
        };
        for (auto& [k, v] : tv.aux) rewrite(v);
        rewrite(tv.left);
        rewrite(tv.right);
        for (auto& [k, v] : tv.readings) rewrite(v);
        if (!touched) continue;
        U.variant_names.push_back(vname);
        U.contrib.push_back(tensor_entries_for(tv, f, B, ctx));
      }
      units.push_back(std::move(U));
    }
  }
  const size_t N = units.front().contrib.front().size();
  std::vector<int> sign(units.size(), 1), var(units.size(), 0);
  std::vector<cd> H(N, 0.0);
  for (const auto& U : units)
    for (size_t k = 0; k < N; ++k) H[k] += U.contrib[0][k];
  TensorResult T;
  T.label = f.name + "_audited";
  T.dims.assign(f.slots.size(), B.dim());
  auto defect = [&](const std::vector<cd>& h) {
    T.entries = h;
    if (T.dims.size() == 4) return hessian_hermitian_defect(T);
    if (T.dims.size() != 2) throw Error(ErrorKind::KindMismatch, "audit needs a matrix or a 4-tensor");
    MatrixXcd m = T.matrix();
    if (i_herm) m *= I;
    const double den = m.norm();
    return den > 0 ? (m - m.adjoint()).norm() / den : 0.0;
  };
  AuditReport rep;
  rep.verbatim_defect = defect(H);
  double best = rep.verbatim_defect;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double cand_best = best;
    int bu = -1, bs = 0, bv = 0;
    for (size_t u = 0; u < units.size(); ++u)
      for (int s : {1, -1})
        for (size_t v = 0; v < units[u].contrib.size(); ++v) {
          if (s == sign[u] && static_cast<int>(v) == var[u]) continue;
          std::vector<cd> h = H;
          for (size_t k = 0; k < N; ++k) h[k] += double(s) * units[u].contrib[v][k] - double(sign[u]) * units[u].contrib[var[u]][k];
          double d = defect(h);
          if (d < cand_best * (1 - 1e-9)) {
            cand_best = d;
            bu = static_cast<int>(u);
            bs = s;
            bv = static_cast<int>(v);
          }
        }
    if (bu < 0) break;
    for (size_t k = 0; k < N; ++k)
      H[k] += double(bs) * units[bu].contrib[bv][k] - double(sign[bu]) * units[bu].contrib[var[bu]][k];
    sign[bu] = bs;
    var[bu] = bv;
    best = cand_best;
  }
  rep.audited_defect = defect(H);
  for (size_t u = 0; u < units.size(); ++u) {
    AuditChoice c;
    c.term = units[u].term;
    c.unit = units[u].name;
    c.sign = sign[u];
    c.variant = units[u].variant_names[var[u]];
    double n2 = 0;
    for (const auto& z : units[u].contrib[var[u]]) n2 += std::norm(z);
    c.norm = std::sqrt(n2);
    for (const auto& v : units[u].variant_names)
      if (!v.empty()) c.available.push_back(v);
    rep.units.push_back(c);
    if (sign[u] != 1 || var[u] != 0) rep.changes.push_back(c);
  }
  T.entries = H;
  T.meta["verbatim_defect"] = rep.verbatim_defect;
  T.meta["audited_defect"] = rep.audited_defect;
  rep.audited = std::move(T);
  return rep;
}

nlohmann::json audit_to_json(const AuditReport& a) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& c : a.units)
    units.push_back({{"term", c.term}, {"unit", c.unit}, {"sign", c.sign}, {"variant", c.variant},
                     {"norm", c.norm}, {"available", c.available}});
  return {{"verbatim_defect", a.verbatim_defect},
          {"audited_defect", a.audited_defect},
          {"changed", a.changes.size()},
          {"units", units}};
}

TensorResult ricci_form(const TangentBasis& B, const TensorContext& ctx) {
  TensorResult R = evaluate_tensor(builtin_formula("ricci_form"), B, ctx);
  R.meta["hermitian_defect"] = ricci_hermitian_defect(R);
  return R;
}

double ricci_hermitian_defect(const TensorResult& R) {
  MatrixXcd m = I * R.matrix();
  const double den = m.norm();
  return den > 0 ? (m - m.adjoint()).norm() / den : 0.0;
}

namespace {
void fill_by_symmetry(TensorResult& r, const TangentBasis& B) {
  const int D = B.dim();
  int filled = 0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      if (!B.is_mu(a) && B.is_mu(b)) {
        r.entries[a * D + b] = std::conj(r.entries[b * D + a]);
        ++filled;
      }
  r.meta["filled_by_symmetry"] = filled;
}
}  // namespace

LogdetVariations logdet_variations(const TangentBasis& B, const TensorContext& ctx) {
  LogdetVariations v;
  v.ade = evaluate_tensor(builtin_formula("logdet_ade"), B, ctx);
  fill_by_symmetry(v.ade, B);
  v.delta0 = evaluate_tensor(builtin_formula("logdet_delta0"), B, ctx);
  return v;
}

double kahler_first_derivative_residual(const TangentVector& dir, const TangentVector& tv1, const TangentVector& tv2,
                                        const TensorContext& ctx) {
  const FormulaIR& f = builtin_formula("kahler_lemma");
  typecheck(f, ctx.e.kind, ctx.opt);
  Slots s;
  s[0] = dir;
  s[1] = tv1;
  s[2] = tv2;
  return std::abs(evaluate(f, s, ctx));
}

KahlerSummary kahler_residual_summary(const TangentBasis& B, const TensorContext& ctx) {
  const FormulaIR& f = builtin_formula("kahler_lemma");
  typecheck(f, ctx.e.kind, ctx.opt);
  KahlerSummary k;
  double s2 = 0;
  Slots s;
  for (int a = B.n_tx; a < B.dim(); ++a)
    for (int b = B.n_tx; b < B.dim(); ++b)
      for (int c = 0; c < B.n_tx; ++c) {
        s[0] = B.elements[a];
        s[1] = B.elements[b];
        s[2] = B.elements[c];
        double r = std::abs(evaluate(f, s, ctx));
        s2 += r * r;
        k.max = std::max(k.max, r);
        ++k.triples;
      }
  k.rms = k.triples ? std::sqrt(s2 / k.triples) : 0.0;
  return k;
}

IdentityReport ricci_potential_identity(const TangentBasis& B, const TensorContext& ctx, int n) {
  const FormulaIR& pot = builtin_formula("ricci_potential");
  IdentityReport rep;
  LogdetVariations lv = logdet_variations(B, ctx);
  TensorResult ric = ricci_form(B, ctx);
  TensorResult om = evaluate_tensor(pot, B, ctx);
  const nlohmann::json& lhs = pot.extra.at("lhs");
  const cd lc = json_cd(lhs.at("coefficient")) * lhs.at("potential").get<double>();
  MatrixXcd A = lv.ade.matrix(), Z = lv.delta0.matrix();
  rep.lhs = lc * (A + Z);
  rep.rhs = ric.matrix() + om.matrix();
  rep.residual = rep.lhs - rep.rhs;
  rep.relative = rep.residual.norm() / std::max(rep.rhs.norm(), 1e-300);

  const int D = B.dim();
  MatrixXcd OM = MatrixXcd::Zero(D, D), OT = MatrixXcd::Zero(D, D);
  for (const auto& t : pot.terms) {
    double f = rank_factor(t.rank_factor, n) * -t.coefficient.real();
    if (t.label == "omega_M") rep.coefficient_M = f;
    if (t.label == "omega_T") rep.coefficient_T = f;
  }
  for (const auto& [label, part] : om.terms) {
    MatrixXcd m(D, D);
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) m(a, b) = part[a * D + b];
    if (label == "omega_M") OM = m / -rep.coefficient_M;
    if (label == "omega_T") OT = m / -rep.coefficient_T;
  }
  const double d = n;
  rep.coefficients_exact = rep.coefficient_M == d / (2 * PI) && rep.coefficient_T == d * d / (12 * PI);
  // lhs - ric = -a OM - b OT in the least-squares sense
  MatrixXcd target = rep.lhs - ric.matrix();
  Eigen::MatrixXcd X(D * D, 2);
  VectorXcd y(D * D);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      X(a * D + b, 0) = -OM(a, b);
      X(a * D + b, 1) = -OT(a, b);
      y(a * D + b) = target(a, b);
    }
  VectorXcd ab = X.colPivHouseholderQr().solve(y);
  rep.fitted_M = ab(0).real();
  rep.fitted_T = ab(1).real();

  auto block = [&](bool ra, bool rb) {
    double num = 0, den = 0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b)
        if (B.is_mu(a) == ra && B.is_mu(b) == rb) {
          num += std::norm(rep.residual(a, b));
          den += std::norm(rep.rhs(a, b));
        }
    return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
  };
  rep.block_residual["mm"] = block(true, true);
  rep.block_residual["mn"] = block(true, false);
  rep.block_residual["nm"] = block(false, true);
  rep.block_residual["nn"] = block(false, false);

  auto norm_of = [&](const std::vector<cd>& v, cd scale) {
    double s = 0;
    for (const auto& z : v) s += std::norm(scale * z);
    return std::sqrt(s);
  };
  for (const auto& [label, part] : lv.ade.terms) rep.attribution.emplace_back("lhs/logdet_ade/" + label, norm_of(part, lc));
  for (const auto& [label, part] : lv.delta0.terms) rep.attribution.emplace_back("lhs/logdet_delta0/" + label, norm_of(part, lc));
  for (const auto& [label, part] : ric.terms) rep.attribution.emplace_back("rhs/ricci/" + label, norm_of(part, 1.0));
  for (const auto& [label, part] : om.terms) rep.attribution.emplace_back("rhs/" + label, norm_of(part, 1.0));
  return rep;
}

nlohmann::json identity_to_json(const IdentityReport& r) {
  auto mat = [](const MatrixXcd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
      a.push_back(row);
    }
    return a;
  };
  nlohmann::json j;
  j["relative_residual"] = r.relative;
  j["lhs"] = mat(r.lhs);
  j["rhs"] = mat(r.rhs);
  j["residual"] = mat(r.residual);
  j["coefficients"] = {{"omega_M", r.coefficient_M}, {"omega_T", r.coefficient_T}, {"exact", r.coefficients_exact}};
  j["fitted"] = {{"omega_M", r.fitted_M}, {"omega_T", r.fitted_T}};
  j["block_residual"] = r.block_residual;
  nlohmann::json at = nlohmann::json::array();
  for (const auto& [k, v] : r.attribution) at.push_back({{"term", k}, {"norm", v}});
  j["attribution"] = at;
  return j;
}

}  // namespace hl
