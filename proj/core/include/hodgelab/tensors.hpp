#pragma once
#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hodgelab/calculus.hpp"
#include "hodgelab/harmonic.hpp"

namespace hl {

// ---------------- formula IR ----------------
// A pipeline starts from a slot field (mu1, nu3, ...), the trace basis ("basis")
// or an auxiliary sum ("aux:name") and applies tokens left to right.
struct Pipeline {
  std::string input;
  std::vector<std::string> ops;
  cd coef{1.0, 0.0};
};

struct TermVariant {
  std::string name;
  std::map<std::string, std::string> replace;  // token -> token
};

// pairings: inner <L,R>; density int L g; trace sum_i <L(e_i), e_i>;
// omega (i/2) g(slot1, slot2) on one sector
struct FormulaTerm {
  std::string label;
  int line = 0;
  std::string verbatim, note, block;
  cd coefficient{1.0, 0.0};
  std::string rank_factor;
  std::string pairing = "inner";
  std::string sector;
  std::map<std::string, std::vector<Pipeline>> aux;
  std::vector<Pipeline> left, right;
  std::map<std::string, std::vector<Pipeline>> readings;
  std::vector<TermVariant> variants;
};

struct FormulaIR {
  std::string name, anchor, verbatim;
  int version = 1;
  std::vector<int> slots;
  std::vector<FormulaTerm> terms;
  nlohmann::json extra;  // fields not interpreted by the evaluator (ricci_potential lhs)
};

FormulaIR formula_from_json(const nlohmann::json& j);
nlohmann::json formula_to_json(const FormulaIR& f);
std::vector<std::string> builtin_formula_names();
const FormulaIR& builtin_formula(const std::string& name);
double rank_factor(const std::string& name, int n);

struct TensorOptions {
  std::string delta0c = "functions";  // reading of the complexified Laplacian term: functions | tx
  double shift = 0.5;                 // c in (Delta_0 + c)^-1
};

// walks every pipeline through the FormKind transitions; throws KindMismatch naming the term
void typecheck(const FormulaIR& f, Coef sector, const TensorOptions& opt = {});

// ---------------- evaluation ----------------
// slot k holds (mu_k, nu_k); empty Field values mean zero
using Slots = std::array<TangentVector, 5>;

struct TensorContext {
  const Calculus& C;
  const HarmonicBasis& tx;
  const HarmonicBasis& e;
  TensorOptions opt;
};

// combined orthonormal basis: TX elements first, then the bundle sector
struct TangentBasis {
  std::vector<TangentVector> elements;
  int n_tx = 0, n_e = 0;
  int dim() const { return static_cast<int>(elements.size()); }
  bool is_mu(int a) const { return a < n_tx; }
};
TangentBasis tangent_basis(const HarmonicBasis& tx, const HarmonicBasis& e, const Calculus& C);

// value of one term / the whole formula at given slots
cd evaluate_term(const FormulaTerm& t, const Slots& s, const TensorContext& ctx);
cd evaluate(const FormulaIR& f, const Slots& s, const TensorContext& ctx);

// sum_i <F e_i, e_i> over the basis
cd trace_over_basis(const std::function<Field(const Field&)>& F, const HarmonicBasis& b, const Calculus& C);

struct TensorResult {
  std::string label;
  std::vector<int> dims;
  std::vector<cd> entries;  // row-major
  std::vector<std::pair<std::string, std::vector<cd>>> terms;
  nlohmann::json meta;

  size_t index(const std::vector<int>& ix) const;
  cd at(const std::vector<int>& ix) const { return entries[index(ix)]; }
  double norm() const;
  Eigen::MatrixXcd matrix() const;  // rank-2 results
};

nlohmann::json tensor_to_json(const TensorResult& r);

// all slot combinations over the tangent basis; per-term breakdown kept
TensorResult evaluate_tensor(const FormulaIR& f, const TangentBasis& B, const TensorContext& ctx);

struct BaseMetric {
  cd g, omega_T, omega_M;
};
// g = <mu1,mu2> + <nu1,nu2>; omega(u, v) = Re g(iu, v) per summand
BaseMetric base_metric(const TangentVector& tv1, const TangentVector& tv2, const Calculus& C);

TensorResult metric_hessian(const TangentBasis& B, const TensorContext& ctx);
// || H(1,2;3,4) - conj H(2,1;4,3) || / ||H||
double hessian_hermitian_defect(const TensorResult& H);

struct AuditChoice {
  std::string term, unit;
  int sign = 1;
  std::string variant;
  double norm = 0;                     // Frobenius norm of the unit's contribution
  std::vector<std::string> available;  // declared variants touching this unit
};
struct AuditReport {
  double verbatim_defect = 0, audited_defect = 0;
  std::vector<AuditChoice> units;    // every unit with its final choice
  std::vector<AuditChoice> changes;  // only units that differ from the transcription
  TensorResult audited;
};
// greedy search over per-pipeline signs and declared conjugation variants
AuditReport audit_metric_hessian(const TangentBasis& B, const TensorContext& ctx);
// same search for any shipped formula; matrices are judged by (i-)Hermitian symmetry
AuditReport audit_formula(const FormulaIR& f, const TangentBasis& B, const TensorContext& ctx);
nlohmann::json audit_to_json(const AuditReport& a);

TensorResult ricci_form(const TangentBasis& B, const TensorContext& ctx);
// || iR - (iR)^H || / ||R||  (Ric(a,b) is i times a Hermitian matrix)
double ricci_hermitian_defect(const TensorResult& R);

struct LogdetVariations {
  TensorResult ade, delta0;
};
// blocks without a closed formula are filled by conjugate symmetry of the real potential
LogdetVariations logdet_variations(const TangentBasis& B, const TensorContext& ctx);

// |K1 + K2| for the two surviving integrals of the first variation
double kahler_first_derivative_residual(const TangentVector& dir, const TangentVector& tv1, const TangentVector& tv2,
                                        const TensorContext& ctx);

// over (dir nu, tv1 nu, tv2 mu) basis triples: rms is the exact mean over uniformly random
// unit harmonic inputs, max the worst basis triple
struct KahlerSummary {
  double rms = 0, max = 0;
  int triples = 0;
};
KahlerSummary kahler_residual_summary(const TangentBasis& B, const TensorContext& ctx);

struct IdentityReport {
  Eigen::MatrixXcd lhs, rhs, residual;
  double relative = 0;
  double coefficient_M = 0, coefficient_T = 0;  // as read from the formula
  bool coefficients_exact = false;
  double fitted_M = 0, fitted_T = 0;  // least-squares omega coefficients implied by the data
  std::map<std::string, double> block_residual;
  std::vector<std::pair<std::string, double>> attribution;  // Frobenius norm of each term
};
IdentityReport ricci_potential_identity(const TangentBasis& B, const TensorContext& ctx, int n);
nlohmann::json identity_to_json(const IdentityReport& r);

}  // namespace hl
