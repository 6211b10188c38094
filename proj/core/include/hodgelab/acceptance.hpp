#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hodgelab/bundle.hpp"
#include "hodgelab/calculus.hpp"
#include "hodgelab/harmonic.hpp"
#include "hodgelab/surface.hpp"
#include "hodgelab/tensors.hpp"

namespace hl {

const char* version();

// plain key = value file, '#' starts a comment
struct RunConfig {
  int level = 3;
  int level_min = 2, level_max = 4;
  int rank = 2;
  int degree = 0;
  std::uint64_t seed = 7;
  double shift = 0.5;
  std::string delta0c = "functions";
  bool audit = false;
  std::string formula = "metric_hessian";
  std::string op = "lap0";  // lap0 | lapAdE
  int count = 60;
  int grid = 128;
  double scale = 0.02;
  double trunc_radius = 0.95;
  int max_iter = 200;
  double tx_min_gap_ratio = 5;
  std::string output = "hodgelab-out";
  std::vector<int> criteria;  // empty: all
};

// unknown keys and malformed values throw ConfigError naming the key
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
void set_config_value(RunConfig& c, const std::string& key, const std::string& value);
nlohmann::json config_to_json(const RunConfig& c);
std::string config_to_text(const RunConfig& c);

// meshes, calculi and harmonic bases shared between criteria, built on demand
class Workspace {
 public:
  explicit Workspace(RunConfig cfg);
  const RunConfig& config() const { return cfg_; }
  std::shared_ptr<const UnitaryRep> rep() const { return rep_; }
  std::shared_ptr<const Calculus> calculus(int level);
  const HarmonicBasis& basis(Coef c, int level);
  TensorContext context(int level);

 private:
  RunConfig cfg_;
  std::shared_ptr<const UnitaryRep> rep_;
  std::map<int, std::shared_ptr<const Calculus>> calc_;
  std::map<std::pair<int, int>, HarmonicBasis> bases_;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  bool breakdown = false;  // numerical error raised while evaluating
  std::string summary;
  nlohmann::json details;
};

CriterionResult run_criterion(int id, Workspace& ws);
std::vector<CriterionResult> run_acceptance(Workspace& ws,
                                            const std::function<void(const CriterionResult&)>& progress = {});
std::string criterion_line(const CriterionResult& r);

// every report carries the config and the code version
nlohmann::json report_envelope(const std::string& command, const RunConfig& c);
nlohmann::json acceptance_report(const RunConfig& c, const std::vector<CriterionResult>& results);
std::string dump_report(const nlohmann::json& j);

}  // namespace hl
