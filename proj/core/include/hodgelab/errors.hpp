#pragma once
#include <stdexcept>
#include <string>

namespace hl {

// error codes map onto CLI exit codes: config -> 2, numerical -> 3
enum class ErrorKind {
  UnsupportedGenus,
  LevelOutOfRange,
  NonEmbeddedMesh,
  UnsupportedDegree,
  MaxRetriesExceeded,
  KindMismatch,
  SingularAssembly,
  SolverBreakdown,
  GapUndecidable,
  MissingChiData,
  EllipticityViolated,
  SeriesDiverged,
  GridTooCoarse,
  FitResidualTooLarge,
  EigenNotConverged,
  TailFitUnstable,
  ConfigError,
};

const char* error_name(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind k, const std::string& msg)
      : std::runtime_error(std::string(error_name(k)) + ": " + msg), kind_(k) {}
  ErrorKind kind() const { return kind_; }
  bool is_config() const {
    return kind_ == ErrorKind::ConfigError || kind_ == ErrorKind::LevelOutOfRange ||
           kind_ == ErrorKind::UnsupportedGenus || kind_ == ErrorKind::UnsupportedDegree ||
           kind_ == ErrorKind::KindMismatch;
  }

 private:
  ErrorKind kind_;
};

}  // namespace hl
