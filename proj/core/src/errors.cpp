#include "hodgelab/errors.hpp"

namespace hl {

const char* error_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnsupportedGenus: return "UnsupportedGenus";
    case ErrorKind::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorKind::NonEmbeddedMesh: return "NonEmbeddedMesh";
    case ErrorKind::UnsupportedDegree: return "UnsupportedDegree";
    case ErrorKind::MaxRetriesExceeded: return "MaxRetriesExceeded";
    case ErrorKind::KindMismatch: return "KindMismatch";
    case ErrorKind::SingularAssembly: return "SingularAssembly";
    case ErrorKind::SolverBreakdown: return "SolverBreakdown";
    case ErrorKind::GapUndecidable: return "GapUndecidable";
    case ErrorKind::MissingChiData: return "MissingChiData";
    case ErrorKind::EllipticityViolated: return "EllipticityViolated";
    case ErrorKind::SeriesDiverged: return "SeriesDiverged";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::FitResidualTooLarge: return "FitResidualTooLarge";
    case ErrorKind::EigenNotConverged: return "EigenNotConverged";
    case ErrorKind::TailFitUnstable: return "TailFitUnstable";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace hl
