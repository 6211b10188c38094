#pragma once
#include <memory>

#include "hodgelab/bundle.hpp"
#include "hodgelab/calculus.hpp"
#include "hodgelab/surface.hpp"

namespace testutil {

inline std::shared_ptr<const hl::UnitaryRep> rep7() {
  static auto r = std::make_shared<const hl::UnitaryRep>(hl::random_unitary_rep(hl::bolza_group(), 2, 0, 7));
  return r;
}

inline std::shared_ptr<const hl::Calculus> calc(int level) {
  static std::shared_ptr<const hl::Calculus> cache[9];
  if (!cache[level]) {
    auto m = std::make_shared<const hl::SurfaceMesh>(hl::mesh_fundamental_domain(hl::bolza_group(), level));
    cache[level] = std::make_shared<const hl::Calculus>(m, rep7());
  }
  return cache[level];
}

}  // namespace testutil
