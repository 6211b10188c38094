// one line per criterion; exit 0 once the suite has run, --strict also fails on FAIL lines
#include <cstdio>
#include <cstring>
#include <exception>

#include "hodgelab/acceptance.hpp"

int main(int argc, char** argv) {
  bool strict = false;
  hl::RunConfig cfg;
  try {
    for (int i = 1; i < argc; ++i) {
      if (std::strcmp(argv[i], "--strict") == 0)
        strict = true;
      else if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc)
        cfg = hl::load_config(argv[++i]);
      else {
        std::fprintf(stderr, "usage: acceptance [--strict] [--config FILE]\n");
        return 2;
      }
    }
    hl::Workspace ws(cfg);
    int failed = 0;
    auto results = hl::run_acceptance(ws, [&](const hl::CriterionResult& r) {
      std::printf("%s\n", hl::criterion_line(r).c_str());
      std::fflush(stdout);
    });
    for (const auto& r : results) failed += r.pass ? 0 : 1;
    std::printf("%d/%zu criteria pass\n", int(results.size()) - failed, results.size());
    return strict && failed ? 1 : 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: %s\n", e.what());
    return 3;
  }
}
