#include <benchmark/benchmark.h>

#include "hodgelab/acceptance.hpp"
#include "hodgelab/deform.hpp"
#include "hodgelab/spectral.hpp"

namespace {

hl::Workspace& ws() {
  static hl::Workspace w(hl::RunConfig{});
  return w;
}

void BM_mesh(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(hl::mesh_fundamental_domain(hl::bolza_group(), int(st.range(0))));
}
BENCHMARK(BM_mesh)->DenseRange(2, 4)->Unit(benchmark::kMillisecond);

void BM_harmonic_ade(benchmark::State& st) {
  auto C = ws().calculus(int(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(hl::harmonic_basis(hl::Coef::AdE, *C));
}
BENCHMARK(BM_harmonic_ade)->DenseRange(2, 3)->Unit(benchmark::kMillisecond);

void BM_harmonic_tx(benchmark::State& st) {
  auto C = ws().calculus(int(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(hl::harmonic_basis(hl::Coef::TX, *C));
}
BENCHMARK(BM_harmonic_tx)->DenseRange(2, 3)->Unit(benchmark::kMillisecond);

void BM_ricci_form(benchmark::State& st) {
  hl::TensorContext ctx = ws().context(int(st.range(0)));
  hl::TangentBasis B = hl::tangent_basis(ctx.tx, ctx.e, ctx.C);
  const hl::FormulaIR& f = hl::builtin_formula("ricci_form");
  for (auto _ : st) benchmark::DoNotOptimize(hl::evaluate_tensor(f, B, ctx));
}
BENCHMARK(BM_ricci_form)->DenseRange(2, 3)->Unit(benchmark::kMillisecond);

void BM_eigen_spectrum(benchmark::State& st) {
  auto C = ws().calculus(3);
  hl::LaplaceProblem lap = hl::surface_laplacian(*C, hl::Coef::trivial);
  for (auto _ : st) benchmark::DoNotOptimize(hl::eigen_spectrum(lap, int(st.range(0))));
}
BENCHMARK(BM_eigen_spectrum)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_solve_beltrami(benchmark::State& st) {
  hl::BeltramiCoefficient mu = hl::constant_coefficient(hl::cd(0.05, 0.02), hl::cd(0.1, 0), 0.4);
  hl::BeltramiParams p;
  p.grid = int(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(hl::solve_beltrami(mu, p));
}
BENCHMARK(BM_solve_beltrami)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
