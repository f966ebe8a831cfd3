// Hot paths of a propagation step at six sites, half filling.

#include <benchmark/benchmark.h>

#include <random>

#include "td2rdm/dynamics.hpp"
#include "td2rdm/generic_purifier.hpp"
#include "td2rdm/oracle.hpp"
#include "td2rdm/purifier.hpp"
#include "td2rdm/reconstruct.hpp"

using namespace td2rdm;

namespace {

HubbardConfig system_i(int sites = 6) {
  HubbardConfig cfg;
  cfg.sites = sites;
  cfg.particles = sites;
  cfg.interaction = 2.2;
  cfg.trap = 1.0;
  return cfg;
}

const SpinBlock2Rdm& ground_blocks(int sites) {
  static std::vector<SpinBlock2Rdm> cache(8);
  SpinBlock2Rdm& d = cache[static_cast<std::size_t>(sites)];
  if (d.sites == 0) {
    const HubbardOracle oracle(system_i(sites));
    d = oracle.spin_blocks(oracle.ground_state().state);
  }
  return d;
}

// Ground state plus an allowed direction of HS norm 1e-2.
SpinBlock2Rdm perturbed(const Purifier& purifier, const ConservedOperatorSet& ys, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  auto hermitian = [&](Eigen::Index n) {
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(gauss(rng), gauss(rng));
    return Matrix(0.5 * (a + a.adjoint()));
  };
  SpinBlock2Rdm d = ground_blocks(purifier.sites());
  Matrix s = project_conserved(
      purifier.kernel_project(hermitian(d.singlet.rows()), PairBlock::singlet), ys);
  Matrix t = purifier.kernel_project(hermitian(d.triplet.rows()), PairBlock::triplet);
  const double scale = 1e-2 / std::hypot(hs_norm(s), hs_norm(t));
  d.singlet += scale * s;
  d.triplet += scale * t;
  return d;
}

void BM_EquationOfMotion(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const EquationOfMotion eom(system_i(m));
  const SpinBlock2Rdm& d = ground_blocks(m);
  for (auto _ : state) benchmark::DoNotOptimize(eom.rhs(d, 1.0));
}
BENCHMARK(BM_EquationOfMotion)->Arg(4)->Arg(6)->Unit(benchmark::kMicrosecond);

void BM_CollisionFast(benchmark::State& state) {
  const CollisionEvaluator ce(6);
  const SpinBlock2Rdm& d = ground_blocks(6);
  for (auto _ : state) benchmark::DoNotOptimize(ce(d, 2.2));
}
BENCHMARK(BM_CollisionFast)->Unit(benchmark::kMicrosecond);

void BM_ReconstructDense(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const CollisionEvaluator ce(m);
  const SpinBlock2Rdm& d = ground_blocks(m);
  for (auto _ : state) benchmark::DoNotOptimize(ce.reconstructed(d));
}
BENCHMARK(BM_ReconstructDense)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Purify(benchmark::State& state) {
  const Purifier purifier(6);
  const ConservedOperatorSet ys = hubbard_conserved_set(system_i());
  const MVector m0 = MVector::from_particle(perturbed(purifier, ys, 11));
  PurificationConfig cfg;
  cfg.alpha = static_cast<double>(state.range(0));
  int iterations = 0;
  for (auto _ : state) {
    const PurificationResult r = purifier.purify(m0, ys, cfg);
    iterations = r.report.iterations_used;
    benchmark::DoNotOptimize(r.m.d.singlet.data());
  }
  state.counters["iterations"] = iterations;
}
BENCHMARK(BM_Purify)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_GenericPurify(benchmark::State& state) {
  const Purifier purifier(6);
  const ConservedOperatorSet ys = hubbard_conserved_set(system_i());
  const SpinBlock2Rdm d = perturbed(purifier, ys, 11);
  const auto constraints = q_condition_constraints(d);
  for (auto _ : state) benchmark::DoNotOptimize(generic_purify(d, constraints, ys, {}).d.singlet.data());
}
BENCHMARK(BM_GenericPurify)->Unit(benchmark::kMillisecond);

void BM_GlobalStep(benchmark::State& state) {
  const HubbardConfig cfg = system_i();
  PropagationConfig p;
  p.horizon = 0.01;
  const SpinBlock2Rdm& d = ground_blocks(6);
  for (auto _ : state) benchmark::DoNotOptimize(propagate(d, cfg, p).final_state.singlet.data());
}
BENCHMARK(BM_GlobalStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
