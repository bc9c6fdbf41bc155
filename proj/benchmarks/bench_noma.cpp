#include <benchmark/benchmark.h>

#include <random>

#include "noma/certify.hpp"
#include "noma/channel.hpp"
#include "noma/formulation.hpp"
#include "noma/hermitian.hpp"

using namespace noma;

namespace {

Scenario fig_scenario(double eps, double gamma_db) {
  Scenario s = Scenario::uniform(8, 3, eps, gamma_db, 0.01);
  s.seed = 1;
  return s;
}

// First draw at or after `from` where the robust design is optimal.
std::uint64_t feasible_draw(const Scenario& s, std::uint64_t from) {
  for (std::uint64_t t = from;; ++t) {
    if (design(s, generate_channels(s, t), Scheme::robust).solved()) return t;
  }
}

}  // namespace

static void BM_MinEigenvalue(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a(i, j) = cplx(g(rng), g(rng));
  }
  const HermitianMatrix h = HermitianMatrix::hermitian_part(a);
  for (auto _ : state) benchmark::DoNotOptimize(min_eigenvalue(h));
}
BENCHMARK(BM_MinEigenvalue)->Arg(3)->Arg(9)->Arg(18);

static void BM_GenerateChannels(benchmark::State& state) {
  const Scenario s = fig_scenario(0.06, 10.0);
  std::uint64_t t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_channels(s, t++));
}
BENCHMARK(BM_GenerateChannels);

static void BM_RobustDesign(benchmark::State& state) {
  const Scenario s = fig_scenario(0.02, static_cast<double>(state.range(0)));
  const ChannelSet cs = generate_channels(s, feasible_draw(s, 0));
  for (auto _ : state) benchmark::DoNotOptimize(design(s, cs, Scheme::robust));
}
BENCHMARK(BM_RobustDesign)->Arg(0)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_NonRobustDesign(benchmark::State& state) {
  const Scenario s = fig_scenario(0.06, 10.0);
  const ChannelSet cs = generate_channels(s, 0);
  for (auto _ : state) benchmark::DoNotOptimize(design(s, cs, Scheme::nonrobust));
}
BENCHMARK(BM_NonRobustDesign)->Unit(benchmark::kMillisecond);

static void BM_OmaDesign(benchmark::State& state) {
  const Scenario s = fig_scenario(0.06, 10.0);
  std::uint64_t t = 0;
  while (!design(s, generate_channels(s, t), Scheme::oma).solved()) ++t;
  const ChannelSet cs = generate_channels(s, t);
  for (auto _ : state) benchmark::DoNotOptimize(design(s, cs, Scheme::oma));
}
BENCHMARK(BM_OmaDesign)->Unit(benchmark::kMillisecond);

// Infeasible draws at the criterion-1 setting: prescreen versus full solve.
static void BM_InfeasibleDraw(benchmark::State& state) {
  const Scenario s = fig_scenario(0.06, 10.0);
  std::uint64_t t = 0;
  while (design(s, generate_channels(s, t), Scheme::robust).solved()) ++t;
  const ChannelSet cs = generate_channels(s, t);
  DesignOptions o;
  o.prescreen = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(design(s, cs, Scheme::robust, o));
}
BENCHMARK(BM_InfeasibleDraw)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

static void BM_CertifyDesign(benchmark::State& state) {
  const Scenario s = fig_scenario(0.02, 4.0);
  const ChannelSet cs = generate_channels(s, feasible_draw(s, 0));
  const BeamDesign d = design(s, cs, Scheme::robust);
  for (auto _ : state) benchmark::DoNotOptimize(certify_design(d, s, cs.h_hat));
}
BENCHMARK(BM_CertifyDesign)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
