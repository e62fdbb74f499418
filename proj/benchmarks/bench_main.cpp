#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "veil/engine.hpp"
#include "veil/eval.hpp"
#include "veil/occupancy.hpp"
#include "veil/synth_approx.hpp"
#include "veil/synth_exact.hpp"

using namespace veil;

namespace {

std::string asset(const char* name) { return std::string(VEIL_ASSET_DIR) + "/" + name; }

ProblemInstance loadInstance(const char* specs) {
  const auto sf = loadSpecFile(asset(specs));
  ProblemInstance inst;
  inst.specs = sf.specs;
  inst.groundTruth = sf.groundTruth;
  return inst;
}

void BM_DenseLp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  opt::LpModel m;
  for (int j = 0; j < n; ++j) m.addVar(0.0, opt::kInf, u(rng));
  for (int r = 0; r < n / 2; ++r) {
    std::vector<opt::SparseEntry> e;
    for (int j = 0; j < n; ++j) e.push_back({j, u(rng)});
    m.addRow(std::move(e), -opt::kInf, 1.0 + u(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(opt::solveLp(m).objective);
}
BENCHMARK(BM_DenseLp)->Arg(20)->Arg(80)->Arg(200);

void BM_ProductConstruction(benchmark::State& state) {
  const Mdp m = loadModelFile(asset("grid6x6.json"));
  const auto inst = loadInstance("resupply2.spec");
  const int H = arenaHorizon(inst);
  const auto dfas = instanceAutomata(inst, H);
  for (auto _ : state) benchmark::DoNotOptimize(product(expand(m, H), dfas).numStates());
}
BENCHMARK(BM_ProductConstruction)->Unit(benchmark::kMillisecond);

void BM_FlowOracle(benchmark::State& state) {
  const Mdp m = loadModelFile(asset("grid6x6.json"));
  const auto inst = loadInstance("resupply2.spec");
  const int H = arenaHorizon(inst);
  const auto built = assembleExactProgram(product(expand(m, H), instanceAutomata(inst, H)), inst);
  const opt::FlowOracle oracle(built.program.flow());
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> reward(built.program.numVariables());
  for (double& r : reward) r = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(oracle.maximize(reward).value);
}
BENCHMARK(BM_FlowOracle)->Unit(benchmark::kMicrosecond);

void BM_EngineRootRelaxation(benchmark::State& state) {
  const Mdp m = loadModelFile(asset("grid6x6.json"));
  const auto inst = loadInstance("resupply2.spec");
  const int H = arenaHorizon(inst);
  const auto built = assembleExactProgram(product(expand(m, H), instanceAutomata(inst, H)), inst);
  for (auto _ : state) {
    opt::ConcaveMaximizer eng(built.program);
    benchmark::DoNotOptimize(eng.maximize(1.0).upper);
  }
}
BENCHMARK(BM_EngineRootRelaxation)->Unit(benchmark::kMillisecond);

void BM_ExactSatisfaction(benchmark::State& state) {
  const Mdp m = loadModelFile(asset("grid6x6.json"));
  const auto inst = loadInstance("resupply2.spec");
  const auto r = synthesizeExact(m, inst);
  for (auto _ : state) benchmark::DoNotOptimize(exactSatisfaction(*r.policy, inst.specs));
}
BENCHMARK(BM_ExactSatisfaction)->Unit(benchmark::kMillisecond);

void BM_Simulation(benchmark::State& state) {
  const Mdp m = loadModelFile(asset("grid6x6.json"));
  const auto inst = loadInstance("resupply1.spec");
  const auto r = synthesizeExact(m, inst);
  SimulationOptions o;
  o.trials = 10000;
  o.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(*r.policy, inst.specs, o).trials);
  state.SetItemsProcessed(state.iterations() * static_cast<long>(o.trials));
}
BENCHMARK(BM_Simulation)->Unit(benchmark::kMillisecond);

void BM_Synthesis(benchmark::State& state) {
  const Mdp m = loadModelFile(asset(state.range(0) == 2 ? "surveillance.json" : "grid6x6.json"));
  const char* specs[] = {"resupply1.spec", "resupply2.spec", "surveillance.spec"};
  const auto inst = loadInstance(specs[state.range(0)]);
  const bool exact = state.range(1) == 0;
  for (auto _ : state)
    benchmark::DoNotOptimize((exact ? synthesizeExact(m, inst) : synthesizeApprox(m, inst)).entropyBits);
}
BENCHMARK(BM_Synthesis)->ArgsProduct({{0, 1, 2}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
