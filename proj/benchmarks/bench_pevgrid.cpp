#include <benchmark/benchmark.h>

#include "pevgrid/sim_engine.hpp"

using namespace pevgrid;

namespace {

const std::filesystem::path kData = PEVGRID_DATA_DIR;

const FeederModel& ieee34() {
  static const FeederModel m = load_feeder(kData / "ieee34.json");
  return m;
}

const PreparedScenario& reference() {
  static const PreparedScenario p = prepare_scenario(load_scenario_config(kData / "reference_scenario.json"));
  return p;
}

void BM_SolveBaseCase(benchmark::State& state) {
  const PowerFlowSolver solver(ieee34());
  const auto loads = nominal_loads(ieee34());
  const auto taps = configured_taps(ieee34());
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(loads, taps));
}
BENCHMARK(BM_SolveBaseCase);

void BM_SolveWarmStart(benchmark::State& state) {
  const PowerFlowSolver solver(ieee34());
  const auto loads = nominal_loads(ieee34());
  const auto taps = configured_taps(ieee34());
  const auto previous = solver.solve(loads.scaled(0.98), taps);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(loads, taps, &previous));
}
BENCHMARK(BM_SolveWarmStart);

/// One timestep at the evening peak, where every PEV is plugged in.
void BM_ScenarioStep(benchmark::State& state) {
  const auto label = static_cast<ScenarioLabel>(state.range(0));
  state.SetLabel(std::string(to_string(label)));
  ScenarioRun run(reference(), label);
  for (int t = 0; t < 1200; ++t) run.step();
  const std::size_t horizon = reference().config.horizon_min / reference().config.timestep_min;
  for (auto _ : state) {
    if (run.result().steps() >= horizon) {
      state.SkipWithError("horizon exhausted");
      break;
    }
    run.step();
  }
}
BENCHMARK(BM_ScenarioStep)->DenseRange(0, 4)->Iterations(200);

void BM_FullScenario(benchmark::State& state) {
  const auto label = static_cast<ScenarioLabel>(state.range(0));
  state.SetLabel(std::string(to_string(label)));
  for (auto _ : state) benchmark::DoNotOptimize(run_scenario(reference(), label));
}
BENCHMARK(BM_FullScenario)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
