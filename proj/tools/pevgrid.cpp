#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "pevgrid/error.hpp"
#include "pevgrid/metrics_report.hpp"
#include "pevgrid/sim_engine.hpp"

namespace fs = std::filesystem;
using namespace pevgrid;

namespace {

fs::path data_dir() {
  if (const char* env = std::getenv("PEVGRID_DATA_DIR")) return env;
  return PEVGRID_DATA_DIR;
}

/// "ieee34" names the bundled feeder; anything else is a path.
fs::path feeder_path(const std::string& arg) {
  if (arg == "ieee34") return data_dir() / "ieee34.json";
  return arg;
}

void setup_logging() {
  const char* no_color = std::getenv("NO_COLOR");
  std::shared_ptr<spdlog::logger> logger;
  if (no_color && *no_color)
    logger = spdlog::stderr_logger_mt("pevgrid");
  else
    logger = spdlog::stderr_color_mt("pevgrid");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_validate(const std::string& feeder, bool benchmark, const std::string& dump) {
  const auto path = feeder_path(feeder);
  const FeederModel model = load_feeder(path);
  spdlog::info("{}: {} nodes, {} segments, {} regulators, {} capacitors, {} transformers, {} loads", model.name,
               model.nodes.size(), model.segments.size(), model.regulators.size(), model.capacitors.size(),
               model.transformers.size(), model.loads.size());
  const PowerFlowSolver solver(model);
  const auto t0 = std::chrono::steady_clock::now();
  const auto solution = solver.solve(nominal_loads(model), configured_taps(model));
  const double elapsed = seconds_since(t0);
  std::cout << "base case: " << to_string(solution.status) << " in " << solution.iterations << " iterations, "
            << elapsed * 1e3 << " ms\n";
  std::cout << "feeder head: " << solution.total_head_kva.real() << " kW, " << solution.total_head_kva.imag()
            << " kvar; losses " << solution.losses_kw << " kW\n";
  if (!dump.empty()) write_solution_csv(model, solution, dump);
  if (!solution.converged()) {
    spdlog::error("base case did not converge: {}", solution.diagnostic);
    return 1;
  }
  if (benchmark) {
    const fs::path bench = path.parent_path() / (path.stem().string() + "_benchmark.csv");
    const auto d = compare_to_benchmark(model, solution, read_benchmark_csv(bench));
    std::cout << "benchmark: " << d.points << " node-phases\n";
    std::cout << "max |dV| = " << d.max_magnitude_pu << " pu at " << d.worst_magnitude_at.to_string() << "\n";
    std::cout << "max |dangle| = " << d.max_angle_deg << " deg at " << d.worst_angle_at.to_string() << "\n";
    if (d.max_magnitude_pu > 1e-3 || d.max_angle_deg > 0.05) {
      spdlog::error("deviation exceeds 0.001 pu / 0.05 deg");
      return 1;
    }
  }
  return 0;
}

ScenarioConfig config_with_seed(const std::string& path, std::optional<std::uint64_t> seed) {
  ScenarioConfig config = load_scenario_config(path);
  if (seed) config.seed = *seed;
  return config;
}

void report(const std::vector<ScenarioOutput>& outputs, const std::vector<fs::path>& manifest) {
  for (const auto& o : outputs) {
    std::cout << o.kpis.scenario << ": peak " << o.kpis.peak_kw << " kW";
    if (o.kpis.peak_increase_pct) std::cout << " (" << *o.kpis.peak_increase_pct << "% vs no-PEV)";
    std::cout << ", min V " << o.kpis.min_voltage_pu << " pu at " << o.kpis.min_voltage_at.to_string() << ", "
              << o.kpis.violations.size() << " violation episodes";
    if (o.kpis.nonconverged_steps) std::cout << ", " << o.kpis.nonconverged_steps << " non-converged steps";
    std::cout << "\n";
  }
  for (const auto& p : manifest) std::cout << "wrote " << p.string() << "\n";
}

int cmd_run(const std::string& config_path, const std::string& label_text, std::optional<std::uint64_t> seed,
            const std::string& out) {
  const ScenarioLabel label = parse_scenario_label(label_text);
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedScenario prepared = prepare_scenario(config_with_seed(config_path, seed));
  spdlog::info("load scale {:.6f}, {} sessions", prepared.load_scale, prepared.sessions.size());
  const RunResult result = run_scenario(prepared, label);
  std::vector<ScenarioOutput> outputs{{label, &result, compute_kpis(result)}};
  const auto manifest = emit_outputs(outputs, out, prepared.model.get());
  spdlog::info("finished in {:.2f} s", seconds_since(t0));
  report(outputs, manifest);
  return outputs.front().kpis.nonconverged_steps ? 2 : 0;
}

int cmd_compare(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
                unsigned threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedScenario prepared = prepare_scenario(config_with_seed(config_path, seed));
  spdlog::info("load scale {:.6f}, {} sessions", prepared.load_scale, prepared.sessions.size());
  const std::vector<ScenarioLabel> labels(kAllScenarios.begin(), kAllScenarios.end());
  const auto results = run_scenarios(prepared, labels, threads);
  std::vector<ScenarioOutput> outputs;
  int nonconverged = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    outputs.push_back({labels[i], &results[i], compute_kpis(results[i], &results.front())});
    nonconverged += outputs.back().kpis.nonconverged_steps;
  }
  const auto manifest = emit_outputs(outputs, out, prepared.model.get());
  spdlog::info("finished in {:.2f} s", seconds_since(t0));
  report(outputs, manifest);
  return nonconverged ? 2 : 0;
}

int cmd_sample_sessions(const std::string& config_path, std::optional<std::uint64_t> seed) {
  const ScenarioConfig config = config_with_seed(config_path, seed);
  config.check();
  write_sessions_csv(sample_sessions(config.behavior, config.placements, substream_seed(config.seed, "sessions")),
                     std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Quasi-static PEV charging simulation on radial distribution feeders"};
  app.require_subcommand(1);

  std::string feeder, dump, config, label, out;
  bool benchmark = false;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;

  auto* validate = app.add_subcommand("validate", "Check a feeder file and solve its base case");
  validate->add_option("--feeder", feeder, "Feeder JSON path, or ieee34 for the bundled feeder")->required();
  validate->add_flag("--benchmark", benchmark, "Compare against <feeder>_benchmark.csv");
  validate->add_option("--dump", dump, "Write the base-case solution CSV here");

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--scenario", label, "no-PEV, uncontrolled, energy-shift, reactive-power or energy-shift+reactive-power")
      ->required();
  run->add_option("--seed", seed, "Overrides the config seed");
  run->add_option("--out", out, "Output directory")->required();

  auto* compare = app.add_subcommand("compare", "Run all five scenarios with shared sessions");
  compare->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  compare->add_option("--seed", seed, "Overrides the config seed");
  compare->add_option("--out", out, "Output directory")->required();
  compare->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  auto* sample = app.add_subcommand("sample-sessions", "Print the sampled charging sessions as CSV");
  sample->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("--seed", seed, "Overrides the config seed");

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*validate) return cmd_validate(feeder, benchmark, dump);
    if (*run) return cmd_run(config, label, seed, out);
    if (*compare) return cmd_compare(config, seed, out, threads);
    if (*sample) return cmd_sample_sessions(config, seed);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
