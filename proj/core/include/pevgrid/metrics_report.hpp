#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pevgrid/feeder_model.hpp"
#include "pevgrid/sim_engine.hpp"

namespace pevgrid {

struct VoltageBand {
  double low = 0.95;
  double high = 1.05;

  bool operator==(const VoltageBand&) const = default;
};

struct KpiOptions {
  VoltageBand band;
  double on_peak_start_h = 16.0;  ///< on-peak window [start, end) in hours of day
  double on_peak_end_h = 24.0;

  bool operator==(const KpiOptions&) const = default;
};

/// Five-number summary; `count` samples. All zero when empty.
struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  bool operator==(const BoxStats&) const = default;
};

/// Linear-interpolation quartiles of `values` (sorted copy).
BoxStats box_stats(std::vector<double> values);

/// Maximal run of timesteps in which some monitored voltage is outside the band.
struct ViolationEpisode {
  double start_minute = 0.0;
  double end_minute = 0.0;  ///< exclusive: start of the first step back in band
  int steps = 0;
  double worst_pu = 0.0;  ///< farthest from the band during the episode
  PhaseRef worst_at;

  bool operator==(const ViolationEpisode&) const = default;
};

struct Kpis {
  std::string scenario;
  double peak_kw = 0.0;
  double peak_minute = 0.0;
  std::optional<double> peak_increase_pct;  ///< vs the reference run's peak
  double min_voltage_pu = 0.0;
  PhaseRef min_voltage_at;
  double min_voltage_minute = 0.0;
  std::vector<ViolationEpisode> violations;
  BoxStats on_peak;
  BoxStats off_peak;
  /// Per-phase head load change at this run's peak minute vs the reference at the same minute.
  std::optional<std::array<double, 3>> phase_increase_pct;
  int nonconverged_steps = 0;
  int max_fixed_point_iterations = 0;

  bool operator==(const Kpis&) const = default;
};

/// Throws ContractViolation when `reference` has a different horizon or timestep.
Kpis compute_kpis(const RunResult& result, const RunResult* reference = nullptr, const KpiOptions& options = {});

/// Columns: minute, feeder_kw, feeder_kvar, min_voltage_pu,
/// fixed_point_iterations, converged, p1_kw, p2_kw, p3_kw, then one
/// v_<node>.<phase> column per monitored node-phase. Numbers are written with
/// round-trip precision.
void write_timeseries_csv(const RunResult& result, std::ostream& out);
/// Rebuilds the RunResult fields the CSV carries (enough to recompute Kpis).
RunResult read_timeseries_csv(std::istream& in, ScenarioLabel label);

std::string summary_json(const std::vector<Kpis>& kpis, const KpiOptions& options);
/// Inverse of summary_json. Throws ParseError.
std::vector<Kpis> parse_summary_json(std::string_view text);

struct ScenarioOutput {
  ScenarioLabel label;
  const RunResult* result;
  Kpis kpis;
};

/// Writes <out>/<label>/timeseries.csv per scenario, <out>/summary.json and
/// four SVG plots. `model` enables the load map. Returns the written files
/// in a fixed order; nothing is written for an empty list. Throws IoError
/// naming the file that failed.
std::vector<std::filesystem::path> emit_outputs(const std::vector<ScenarioOutput>& results,
                                                const std::filesystem::path& out_dir,
                                                const FeederModel* model = nullptr, const KpiOptions& options = {});

}  // namespace pevgrid
