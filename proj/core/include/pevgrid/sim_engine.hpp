#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "pevgrid/charge_control.hpp"
#include "pevgrid/feeder_model.hpp"
#include "pevgrid/pev_agent.hpp"
#include "pevgrid/powerflow.hpp"

namespace pevgrid {

enum class ScenarioLabel { NoPev, Uncontrolled, EnergyShift, ReactivePower, Combined };

inline constexpr std::array<ScenarioLabel, 5> kAllScenarios{ScenarioLabel::NoPev, ScenarioLabel::Uncontrolled,
                                                            ScenarioLabel::EnergyShift, ScenarioLabel::ReactivePower,
                                                            ScenarioLabel::Combined};

/// "no-PEV", "uncontrolled", "energy-shift", "reactive-power",
/// "energy-shift+reactive-power".
std::string_view to_string(ScenarioLabel label);
/// Throws ConfigError listing the valid labels.
ScenarioLabel parse_scenario_label(std::string_view text);

/// `base` with the label's strategy flags applied.
ControlConfig apply_label(ControlConfig base, ScenarioLabel label);

/// Daily normalized load shape, linearly interpolated and wrapping at midnight.
class LoadProfile {
 public:
  struct Point {
    double minute = 0.0;  ///< minute of day, [0, 1440)
    double value = 0.0;
  };

  LoadProfile() = default;
  /// Throws ParseError unless minutes strictly increase within [0, 1440) and values are >= 0.
  explicit LoadProfile(std::vector<Point> points);

  static LoadProfile read_csv(std::istream& in);
  static LoadProfile read_csv(const std::filesystem::path& path);

  /// Value at `minute` (any real; taken modulo one day).
  double at(double minute) const;
  double max() const;
  const std::vector<Point>& points() const { return points_; }

 private:
  std::vector<Point> points_;
};

enum class TapSource { Configured, NoPevPeak };

std::string_view to_string(TapSource source);
TapSource parse_tap_source(std::string_view text);

struct FixedPointOptions {
  double damping = 0.5;
  int max_iterations = 20;
  double tolerance_pu = 1e-4;

  bool operator==(const FixedPointOptions&) const = default;
};

struct ScenarioConfig {
  std::filesystem::path feeder_path;
  std::filesystem::path profile_path;
  double target_peak_kw = 3030.0;
  std::optional<double> load_scale;  ///< skips calibration when set
  std::vector<Placement> placements;
  BehaviorConfig behavior;
  ChargerModel charger;
  ControlConfig control;
  int horizon_min = 2880;
  int timestep_min = 1;
  std::uint64_t seed = 1;
  SolverOptions solver;
  FixedPointOptions fixed_point;
  RegulatorMode regulator_mode = RegulatorMode::Fixed;
  /// Initial taps of every run: the feeder file's ("configured"), or those the
  /// automatic controls settle on at the calibrated no-PEV peak ("no-PEV peak").
  TapSource tap_source = TapSource::Configured;
  TapControlOptions tap_control;
  std::optional<double> source_voltage_pu;  ///< overrides the feeder file
  /// Empty means every load-bearing node-phase; 856.2 is always added.
  std::vector<PhaseRef> monitored;

  /// Throws ConfigError.
  void check() const;
};

/// Parses the JSON scenario document; relative paths resolve against `base_dir`.
ScenarioConfig parse_scenario_config(std::string_view text, const std::filesystem::path& base_dir);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

struct CalibrationOptions {
  SolverOptions solver;
  RegulatorMode regulator_mode = RegulatorMode::Fixed;
  TapControlOptions tap_control;
  double relative_tolerance = 1e-5;
  /// Minutes whose profile value is at least this fraction of the maximum are searched for the peak.
  double candidate_fraction = 0.98;
};

struct PeakOperatingPoint {
  double peak_kw = 0.0;
  double minute = 0.0;  ///< minute of day of the peak
  TapSettings taps;     ///< regulator taps in effect at the peak
};

/// Solved no-PEV feeder-head peak for load multiplier `scale`. Candidate
/// minutes are solved in time order with taps carried from one to the next.
/// Throws CalibrationError if a solve fails.
PeakOperatingPoint no_pev_peak(const FeederModel& model, const LoadProfile& profile, double scale,
                               const CalibrationOptions& options = {});

/// Multiplier m such that the solved no-PEV feeder-head peak equals
/// `target_peak_kw`, by bisection. Throws CalibrationError when the target
/// cannot be bracketed (for example beyond voltage collapse).
double calibrate_load_scale(const FeederModel& model, const LoadProfile& profile, double target_peak_kw,
                            const CalibrationOptions& options = {});

/// Everything shared by the five scenario runs of one config and seed.
struct PreparedScenario {
  ScenarioConfig config;
  std::shared_ptr<const FeederModel> model;
  LoadProfile profile;
  double load_scale = 1.0;
  TapSettings initial_taps;
  std::vector<ChargingSession> sessions;
  std::vector<PhaseRef> monitored;
};

/// Loads the feeder and profile, calibrates, samples sessions from the
/// "sessions" sub-stream of the seed.
PreparedScenario prepare_scenario(const ScenarioConfig& config);
/// Same, with an already loaded feeder and profile.
PreparedScenario prepare_scenario(const ScenarioConfig& config, FeederModel model, LoadProfile profile);

struct RunResult {
  ScenarioLabel label = ScenarioLabel::NoPev;
  int timestep_min = 1;
  double load_scale = 1.0;
  std::vector<PhaseRef> monitored;
  std::vector<std::string> node_ids;

  // One entry per timestep.
  std::vector<double> minute;
  std::vector<double> feeder_kw;
  std::vector<double> feeder_kvar;
  std::vector<std::array<double, 3>> phase_kw;
  std::vector<std::vector<double>> voltage_pu;  ///< [step][monitored]
  std::vector<std::vector<double>> node_kw;     ///< [step][node], loads plus PEVs
  std::vector<int> fixed_point_iterations;
  std::vector<char> converged;
  std::vector<char> tap_limit_exceeded;
  std::vector<TapSettings> taps;

  // Per PEV (vehicle id), one entry per timestep. Empty for no-PEV.
  std::vector<std::vector<double>> pev_p_kw;
  std::vector<std::vector<double>> pev_q_kvar;
  std::vector<std::vector<double>> pev_soc;

  // Per session, in session order.
  std::vector<double> session_energy_kwh;
  std::vector<double> session_start;    ///< scheduled charge start
  std::vector<double> session_t_charge; ///< time_to_full at the scenario's P limit

  std::size_t steps() const { return minute.size(); }
  double min_voltage(std::size_t step) const;
  std::size_t vehicle_count() const { return pev_p_kw.size(); }
};

/// One scenario stepped through time. Sessions are shared with the
/// PreparedScenario, which must outlive the run.
class ScenarioRun {
 public:
  ScenarioRun(const PreparedScenario& prepared, ScenarioLabel label);
  ~ScenarioRun();
  ScenarioRun(const ScenarioRun&) = delete;
  ScenarioRun& operator=(const ScenarioRun&) = delete;

  bool done() const;
  /// Advances one timestep. Throws PowerFlowError naming the step index when
  /// the feeder solve diverges.
  void step();
  const RunResult& result() const;
  RunResult take_result();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RunResult run_scenario(const PreparedScenario& prepared, ScenarioLabel label);
RunResult run_scenario(const ScenarioConfig& config, ScenarioLabel label);

/// Runs `labels` against one prepared scenario on up to `threads` worker
/// threads (0 picks the hardware concurrency). Results are in `labels` order
/// and do not depend on the thread count. The first failure is rethrown.
std::vector<RunResult> run_scenarios(const PreparedScenario& prepared, const std::vector<ScenarioLabel>& labels,
                                     unsigned threads = 1);

}  // namespace pevgrid
