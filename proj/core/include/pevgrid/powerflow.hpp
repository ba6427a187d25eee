#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pevgrid/feeder_model.hpp"

namespace pevgrid {

/// One load injection at a model node. Power is in kW/kvar at nominal voltage;
/// loads consume positive P, positive Q is inductive. Wye entries are per
/// phase A, B, C; delta entries per branch AB, BC, CA.
struct LoadEntry {
  std::size_t node = 0;  ///< index into FeederModel::nodes
  LoadConnection connection = LoadConnection::Wye;
  LoadModel model = LoadModel::ConstantPower;
  PhaseVector s_kva{};

  bool operator==(const LoadEntry&) const = default;
};

struct LoadSet {
  std::vector<LoadEntry> entries;

  void add(const LoadEntry& e) { entries.push_back(e); }
  /// Every entry multiplied by `factor`; models and phase split are kept.
  LoadSet scaled(double factor) const;
};

/// The feeder's spot and distributed loads at nominal size. A distributed load
/// becomes two half-loads, one at each end of its segment.
LoadSet nominal_loads(const FeederModel& model);

/// Regulator tap positions, one triple per FeederModel::regulators entry.
using TapSettings = std::vector<std::array<int, 3>>;

TapSettings configured_taps(const FeederModel& model);

/// Current (amps, per phase, flowing into the load) drawn by `entry` at
/// line-to-neutral voltages `v_ln` (volts). `nominal_ln_volts` is the rated
/// line-to-neutral voltage of the node. Throws VoltageCollapse when a used
/// phase (or phase pair, for delta) is below `collapse_floor_pu`.
PhaseVector load_injection_current(const LoadEntry& entry, const PhaseVector& v_ln, double nominal_ln_volts,
                                   double collapse_floor_pu = 0.5);

struct SolverOptions {
  double tolerance_pu = 1e-6;
  int max_iterations = 100;
  double collapse_floor_pu = 0.5;
};

enum class SolveStatus { Converged, MaxIterations, VoltageCollapse };

std::string_view to_string(SolveStatus status);

struct PowerFlowSolution {
  std::vector<PhaseVector> voltage_v;   ///< per node, line-to-neutral volts; zero on absent phases
  std::vector<PhaseVector> voltage_pu;  ///< per node, on the node's base
  std::vector<PhaseVector> segment_current_a;      ///< per segment, series current in tree direction
  std::vector<PhaseVector> transformer_current_a;  ///< per transformer, secondary side
  std::vector<PhaseVector> regulator_output_v;     ///< per regulator
  std::vector<PhaseVector> regulator_current_a;    ///< per regulator, output side
  PhaseVector head_kva{};                           ///< per phase, at the source
  Complex total_head_kva{};
  double load_kw = 0.0;    ///< real power drawn by loads and shunts
  double losses_kw = 0.0;  ///< series losses of lines and transformers
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double max_mismatch_pu = 0.0;   ///< voltage change of the final sweep
  double kcl_residual_pu = 0.0;   ///< on the per-phase base current of each node
  std::string diagnostic;

  bool converged() const { return status == SolveStatus::Converged; }
  double magnitude_pu(std::size_t node, Phase p) const { return std::abs(voltage_pu[node][index(p)]); }
  double angle_deg(std::size_t node, Phase p) const;
};

/// Forward-backward sweep solver for one radial feeder. Construction compiles
/// the topology; `solve` is const and may be called concurrently. The model
/// must outlive the solver.
class PowerFlowSolver {
 public:
  /// Throws PowerFlowError for a device that cannot be modeled (for example a
  /// transformer with a zero or non-finite ratio or rating).
  explicit PowerFlowSolver(const FeederModel& model, SolverOptions options = {});

  /// `warm_start`, when given, seeds the sweep with its voltages.
  PowerFlowSolution solve(const LoadSet& loads, const TapSettings& taps,
                          const PowerFlowSolution* warm_start = nullptr) const;

  const FeederModel& model() const { return *model_; }
  const SolverOptions& options() const { return options_; }

 private:
  enum class BranchKind { Line, Regulator, Transformer, Substation };

  struct Bus {
    PhaseSet phases;
    double base_ln = 0.0;
    int parent = -1;  ///< branch feeding this bus
    int model_node = -1;
    int regulator = -1;  ///< set on a regulator's internal output bus
  };

  struct Branch {
    BranchKind kind = BranchKind::Line;
    int from = 0;
    int to = 0;
    int device = 0;  ///< segment, regulator or transformer index
    Matrix3c z = Matrix3c::Zero();
    double turns = 1.0;
  };

  const FeederModel* model_;
  SolverOptions options_;
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<int> order_;  ///< buses in breadth-first order from the slack
  std::vector<std::vector<int>> children_;
  std::vector<Matrix3c> shunt_;  ///< constant admittance at each bus (siemens)
  int slack_ = 0;
  PhaseVector source_v_{};
};

/// Convenience wrapper compiling a solver for one call.
PowerFlowSolution solve(const FeederModel& model, const LoadSet& loads, const TapSettings& taps,
                        SolverOptions options = {});

struct TapControlOptions {
  int max_operations = 32;  ///< tap steps allowed per call, summed over phases
};

struct TapControlResult {
  TapSettings taps;
  PowerFlowSolution solution;
  int operations = 0;
  bool limit_exceeded = false;  ///< control kept hunting past max_operations
};

/// Relay voltage (120 V base) seen by each phase of regulator `r` in `solution`,
/// after line-drop compensation.
std::array<double, 3> regulator_relay_voltage(const Regulator& r, const PowerFlowSolution& solution, std::size_t r_index);

/// Fixed mode returns `taps` and `solution` unchanged. Automatic mode moves
/// taps until every regulated phase's relay voltage lies in its band,
/// re-solving after each change.
TapControlResult regulator_taps(RegulatorMode mode, const PowerFlowSolver& solver, const LoadSet& loads,
                                TapSettings taps, PowerFlowSolution solution, TapControlOptions options = {});

/// Debug dump: node, phase, |V| pu, angle deg.
void write_solution_csv(const FeederModel& model, const PowerFlowSolution& solution,
                        const std::filesystem::path& path);

/// One row of a published solution: node, phase number, |V| pu, angle deg.
struct BenchmarkPoint {
  PhaseRef at;
  double magnitude_pu = 0.0;
  double angle_deg = 0.0;
};

/// Reads the node,phase,magnitude_pu,angle_deg CSV written by write_solution_csv.
std::vector<BenchmarkPoint> read_benchmark_csv(const std::filesystem::path& path);

struct BenchmarkDeviation {
  double max_magnitude_pu = 0.0;
  double max_angle_deg = 0.0;
  PhaseRef worst_magnitude_at;
  PhaseRef worst_angle_at;
  std::size_t points = 0;
};

/// Largest deviations of `solution` from `benchmark`. Throws ContractViolation
/// for a benchmark point the model does not have.
BenchmarkDeviation compare_to_benchmark(const FeederModel& model, const PowerFlowSolution& solution,
                                        const std::vector<BenchmarkPoint>& benchmark);

}  // namespace pevgrid
