#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pevgrid/types.hpp"

namespace pevgrid {

using Matrix3c = Eigen::Matrix3cd;

inline constexpr double kFeetPerMile = 5280.0;

struct Node {
  std::string id;
  PhaseSet phases;
  double kv_ll = 0.0;  ///< line-to-line base voltage

  /// Line-to-neutral base voltage in volts.
  double base_ln_volts() const;

  bool operator==(const Node&) const = default;
};

/// Overhead/underground line construction. Matrices are embedded in 3x3 phase
/// order A, B, C; rows and columns of phases absent from `phasing` are zero.
struct LineConfiguration {
  std::string id;
  PhaseSet phasing;
  Matrix3c z_ohm_per_mile = Matrix3c::Zero();
  Matrix3c y_us_per_mile = Matrix3c::Zero();  ///< shunt admittance, microsiemens per mile

  bool operator==(const LineConfiguration&) const = default;
};

struct Segment {
  std::string from;
  std::string to;
  double length_ft = 0.0;
  std::string config;

  bool operator==(const Segment&) const = default;
};

/// Three-phase in-line transformer. Only grounded-wye/grounded-wye banks are solved.
struct Transformer {
  std::string id;
  std::string from;
  std::string to;
  double kva = 0.0;
  double kv_primary = 0.0;
  double kv_secondary = 0.0;
  double r_pu = 0.0;  ///< on the transformer's own kVA base
  double x_pu = 0.0;
  std::string connection = "gr_wye-gr_wye";

  bool operator==(const Transformer&) const = default;
};

enum class RegulatorMode { Fixed, Automatic };

std::string_view to_string(RegulatorMode mode);
RegulatorMode parse_regulator_mode(std::string_view text);

inline constexpr int kMaxTap = 16;

/// Wye-connected step-voltage regulator at the sending end of a segment.
/// Output voltage is (1 + step_pu * tap) times input, per phase.
struct Regulator {
  std::string id;
  std::string from;
  std::string to;
  PhaseSet phases;
  std::array<int, 3> taps{0, 0, 0};
  double step_pu = 0.00625;
  RegulatorMode mode = RegulatorMode::Fixed;
  // Control settings, on the 120 V relay base.
  double band_center_v = 120.0;
  double bandwidth_v = 2.0;
  double pt_ratio = 120.0;
  double ct_primary_a = 100.0;
  std::array<double, 3> r_ldc_v{0.0, 0.0, 0.0};
  std::array<double, 3> x_ldc_v{0.0, 0.0, 0.0};

  bool operator==(const Regulator&) const = default;
};

struct Capacitor {
  std::string id;
  std::string node;
  std::array<double, 3> kvar{0.0, 0.0, 0.0};  ///< rated kvar per phase at nominal voltage

  bool operator==(const Capacitor&) const = default;
};

enum class LoadConnection { Wye, Delta };
enum class LoadModel { ConstantPower, ConstantCurrent, ConstantImpedance };

std::string_view to_string(LoadConnection c);
std::string_view to_string(LoadModel m);
LoadConnection parse_load_connection(std::string_view text);
LoadModel parse_load_model(std::string_view text);

/// Spot load at `node`, or a load distributed along the segment node--to_node
/// when `to_node` is set. Wye entries are per phase A, B, C; delta entries are
/// per branch AB, BC, CA.
struct Load {
  std::string id;
  std::string node;
  std::optional<std::string> to_node;
  LoadConnection connection = LoadConnection::Wye;
  LoadModel model = LoadModel::ConstantPower;
  std::array<double, 3> kw{0.0, 0.0, 0.0};
  std::array<double, 3> kvar{0.0, 0.0, 0.0};

  bool distributed() const { return to_node.has_value(); }
  /// Phases this load draws from, derived from its nonzero entries.
  PhaseSet phases_used() const;

  bool operator==(const Load&) const = default;
};

struct Source {
  std::string node;
  double voltage_pu = 1.05;
  double angle_deg = 0.0;

  bool operator==(const Source&) const = default;
};

/// Substation transformer; when `modeled`, the source sits behind its impedance.
struct SubstationTransformer {
  double kva = 0.0;
  double kv_high = 0.0;
  double kv_low = 0.0;
  double r_pu = 0.0;
  double x_pu = 0.0;
  std::string connection = "delta-gr_wye";
  bool modeled = false;

  bool operator==(const SubstationTransformer&) const = default;
};

/// Unbalanced radial distribution feeder. Treated as immutable once loaded.
struct FeederModel {
  std::string name;
  double base_kva = 2500.0;
  Source source;
  std::optional<SubstationTransformer> substation;
  std::vector<Node> nodes;
  std::vector<LineConfiguration> configs;
  std::vector<Segment> segments;
  std::vector<Transformer> transformers;
  std::vector<Regulator> regulators;
  std::vector<Capacitor> capacitors;
  std::vector<Load> loads;

  std::optional<std::size_t> node_index(std::string_view id) const;
  const Node* find_node(std::string_view id) const;
  const LineConfiguration* find_config(std::string_view id) const;
  /// Segment joining a and b in either direction.
  const Segment* find_segment(std::string_view a, std::string_view b) const;

  bool operator==(const FeederModel&) const = default;
};

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

/// Series impedance (ohms) of `length_ft` feet of `config`.
Matrix3c segment_impedance(const LineConfiguration& config, double length_ft);
/// Total shunt admittance (siemens) of `length_ft` feet of `config`.
Matrix3c segment_admittance(const LineConfiguration& config, double length_ft);

/// Checks every model invariant; never throws.
ValidationReport validate_feeder(const FeederModel& model);

/// Parses the JSON feeder document without validating it. Throws ParseError.
FeederModel parse_feeder(std::string_view text);
std::string serialize_feeder(const FeederModel& model);

/// Reads, parses and validates. Throws IoError, ParseError or ValidationError.
FeederModel load_feeder(const std::filesystem::path& path);
void save_feeder(const FeederModel& model, const std::filesystem::path& path);

/// Parses "R+jX", "R-jX", "jX" or "R". Throws ParseError.
Complex parse_complex(std::string_view text);
/// Shortest text that parses back to exactly `value`.
std::string format_complex(Complex value);

}  // namespace pevgrid
