#pragma once

#include <map>
#include <utility>
#include <vector>

#include "pevgrid/pev_agent.hpp"
#include "pevgrid/random.hpp"

namespace pevgrid {

/// Normalized reactive setpoint versus voltage. Negative Q is capacitive
/// (the PEV supplies vars), positive is inductive.
class VoltVarCurve {
 public:
  using Point = std::pair<double, double>;  ///< (voltage pu, Q as fraction of available)

  /// (0.92, -1), (0.98, 0), (1.02, 0), (1.08, +1).
  VoltVarCurve();
  /// Throws ConfigError unless voltages strictly increase, Q is
  /// non-decreasing and within [-1, 1], and there are at least two points.
  explicit VoltVarCurve(std::vector<Point> points);

  /// Interpolated normalized Q at `v_pu`, clamped at the end points.
  double normalized(double v_pu) const;
  const std::vector<Point>& points() const { return points_; }

  bool operator==(const VoltVarCurve&) const = default;

 private:
  std::vector<Point> points_;
};

struct ControlConfig {
  bool energy_shift = false;
  bool reactive_support = false;
  double real_power_fraction = 0.7;  ///< P limit as a fraction of S under reactive support
  /// Provide Q whenever plugged in, not only while charging.
  bool q_while_parked = false;
  VoltVarCurve curve;

  /// Throws ConfigError.
  void check() const;

  bool operator==(const ControlConfig&) const = default;
};

/// Charge start for energy shifting: uniform on [park start, park end - t_charge],
/// or park start when the dwell is too short.
double schedule_energy_shift(const ChargingSession& session, double t_charge_min, RandomStream& rng);

/// sqrt(S^2 - P^2). Throws ContractViolation if P < 0 or P > S.
double q_available(double s_kva, double p_kw);

double volt_var_setpoint(const VoltVarCurve& curve, double v_pu, double q_avail_kvar);

struct Setpoint {
  double p_limit_kw = 0.0;
  double q_kvar = 0.0;

  bool operator==(const Setpoint&) const = default;
};

using VoltageMap = std::map<PhaseRef, double>;

/// Local control decision for every PEV at time `t`. A PEV charges when it is
/// plugged in, past its scheduled start and below target. Q uses the headroom
/// left by P_limit, so any P up to the limit stays inside the envelope.
/// Throws ContractViolation naming the PhaseRef when a PEV that needs a
/// reading has none.
std::vector<Setpoint> control_setpoints(const std::vector<PevState>& pevs, const VoltageMap& voltages,
                                        const ControlConfig& config, double t);

}  // namespace pevgrid
