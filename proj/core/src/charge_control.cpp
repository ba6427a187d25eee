#include "pevgrid/charge_control.hpp"

#include <algorithm>
#include <cmath>

#include "pevgrid/error.hpp"

namespace pevgrid {

VoltVarCurve::VoltVarCurve() : points_{{0.92, -1.0}, {0.98, 0.0}, {1.02, 0.0}, {1.08, 1.0}} {}

VoltVarCurve::VoltVarCurve(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ConfigError("volt-var curve needs at least two breakpoints");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto [v, q] = points_[i];
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("volt-var curve: voltages must be positive");
    if (!(q >= -1.0 && q <= 1.0)) throw ConfigError("volt-var curve: Q must lie in [-1, 1]");
    if (i > 0 && !(v > points_[i - 1].first)) throw ConfigError("volt-var curve: voltages must strictly increase");
    if (i > 0 && q < points_[i - 1].second) throw ConfigError("volt-var curve: Q must be non-decreasing in voltage");
  }
}

double VoltVarCurve::normalized(double v) const {
  if (v <= points_.front().first) return points_.front().second;
  if (v >= points_.back().first) return points_.back().second;
  auto hi = std::upper_bound(points_.begin(), points_.end(), v,
                             [](double x, const Point& p) { return x < p.first; });
  auto lo = hi - 1;
  const double w = (v - lo->first) / (hi->first - lo->first);
  return std::clamp(lo->second + w * (hi->second - lo->second), -1.0, 1.0);
}

void ControlConfig::check() const {
  if (!(real_power_fraction > 0.0 && real_power_fraction <= 1.0))
    throw ConfigError("real_power_fraction must lie in (0, 1]");
}

double schedule_energy_shift(const ChargingSession& session, double t_charge_min, RandomStream& rng) {
  if (t_charge_min < 0.0) throw ContractViolation("schedule_energy_shift: t_charge must be nonnegative");
  const double latest = session.park_end - t_charge_min;
  if (latest <= session.park_start) return session.park_start;
  return std::min(latest, rng.uniform(session.park_start, latest));
}

double q_available(double s_kva, double p_kw) {
  if (p_kw < 0.0 || p_kw > s_kva)
    throw ContractViolation("q_available: need 0 <= P <= S (P = " + std::to_string(p_kw) +
                            ", S = " + std::to_string(s_kva) + ")");
  return std::sqrt(s_kva * s_kva - p_kw * p_kw);
}

double volt_var_setpoint(const VoltVarCurve& curve, double v_pu, double q_avail_kvar) {
  return curve.normalized(v_pu) * q_avail_kvar;
}

std::vector<Setpoint> control_setpoints(const std::vector<PevState>& pevs, const VoltageMap& voltages,
                                        const ControlConfig& config, double t) {
  std::vector<Setpoint> out(pevs.size());
  for (std::size_t i = 0; i < pevs.size(); ++i) {
    const PevState& pev = pevs[i];
    const ChargingSession& s = *pev.session;
    const bool parked = pev.plugged_in(t);
    const bool charging = parked && t >= pev.scheduled_start && !pev.full();
    Setpoint sp;
    if (charging) sp.p_limit_kw = config.reactive_support ? config.real_power_fraction * s.charger_kva : s.charger_kva;
    if (config.reactive_support && (charging || (parked && config.q_while_parked))) {
      const auto it = voltages.find(s.location);
      if (it == voltages.end())
        throw ContractViolation("no voltage reading for " + s.location.to_string() + " (vehicle " +
                                std::to_string(s.vehicle_id) + ")");
      sp.q_kvar = volt_var_setpoint(config.curve, it->second, q_available(s.charger_kva, sp.p_limit_kw));
    }
    out[i] = sp;
  }
  return out;
}

}  // namespace pevgrid
