#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pevgrid/random.hpp"
#include "pevgrid/types.hpp"

namespace pevgrid {

/// One plug-in interval of one vehicle. Times are minutes since simulation start.
struct ChargingSession {
  int vehicle_id = 0;
  PhaseRef location;
  double park_start = 0.0;
  double park_end = 0.0;
  double arrival_soc = 0.0;
  double target_soc = 1.0;
  double battery_kwh = 50.0;
  double charger_kva = 6.6;

  bool operator==(const ChargingSession&) const = default;
};

/// Throws ContractViolation naming the broken invariant.
void check_session(const ChargingSession& s);

/// Charger power curve shared by all vehicles.
struct ChargerModel {
  double taper_soc = 0.95;  ///< constant power below, linear taper to zero at target above
  /// Taper never drops below this fraction of rated power, so a vehicle
  /// actually reaches its target instead of approaching it asymptotically.
  double taper_floor_fraction = 0.2;
  double efficiency = 1.0;

  bool operator==(const ChargerModel&) const = default;
};

struct PevState {
  const ChargingSession* session = nullptr;
  double soc = 0.0;
  double scheduled_start = 0.0;
  double energy_kwh = 0.0;  ///< drawn from the grid since arrival
  double p_kw = 0.0;
  double q_kvar = 0.0;

  explicit PevState(const ChargingSession& s) : session(&s), soc(s.arrival_soc), scheduled_start(s.park_start) {}

  bool plugged_in(double t) const { return t >= session->park_start && t < session->park_end; }
  bool full() const { return soc >= session->target_soc; }
};

/// Power drawn at the state's SOC for a given limit: constant min(limit, rated)
/// below the taper threshold, linear taper above it, zero at target.
double charge_power(const PevState& state, double p_limit_kw, const ChargerModel& charger = {});

/// charge_power further limited so that a step of `dt_min` minutes does not
/// overshoot the target SOC.
double step_power(const PevState& state, double p_limit_kw, double dt_min, const ChargerModel& charger = {});

/// Advances SOC and delivered energy by `p_kw` held for `dt_min` minutes.
/// SOC is clamped at the target.
void charge_step(PevState& state, double p_kw, double dt_min, const ChargerModel& charger = {});

/// Minutes needed to go from arrival to target SOC under the charge_power
/// profile at limit `p_limit_kw` (exact integral). Throws ContractViolation if
/// the limit is not positive.
double time_to_full(const ChargingSession& session, double p_limit_kw, const ChargerModel& charger = {});

struct Distribution {
  enum class Family { Constant, Uniform, TruncatedNormal };
  Family family = Family::Constant;
  double value = 0.0;   ///< constant
  double mean = 0.0;    ///< truncated normal
  double stddev = 0.0;  ///< truncated normal
  double lower = 0.0;   ///< uniform and truncated normal bounds
  double upper = 0.0;

  static Distribution constant(double v);
  static Distribution uniform(double lo, double hi);
  static Distribution truncated_normal(double mean, double stddev, double lo, double hi);

  /// Smallest and largest values the distribution can return.
  double support_min() const;
  double support_max() const;
  /// Throws ConfigError if the support is empty or parameters are invalid.
  void check(const std::string& name) const;
  double sample(RandomStream& rng) const;

  bool operator==(const Distribution&) const = default;
};

/// Per-day session distributions. Arrival and departure are minutes from the
/// start of the day the session begins, so a departure above 1440 falls on
/// the next day.
struct BehaviorConfig {
  Distribution arrival = Distribution::truncated_normal(1080.0, 90.0, 720.0, 1380.0);
  Distribution departure = Distribution::truncated_normal(1890.0, 60.0, 1710.0, 2070.0);
  Distribution arrival_soc = Distribution::uniform(0.2, 0.8);
  Distribution target_soc = Distribution::constant(1.0);
  double battery_kwh = 50.0;
  double charger_kva = 6.6;

  /// Throws ConfigError if a sample could violate the session invariants.
  void check() const;

  bool operator==(const BehaviorConfig&) const = default;
};

struct Placement {
  PhaseRef location;
  int count = 0;

  bool operator==(const Placement&) const = default;
};

/// One session per vehicle per day for `days` days. Vehicles are numbered in
/// placement order and keep their id and location across days.
std::vector<ChargingSession> sample_sessions(const BehaviorConfig& config, const std::vector<Placement>& placements,
                                             std::uint64_t seed, int days = 2);

void write_sessions_csv(const std::vector<ChargingSession>& sessions, std::ostream& out);
void write_sessions_csv(const std::vector<ChargingSession>& sessions, const std::filesystem::path& path);
std::vector<ChargingSession> read_sessions_csv(std::istream& in);
std::vector<ChargingSession> read_sessions_csv(const std::filesystem::path& path);

}  // namespace pevgrid
