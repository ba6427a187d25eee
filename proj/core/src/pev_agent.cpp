#include "pevgrid/pev_agent.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "pevgrid/error.hpp"
#include "text_util.hpp"

namespace pevgrid {

void check_session(const ChargingSession& s) {
  const std::string who = "session of vehicle " + std::to_string(s.vehicle_id);
  if (!(s.park_start < s.park_end)) throw ContractViolation(who + ": park start must precede park end");
  if (!(0.0 <= s.arrival_soc && s.arrival_soc <= s.target_soc && s.target_soc <= 1.0))
    throw ContractViolation(who + ": need 0 <= arrival SOC <= target SOC <= 1");
  if (!(s.battery_kwh > 0.0)) throw ContractViolation(who + ": battery capacity must be positive");
  if (!(s.charger_kva > 0.0)) throw ContractViolation(who + ": charger rating must be positive");
}

double charge_power(const PevState& state, double p_limit_kw, const ChargerModel& charger) {
  const auto& s = *state.session;
  if (state.soc >= s.target_soc) return 0.0;
  const double rated = s.charger_kva;
  const double limit = std::clamp(p_limit_kw, 0.0, rated);
  if (state.soc < charger.taper_soc || s.target_soc <= charger.taper_soc) return limit;
  const double taper = rated * (s.target_soc - state.soc) / (s.target_soc - charger.taper_soc);
  return std::min(limit, std::max(taper, charger.taper_floor_fraction * rated));
}

double step_power(const PevState& state, double p_limit_kw, double dt_min, const ChargerModel& charger) {
  const double p = charge_power(state, p_limit_kw, charger);
  const auto& s = *state.session;
  const double remaining_kwh = (s.target_soc - state.soc) * s.battery_kwh / charger.efficiency;
  return std::min(p, std::max(0.0, remaining_kwh / (dt_min / 60.0)));
}

void charge_step(PevState& state, double p_kw, double dt_min, const ChargerModel& charger) {
  const auto& s = *state.session;
  const double energy = p_kw * dt_min / 60.0;
  state.energy_kwh += energy;
  state.soc = std::min(s.target_soc, state.soc + energy * charger.efficiency / s.battery_kwh);
}

double time_to_full(const ChargingSession& session, double p_limit_kw, const ChargerModel& charger) {
  if (!(p_limit_kw > 0.0)) throw ContractViolation("time_to_full: power limit must be positive");
  const double s0 = session.arrival_soc;
  const double s1 = session.target_soc;
  if (s1 <= s0) return 0.0;
  const double rated = session.charger_kva;
  const double limit = std::min(p_limit_kw, rated);
  // Hours per unit SOC at constant power p.
  const double k = session.battery_kwh / charger.efficiency;
  auto constant = [&](double a, double b, double p) { return b > a ? k * (b - a) / p : 0.0; };

  const double taper = charger.taper_soc;
  if (s1 <= taper) return 60.0 * constant(s0, s1, limit);

  // Above the taper threshold the profile is: limit, then the linear taper
  // (exponential in time), then the floor.
  const double span = s1 - taper;
  const double floor_p = std::min(limit, charger.taper_floor_fraction * rated);
  const double s_lin = std::max(taper, s1 - limit * span / rated);   // taper falls below the limit
  const double s_floor = std::max(s_lin, s1 - floor_p * span / rated);  // taper falls below the floor
  double hours = constant(s0, std::min(s1, s_lin), limit);
  const double a = std::max(s0, s_lin);
  const double b = s_floor;
  if (b > a) hours += k * span / rated * std::log((s1 - a) / (s1 - b));
  hours += constant(std::max(s0, s_floor), s1, floor_p);
  return 60.0 * hours;
}

Distribution Distribution::constant(double v) {
  Distribution d;
  d.family = Family::Constant;
  d.value = v;
  return d;
}

Distribution Distribution::uniform(double lo, double hi) {
  Distribution d;
  d.family = Family::Uniform;
  d.lower = lo;
  d.upper = hi;
  return d;
}

Distribution Distribution::truncated_normal(double mean, double stddev, double lo, double hi) {
  Distribution d;
  d.family = Family::TruncatedNormal;
  d.mean = mean;
  d.stddev = stddev;
  d.lower = lo;
  d.upper = hi;
  return d;
}

double Distribution::support_min() const { return family == Family::Constant ? value : lower; }
double Distribution::support_max() const { return family == Family::Constant ? value : upper; }

void Distribution::check(const std::string& name) const {
  switch (family) {
    case Family::Constant:
      if (!std::isfinite(value)) throw ConfigError(name + ": constant must be finite");
      return;
    case Family::Uniform:
      if (!(std::isfinite(lower) && std::isfinite(upper) && lower <= upper))
        throw ConfigError(name + ": uniform bounds must satisfy lower <= upper");
      return;
    case Family::TruncatedNormal:
      if (!(std::isfinite(mean) && stddev > 0.0 && std::isfinite(stddev)))
        throw ConfigError(name + ": truncated normal needs a finite mean and positive stddev");
      if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper))
        throw ConfigError(name + ": truncation interval is empty");
      {
        const boost::math::normal_distribution<double> n(mean, stddev);
        if (!(boost::math::cdf(n, upper) > boost::math::cdf(n, lower)))
          throw ConfigError(name + ": truncation interval carries no probability mass");
      }
      return;
  }
}

double Distribution::sample(RandomStream& rng) const {
  switch (family) {
    case Family::Constant:
      return value;
    case Family::Uniform:
      return rng.uniform(lower, upper);
    case Family::TruncatedNormal: {
      const boost::math::normal_distribution<double> n(mean, stddev);
      const double lo = boost::math::cdf(n, lower);
      const double hi = boost::math::cdf(n, upper);
      const double u = lo + (hi - lo) * rng.uniform_open();
      return std::clamp(boost::math::quantile(n, u), lower, upper);
    }
  }
  return value;
}

void BehaviorConfig::check() const {
  arrival.check("arrival");
  departure.check("departure");
  arrival_soc.check("arrival_soc");
  target_soc.check("target_soc");
  if (!(departure.support_min() > arrival.support_max()))
    throw ConfigError("departure bounds must lie after arrival bounds (park start < park end)");
  if (departure.support_max() > 1440.0 + arrival.support_min())
    throw ConfigError("a session may not extend past the next day's earliest arrival");
  if (!(arrival_soc.support_min() >= 0.0 && target_soc.support_max() <= 1.0))
    throw ConfigError("SOC distributions must stay within [0, 1]");
  if (!(arrival_soc.support_max() <= target_soc.support_min()))
    throw ConfigError("arrival SOC bounds must not exceed target SOC bounds");
  if (!(battery_kwh > 0.0) || !(charger_kva > 0.0))
    throw ConfigError("battery capacity and charger rating must be positive");
}

std::vector<ChargingSession> sample_sessions(const BehaviorConfig& config, const std::vector<Placement>& placements,
                                             std::uint64_t seed, int days) {
  for (const auto& p : placements)
    if (p.count < 0) throw ConfigError("placement " + p.location.to_string() + ": count must be nonnegative");
  if (days < 0) throw ConfigError("number of days must be nonnegative");
  int total = 0;
  for (const auto& p : placements) total += p.count;
  if (total == 0 || days == 0) return {};
  config.check();

  RandomStream rng(seed);
  std::vector<ChargingSession> sessions;
  sessions.reserve(static_cast<std::size_t>(total) * days);
  for (int day = 0; day < days; ++day) {
    int vehicle = 0;
    for (const auto& p : placements) {
      for (int i = 0; i < p.count; ++i, ++vehicle) {
        ChargingSession s;
        s.vehicle_id = vehicle;
        s.location = p.location;
        s.park_start = 1440.0 * day + config.arrival.sample(rng);
        s.park_end = 1440.0 * day + config.departure.sample(rng);
        s.arrival_soc = config.arrival_soc.sample(rng);
        s.target_soc = config.target_soc.sample(rng);
        s.battery_kwh = config.battery_kwh;
        s.charger_kva = config.charger_kva;
        sessions.push_back(s);
      }
    }
  }
  return sessions;
}

namespace {
constexpr const char* kSessionHeader =
    "vehicle_id,node,phase,park_start,park_end,arrival_soc,target_soc,battery_kwh,charger_kva";
}

void write_sessions_csv(const std::vector<ChargingSession>& sessions, std::ostream& out) {
  using detail::format_double;
  out << kSessionHeader << '\n';
  for (const auto& s : sessions) {
    out << s.vehicle_id << ',' << s.location.node << ',' << phase_number(s.location.phase) << ','
        << format_double(s.park_start) << ',' << format_double(s.park_end) << ',' << format_double(s.arrival_soc)
        << ',' << format_double(s.target_soc) << ',' << format_double(s.battery_kwh) << ','
        << format_double(s.charger_kva) << '\n';
  }
}

void write_sessions_csv(const std::vector<ChargingSession>& sessions, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_sessions_csv(sessions, out);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ChargingSession> read_sessions_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("session CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSessionHeader) throw ParseError("session CSV: unexpected header \"" + line + "\"");
  std::vector<ChargingSession> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split(line);
    const std::string where = "session CSV row " + std::to_string(row);
    if (f.size() != 9) throw ParseError(where + ": expected 9 fields");
    ChargingSession s;
    s.vehicle_id = detail::parse_int(f[0], where);
    s.location.node = std::string(f[1]);
    s.location.phase = phase_from_number(detail::parse_int(f[2], where));
    s.park_start = detail::parse_double(f[3], where);
    s.park_end = detail::parse_double(f[4], where);
    s.arrival_soc = detail::parse_double(f[5], where);
    s.target_soc = detail::parse_double(f[6], where);
    s.battery_kwh = detail::parse_double(f[7], where);
    s.charger_kva = detail::parse_double(f[8], where);
    try {
      check_session(s);
    } catch (const ContractViolation& e) {
      throw ParseError(where + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ChargingSession> read_sessions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return read_sessions_csv(in);
}

}  // namespace pevgrid
