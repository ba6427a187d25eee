#include "pevgrid/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <atomic>
#include <exception>
#include <mutex>

#include "pevgrid/error.hpp"
#include "text_util.hpp"

namespace pevgrid {

using Json = nlohmann::ordered_json;

std::string_view to_string(ScenarioLabel label) {
  switch (label) {
    case ScenarioLabel::NoPev: return "no-PEV";
    case ScenarioLabel::Uncontrolled: return "uncontrolled";
    case ScenarioLabel::EnergyShift: return "energy-shift";
    case ScenarioLabel::ReactivePower: return "reactive-power";
    case ScenarioLabel::Combined: return "energy-shift+reactive-power";
  }
  return "?";
}

ScenarioLabel parse_scenario_label(std::string_view text) {
  for (ScenarioLabel l : kAllScenarios)
    if (to_string(l) == text) return l;
  std::string valid;
  for (ScenarioLabel l : kAllScenarios) valid += (valid.empty() ? "" : ", ") + std::string(to_string(l));
  throw ConfigError("unknown scenario '" + std::string(text) + "' (expected one of: " + valid + ")");
}

std::string_view to_string(TapSource source) {
  return source == TapSource::Configured ? "configured" : "no-PEV peak";
}

TapSource parse_tap_source(std::string_view text) {
  if (text == "configured") return TapSource::Configured;
  if (text == "no-PEV peak") return TapSource::NoPevPeak;
  throw ConfigError("unknown tap source '" + std::string(text) + "' (expected \"configured\" or \"no-PEV peak\")");
}

ControlConfig apply_label(ControlConfig base, ScenarioLabel label) {
  base.energy_shift = label == ScenarioLabel::EnergyShift || label == ScenarioLabel::Combined;
  base.reactive_support = label == ScenarioLabel::ReactivePower || label == ScenarioLabel::Combined;
  return base;
}

// ---------------------------------------------------------------------------
// Load profile

LoadProfile::LoadProfile(std::vector<Point> points) : points_(std::move(points)) {
  if (points_.empty()) throw ParseError("load profile: no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (!(p.minute >= 0.0 && p.minute < 1440.0)) throw ParseError("load profile: minute outside [0, 1440)");
    if (!(p.value >= 0.0) || !std::isfinite(p.value)) throw ParseError("load profile: values must be nonnegative");
    if (i > 0 && !(p.minute > points_[i - 1].minute)) throw ParseError("load profile: minutes must increase");
  }
  if (!(max() > 0.0)) throw ParseError("load profile: maximum must be positive");
}

LoadProfile LoadProfile::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("load profile: empty input");
  std::vector<Point> points;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    const auto f = detail::split(line);
    const std::string where = "load profile row " + std::to_string(row);
    if (f.size() != 2) throw ParseError(where + ": expected 2 fields");
    points.push_back({detail::parse_double(f[0], where), detail::parse_double(f[1], where)});
  }
  return LoadProfile(std::move(points));
}

LoadProfile LoadProfile::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return read_csv(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

double LoadProfile::at(double minute) const {
  double m = std::fmod(minute, 1440.0);
  if (m < 0.0) m += 1440.0;
  if (points_.size() == 1) return points_.front().value;
  auto hi = std::upper_bound(points_.begin(), points_.end(), m, [](double x, const Point& p) { return x < p.minute; });
  const Point& a = hi == points_.begin() ? points_.back() : *(hi - 1);
  const Point& b = hi == points_.end() ? points_.front() : *hi;
  double span = b.minute - a.minute;
  double offset = m - a.minute;
  if (span <= 0.0) span += 1440.0;
  if (offset < 0.0) offset += 1440.0;
  return a.value + (b.value - a.value) * offset / span;
}

double LoadProfile::max() const {
  double m = 0.0;
  for (const auto& p : points_) m = std::max(m, p.value);
  return m;
}

// ---------------------------------------------------------------------------
// Scenario config

void ScenarioConfig::check() const {
  if (timestep_min < 1) throw ConfigError("timestep_min must be at least 1");
  if (horizon_min <= 0 || horizon_min % timestep_min != 0)
    throw ConfigError("horizon_min must be a positive multiple of timestep_min");
  if (!(target_peak_kw > 0.0)) throw ConfigError("target_peak_kw must be positive");
  if (load_scale && !(*load_scale >= 0.0)) throw ConfigError("load_scale must be nonnegative");
  if (!(fixed_point.damping > 0.0 && fixed_point.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  if (fixed_point.max_iterations < 1) throw ConfigError("fixed_point max_iterations must be at least 1");
  if (!(fixed_point.tolerance_pu > 0.0)) throw ConfigError("fixed_point tolerance must be positive");
  if (!(solver.tolerance_pu > 0.0) || solver.max_iterations < 1) throw ConfigError("invalid solver options");
  if (source_voltage_pu && !(*source_voltage_pu > 0.0)) throw ConfigError("source_voltage_pu must be positive");
  for (const auto& p : placements)
    if (p.count < 0) throw ConfigError("placement " + p.location.to_string() + ": count must be nonnegative");
  behavior.check();
  control.check();
}

namespace {

template <class T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ParseError(std::string("scenario config: field '") + key + "': " + e.what());
  }
}

void expect_keys(const Json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw ParseError("scenario config: " + where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ParseError("scenario config: unknown field '" + k + "' in " + where);
  }
}

Distribution parse_distribution(const Json& j, const std::string& name) {
  expect_keys(j, {"family", "value", "mean", "stddev", "lower", "upper"}, name);
  const auto family = get_or<std::string>(j, "family", "");
  if (family == "constant") return Distribution::constant(get_or(j, "value", 0.0));
  if (family == "uniform") return Distribution::uniform(get_or(j, "lower", 0.0), get_or(j, "upper", 0.0));
  if (family == "truncated_normal")
    return Distribution::truncated_normal(get_or(j, "mean", 0.0), get_or(j, "stddev", 0.0), get_or(j, "lower", 0.0),
                                          get_or(j, "upper", 0.0));
  throw ParseError("scenario config: " + name + ": unknown family '" + family +
                   "' (expected constant, uniform or truncated_normal)");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ScenarioConfig parse_scenario_config(std::string_view text, const std::filesystem::path& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("scenario config: ") + e.what());
  }
  expect_keys(doc,
              {"feeder", "load_profile", "target_peak_kw", "load_scale", "placements", "behavior", "charger", "control",
               "horizon_min", "timestep_min", "seed", "solver", "fixed_point", "regulator_mode", "initial_taps", "tap_control",
               "source_voltage_pu", "monitored"},
              "document");
  ScenarioConfig c;
  if (!doc.contains("feeder") || !doc.contains("load_profile"))
    throw ParseError("scenario config: 'feeder' and 'load_profile' are required");
  c.feeder_path = resolve(base_dir, get_or<std::string>(doc, "feeder", ""));
  c.profile_path = resolve(base_dir, get_or<std::string>(doc, "load_profile", ""));
  c.target_peak_kw = get_or(doc, "target_peak_kw", c.target_peak_kw);
  if (doc.contains("load_scale")) c.load_scale = get_or(doc, "load_scale", 1.0);
  c.horizon_min = get_or(doc, "horizon_min", c.horizon_min);
  c.timestep_min = get_or(doc, "timestep_min", c.timestep_min);
  c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
  c.regulator_mode = parse_regulator_mode(get_or<std::string>(doc, "regulator_mode", "fixed"));
  c.tap_source = parse_tap_source(get_or<std::string>(doc, "initial_taps", "configured"));
  if (doc.contains("source_voltage_pu")) c.source_voltage_pu = get_or(doc, "source_voltage_pu", 1.0);

  for (const auto& p : doc.value("placements", Json::array())) {
    expect_keys(p, {"location", "count"}, "placement");
    c.placements.push_back({PhaseRef::parse(get_or<std::string>(p, "location", "")), get_or(p, "count", 0)});
  }
  if (doc.contains("behavior")) {
    const auto& b = doc["behavior"];
    expect_keys(b, {"arrival", "departure", "arrival_soc", "target_soc", "battery_kwh", "charger_kva"}, "behavior");
    if (b.contains("arrival")) c.behavior.arrival = parse_distribution(b["arrival"], "arrival");
    if (b.contains("departure")) c.behavior.departure = parse_distribution(b["departure"], "departure");
    if (b.contains("arrival_soc")) c.behavior.arrival_soc = parse_distribution(b["arrival_soc"], "arrival_soc");
    if (b.contains("target_soc")) c.behavior.target_soc = parse_distribution(b["target_soc"], "target_soc");
    c.behavior.battery_kwh = get_or(b, "battery_kwh", c.behavior.battery_kwh);
    c.behavior.charger_kva = get_or(b, "charger_kva", c.behavior.charger_kva);
  }
  if (doc.contains("charger")) {
    const auto& ch = doc["charger"];
    expect_keys(ch, {"taper_soc", "taper_floor_fraction", "efficiency"}, "charger");
    c.charger.taper_soc = get_or(ch, "taper_soc", c.charger.taper_soc);
    c.charger.taper_floor_fraction = get_or(ch, "taper_floor_fraction", c.charger.taper_floor_fraction);
    c.charger.efficiency = get_or(ch, "efficiency", c.charger.efficiency);
    if (!(c.charger.efficiency > 0.0 && c.charger.efficiency <= 1.0))
      throw ConfigError("charger efficiency must lie in (0, 1]");
    if (!(c.charger.taper_floor_fraction > 0.0 && c.charger.taper_floor_fraction <= 1.0))
      throw ConfigError("charger taper_floor_fraction must lie in (0, 1]");
  }
  if (doc.contains("control")) {
    const auto& ct = doc["control"];
    expect_keys(ct, {"energy_shift", "reactive_support", "real_power_fraction", "q_while_parked", "volt_var_curve"},
                "control");
    c.control.energy_shift = get_or(ct, "energy_shift", false);
    c.control.reactive_support = get_or(ct, "reactive_support", false);
    c.control.real_power_fraction = get_or(ct, "real_power_fraction", c.control.real_power_fraction);
    c.control.q_while_parked = get_or(ct, "q_while_parked", false);
    if (ct.contains("volt_var_curve")) {
      std::vector<VoltVarCurve::Point> pts;
      for (const auto& p : ct["volt_var_curve"]) {
        if (!p.is_array() || p.size() != 2) throw ParseError("scenario config: volt_var_curve entries are [v, q] pairs");
        pts.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
      c.control.curve = VoltVarCurve(std::move(pts));
    }
  }
  if (doc.contains("solver")) {
    const auto& s = doc["solver"];
    expect_keys(s, {"tolerance_pu", "max_iterations", "collapse_floor_pu"}, "solver");
    c.solver.tolerance_pu = get_or(s, "tolerance_pu", c.solver.tolerance_pu);
    c.solver.max_iterations = get_or(s, "max_iterations", c.solver.max_iterations);
    c.solver.collapse_floor_pu = get_or(s, "collapse_floor_pu", c.solver.collapse_floor_pu);
  }
  if (doc.contains("fixed_point")) {
    const auto& f = doc["fixed_point"];
    expect_keys(f, {"damping", "max_iterations", "tolerance_pu"}, "fixed_point");
    c.fixed_point.damping = get_or(f, "damping", c.fixed_point.damping);
    c.fixed_point.max_iterations = get_or(f, "max_iterations", c.fixed_point.max_iterations);
    c.fixed_point.tolerance_pu = get_or(f, "tolerance_pu", c.fixed_point.tolerance_pu);
  }
  if (doc.contains("tap_control")) {
    expect_keys(doc["tap_control"], {"max_operations"}, "tap_control");
    c.tap_control.max_operations = get_or(doc["tap_control"], "max_operations", c.tap_control.max_operations);
  }
  for (const auto& m : doc.value("monitored", Json::array())) c.monitored.push_back(PhaseRef::parse(m.get<std::string>()));
  c.check();
  return c;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario_config(ss.str(), path.parent_path());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Calibration

namespace {

std::vector<double> candidate_minutes(const LoadProfile& profile, double fraction) {
  const double threshold = fraction * profile.max();
  std::vector<double> out;
  for (int m = 0; m < 1440; ++m)
    if (profile.at(m) >= threshold) out.push_back(m);
  return out;
}

}  // namespace

PeakOperatingPoint no_pev_peak(const FeederModel& model, const LoadProfile& profile, double scale,
                               const CalibrationOptions& options) {
  const PowerFlowSolver solver(model, options.solver);
  const LoadSet nominal = nominal_loads(model);
  TapSettings taps = configured_taps(model);
  PeakOperatingPoint peak{-std::numeric_limits<double>::infinity(), 0.0, taps};
  PowerFlowSolution previous;
  bool have_previous = false;
  for (double m : candidate_minutes(profile, options.candidate_fraction)) {
    const LoadSet loads = nominal.scaled(scale * profile.at(m));
    auto sol = solver.solve(loads, taps, have_previous ? &previous : nullptr);
    auto controlled = regulator_taps(options.regulator_mode, solver, loads, taps, std::move(sol), options.tap_control);
    if (!controlled.solution.converged())
      throw CalibrationError("no-PEV solve at scale " + std::to_string(scale) + ", minute " + std::to_string(m) +
                             " failed: " + controlled.solution.diagnostic);
    taps = controlled.taps;
    previous = std::move(controlled.solution);
    have_previous = true;
    if (previous.total_head_kva.real() > peak.peak_kw) peak = {previous.total_head_kva.real(), m, taps};
  }
  return peak;
}

double calibrate_load_scale(const FeederModel& model, const LoadProfile& profile, double target_peak_kw,
                            const CalibrationOptions& options) {
  if (!(target_peak_kw > 0.0)) throw CalibrationError("target peak must be positive");
  if (!(profile.max() > 0.0)) throw CalibrationError("load profile maximum must be positive");
  auto peak_at = [&](double m) {
    try {
      return no_pev_peak(model, profile, m, options).peak_kw;
    } catch (const CalibrationError&) {
      return std::numeric_limits<double>::infinity();  // collapsed: above any reachable target
    }
  };
  double lo = 0.0;
  double hi = 1.0;
  double peak_hi = peak_at(hi);
  for (int i = 0; i < 60 && peak_hi < target_peak_kw; ++i) {
    lo = hi;
    hi *= 2.0;
    peak_hi = peak_at(hi);
  }
  if (peak_hi < target_peak_kw) throw CalibrationError("could not bracket the target peak");
  for (int i = 0; i < 200 && (hi - lo) > options.relative_tolerance * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double p = peak_at(mid);
    (p < target_peak_kw ? lo : hi) = mid;
  }
  const double m = 0.5 * (lo + hi);
  const double achieved = peak_at(m);
  if (!std::isfinite(achieved) || std::abs(achieved - target_peak_kw) > 1e-3 * target_peak_kw)
    throw CalibrationError("target peak " + std::to_string(target_peak_kw) +
                           " kW is not reachable (feeder collapses first)");
  return m;
}

// ---------------------------------------------------------------------------
// Preparation

namespace {

std::vector<PhaseRef> default_monitored(const FeederModel& model, const ScenarioConfig& config) {
  std::set<PhaseRef> refs;
  for (const auto& e : nominal_loads(model).entries) {
    const std::string& id = model.nodes[e.node].id;
    for (int k = 0; k < 3; ++k) {
      if (e.s_kva[k] == Complex{}) continue;
      refs.insert({id, static_cast<Phase>(k)});
      if (e.connection == LoadConnection::Delta) refs.insert({id, static_cast<Phase>((k + 1) % 3)});
    }
  }
  for (const auto& p : config.placements) refs.insert(p.location);
  return {refs.begin(), refs.end()};
}

}  // namespace

PreparedScenario prepare_scenario(const ScenarioConfig& config) {
  FeederModel model = load_feeder(config.feeder_path);
  LoadProfile profile = LoadProfile::read_csv(config.profile_path);
  return prepare_scenario(config, std::move(model), std::move(profile));
}

PreparedScenario prepare_scenario(const ScenarioConfig& config, FeederModel model, LoadProfile profile) {
  config.check();
  if (config.source_voltage_pu) model.source.voltage_pu = *config.source_voltage_pu;
  for (const auto& p : config.placements) {
    const Node* n = model.find_node(p.location.node);
    if (!n) throw ConfigError("placement " + p.location.to_string() + ": unknown node");
    if (!n->phases.has(p.location.phase))
      throw ConfigError("placement " + p.location.to_string() + ": phase not available at node");
  }

  PreparedScenario out;
  out.config = config;
  out.profile = std::move(profile);

  std::vector<PhaseRef> monitored = config.monitored.empty() ? default_monitored(model, config) : config.monitored;
  const PhaseRef reference{"856", Phase::B};
  if (const Node* n = model.find_node(reference.node); n && n->phases.has(reference.phase) &&
                                                        std::find(monitored.begin(), monitored.end(), reference) ==
                                                            monitored.end())
    monitored.push_back(reference);
  for (const auto& r : monitored) {
    const Node* n = model.find_node(r.node);
    if (!n || !n->phases.has(r.phase)) throw ConfigError("monitored " + r.to_string() + ": no such node-phase");
  }
  out.monitored = std::move(monitored);

  CalibrationOptions opts;
  opts.solver = config.solver;
  opts.regulator_mode =
      config.tap_source == TapSource::NoPevPeak ? RegulatorMode::Automatic : config.regulator_mode;
  opts.tap_control = config.tap_control;
  out.load_scale = config.load_scale ? *config.load_scale
                                     : calibrate_load_scale(model, out.profile, config.target_peak_kw, opts);
  out.initial_taps = config.tap_source == TapSource::NoPevPeak ? no_pev_peak(model, out.profile, out.load_scale, opts).taps
                                                               : configured_taps(model);
  const int days = (config.horizon_min + 1439) / 1440;
  out.sessions = sample_sessions(config.behavior, config.placements, substream_seed(config.seed, "sessions"), days);
  out.model = std::make_shared<const FeederModel>(std::move(model));
  return out;
}

// ---------------------------------------------------------------------------
// Time stepping

double RunResult::min_voltage(std::size_t step) const {
  const auto& v = voltage_pu[step];
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : *std::min_element(v.begin(), v.end());
}

struct ScenarioRun::Impl {
  const PreparedScenario& prep;
  const FeederModel& model;
  ScenarioLabel label;
  ControlConfig control;
  PowerFlowSolver solver;
  LoadSet nominal;
  std::vector<PevState> pevs;
  std::vector<std::size_t> pev_node;  ///< model node index per session
  std::vector<double> q_prev;         ///< last applied Q per session
  TapSettings taps;
  PowerFlowSolution last;
  bool have_last = false;
  std::vector<std::size_t> monitored_node;
  RunResult result;
  std::size_t step_index = 0;
  std::size_t step_count;
  int vehicles = 0;

  Impl(const PreparedScenario& p, ScenarioLabel l)
      : prep(p),
        model(*p.model),
        label(l),
        control(apply_label(p.config.control, l)),
        solver(*p.model, p.config.solver),
        nominal(nominal_loads(*p.model)),
        taps(p.initial_taps),
        step_count(static_cast<std::size_t>(p.config.horizon_min / p.config.timestep_min)) {
    const auto& cfg = prep.config;
    if (label != ScenarioLabel::NoPev) {
      pevs.reserve(prep.sessions.size());
      for (const auto& s : prep.sessions) {
        check_session(s);
        pevs.emplace_back(s);
        pev_node.push_back(*model.node_index(s.location.node));
        vehicles = std::max(vehicles, s.vehicle_id + 1);
      }
      q_prev.assign(pevs.size(), 0.0);
    }

    result.label = label;
    result.timestep_min = cfg.timestep_min;
    result.load_scale = prep.load_scale;
    result.monitored = prep.monitored;
    for (const auto& n : model.nodes) result.node_ids.push_back(n.id);
    for (const auto& r : prep.monitored) monitored_node.push_back(*model.node_index(r.node));
    result.pev_p_kw.assign(vehicles, {});
    result.pev_q_kvar.assign(vehicles, {});
    result.pev_soc.assign(vehicles, {});

    // Charge start times. Energy shifting draws from its own sub-stream so it
    // never disturbs session sampling.
    RandomStream scheduling(cfg.seed, "scheduling");
    const double rated_fraction = control.reactive_support ? control.real_power_fraction : 1.0;
    for (auto& pev : pevs) {
      const auto& s = *pev.session;
      const double t_charge = time_to_full(s, rated_fraction * s.charger_kva, cfg.charger);
      if (control.energy_shift) pev.scheduled_start = schedule_energy_shift(s, t_charge, scheduling);
      result.session_start.push_back(pev.scheduled_start);
      result.session_t_charge.push_back(t_charge);
    }
  }

  VoltageMap local_voltages() const {
    VoltageMap map;
    for (std::size_t i = 0; i < pevs.size(); ++i) {
      const auto& ref = pevs[i].session->location;
      map[ref] = have_last ? last.magnitude_pu(pev_node[i], ref.phase) : 1.0;
    }
    return map;
  }

  PowerFlowSolution solve(const LoadSet& loads, bool& tap_limit) {
    auto sol = solver.solve(loads, taps, have_last ? &last : nullptr);
    if (sol.converged() && prep.config.regulator_mode == RegulatorMode::Automatic) {
      auto controlled = regulator_taps(RegulatorMode::Automatic, solver, loads, taps, std::move(sol),
                                       prep.config.tap_control);
      taps = controlled.taps;
      tap_limit = tap_limit || controlled.limit_exceeded;
      sol = std::move(controlled.solution);
    }
    if (!sol.converged())
      throw PowerFlowError("step " + std::to_string(step_index) + " (minute " +
                           std::to_string(step_index * prep.config.timestep_min) + "): power flow " +
                           std::string(to_string(sol.status)) + (sol.diagnostic.empty() ? "" : ": " + sol.diagnostic));
    return sol;
  }

  static double voltage_change(const PowerFlowSolution& a, const PowerFlowSolution& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.voltage_pu.size(); ++i)
      for (int p = 0; p < 3; ++p) d = std::max(d, std::abs(a.voltage_pu[i][p] - b.voltage_pu[i][p]));
    return d;
  }

  void step() {
    const auto& cfg = prep.config;
    const double t = static_cast<double>(step_index) * cfg.timestep_min;
    const double dt = cfg.timestep_min;
    const LoadSet base = nominal.scaled(prep.load_scale * prep.profile.at(t));

    std::vector<double> p(pevs.size(), 0.0);
    std::vector<double> q(pevs.size(), 0.0);
    bool tap_limit = false;
    bool converged = false;
    int iterations = 0;
    bool voltage_dependent = false;

    for (iterations = 1; iterations <= cfg.fixed_point.max_iterations; ++iterations) {
      const auto setpoints = control_setpoints(pevs, local_voltages(), control, t);
      voltage_dependent = false;
      for (std::size_t i = 0; i < pevs.size(); ++i) {
        const auto& s = *pevs[i].session;
        p[i] = step_power(pevs[i], setpoints[i].p_limit_kw, dt, cfg.charger);
        const bool gives_q = control.reactive_support && pevs[i].plugged_in(t) &&
                             (setpoints[i].p_limit_kw > 0.0 || control.q_while_parked);
        if (!gives_q) {
          q[i] = 0.0;
          continue;
        }
        voltage_dependent = true;
        const double damped = q_prev[i] + cfg.fixed_point.damping * (setpoints[i].q_kvar - q_prev[i]);
        const double room = std::sqrt(std::max(0.0, s.charger_kva * s.charger_kva - p[i] * p[i]));
        q[i] = std::clamp(damped, -room, room);
      }

      LoadSet loads = base;
      std::map<PhaseRef, std::pair<std::size_t, Complex>> pev_load;
      for (std::size_t i = 0; i < pevs.size(); ++i) {
        if (p[i] == 0.0 && q[i] == 0.0) continue;
        auto& slot = pev_load[pevs[i].session->location];
        slot.first = pev_node[i];
        slot.second += Complex(p[i], q[i]);
      }
      for (const auto& [ref, slot] : pev_load) {
        PhaseVector s{};
        s[index(ref.phase)] = slot.second;
        loads.add({slot.first, LoadConnection::Wye, LoadModel::ConstantPower, s});
      }

      PowerFlowSolution sol = solve(loads, tap_limit);
      const double change = have_last ? voltage_change(sol, last) : std::numeric_limits<double>::infinity();
      last = std::move(sol);
      have_last = true;
      q_prev = q;
      if (!voltage_dependent || (iterations > 1 && change < cfg.fixed_point.tolerance_pu)) {
        converged = true;
        break;
      }
    }
    iterations = std::min(iterations, cfg.fixed_point.max_iterations);

    // Record, then advance SOC with the power actually applied.
    result.minute.push_back(t);
    result.feeder_kw.push_back(last.total_head_kva.real());
    result.feeder_kvar.push_back(last.total_head_kva.imag());
    result.phase_kw.push_back({last.head_kva[0].real(), last.head_kva[1].real(), last.head_kva[2].real()});
    std::vector<double> v(prep.monitored.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = last.magnitude_pu(monitored_node[k], prep.monitored[k].phase);
    result.voltage_pu.push_back(std::move(v));
    result.fixed_point_iterations.push_back(iterations);
    result.converged.push_back(converged ? 1 : 0);
    result.tap_limit_exceeded.push_back(tap_limit ? 1 : 0);
    result.taps.push_back(taps);

    std::vector<double> node_kw(model.nodes.size(), 0.0);
    for (const auto& e : base.entries)
      for (const auto& s : e.s_kva) node_kw[e.node] += s.real();
    for (std::size_t i = 0; i < pevs.size(); ++i) node_kw[pev_node[i]] += p[i];
    result.node_kw.push_back(std::move(node_kw));

    if (vehicles > 0) {
      std::vector<double> vp(vehicles, 0.0), vq(vehicles, 0.0), vsoc(vehicles, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t i = 0; i < pevs.size(); ++i) {
        const int id = pevs[i].session->vehicle_id;
        if (pevs[i].plugged_in(t)) {
          vp[id] = p[i];
          vq[id] = q[i];
          vsoc[id] = pevs[i].soc;
        }
        pevs[i].p_kw = p[i];
        pevs[i].q_kvar = q[i];
        charge_step(pevs[i], p[i], dt, cfg.charger);
      }
      for (int id = 0; id < vehicles; ++id) {
        result.pev_p_kw[id].push_back(vp[id]);
        result.pev_q_kvar[id].push_back(vq[id]);
        result.pev_soc[id].push_back(vsoc[id]);
      }
    }
    ++step_index;
    if (step_index == step_count) {
      result.session_energy_kwh.clear();
      for (const auto& pev : pevs) result.session_energy_kwh.push_back(pev.energy_kwh);
    }
  }
};

ScenarioRun::ScenarioRun(const PreparedScenario& prepared, ScenarioLabel label)
    : impl_(std::make_unique<Impl>(prepared, label)) {}
ScenarioRun::~ScenarioRun() = default;

bool ScenarioRun::done() const { return impl_->step_index >= impl_->step_count; }

void ScenarioRun::step() {
  if (done()) throw ContractViolation("scenario run already finished");
  impl_->step();
}

const RunResult& ScenarioRun::result() const { return impl_->result; }
RunResult ScenarioRun::take_result() { return std::move(impl_->result); }

RunResult run_scenario(const PreparedScenario& prepared, ScenarioLabel label) {
  ScenarioRun run(prepared, label);
  while (!run.done()) run.step();
  return run.take_result();
}

RunResult run_scenario(const ScenarioConfig& config, ScenarioLabel label) {
  return run_scenario(prepare_scenario(config), label);
}

std::vector<RunResult> run_scenarios(const PreparedScenario& prepared, const std::vector<ScenarioLabel>& labels,
                                     unsigned threads) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(labels.size()));
  std::vector<RunResult> results(labels.size());
  std::vector<std::exception_ptr> errors(labels.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < labels.size(); i = next++) {
      try {
        results[i] = run_scenario(prepared, labels[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace pevgrid
