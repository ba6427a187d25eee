#include "pevgrid/metrics_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>

#include "pevgrid/error.hpp"
#include "text_util.hpp"

namespace pevgrid {

using Json = nlohmann::ordered_json;

BoxStats box_stats(std::vector<double> values) {
  BoxStats b;
  if (values.empty()) return b;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  b.min = values.front();
  b.q1 = quantile(0.25);
  b.median = quantile(0.5);
  b.q3 = quantile(0.75);
  b.max = values.back();
  b.count = values.size();
  return b;
}

Kpis compute_kpis(const RunResult& r, const RunResult* reference, const KpiOptions& options) {
  if (reference && (reference->steps() != r.steps() || reference->timestep_min != r.timestep_min))
    throw ContractViolation("compute_kpis: reference run has a different horizon or timestep");
  Kpis k;
  k.scenario = std::string(to_string(r.label));
  if (r.steps() == 0) return k;

  const std::size_t peak = static_cast<std::size_t>(
      std::max_element(r.feeder_kw.begin(), r.feeder_kw.end()) - r.feeder_kw.begin());
  k.peak_kw = r.feeder_kw[peak];
  k.peak_minute = r.minute[peak];
  if (reference && reference->steps() > 0) {
    const double ref_peak = *std::max_element(reference->feeder_kw.begin(), reference->feeder_kw.end());
    k.peak_increase_pct = 100.0 * (k.peak_kw / ref_peak - 1.0);
    std::array<double, 3> phase{};
    bool finite = true;
    for (int p = 0; p < 3; ++p) {
      phase[p] = 100.0 * (r.phase_kw[peak][p] / reference->phase_kw[peak][p] - 1.0);
      finite = finite && std::isfinite(phase[p]);
    }
    if (finite) k.phase_increase_pct = phase;
  }

  const auto& band = options.band;
  k.min_voltage_pu = std::numeric_limits<double>::infinity();
  std::vector<double> on, off;
  std::optional<ViolationEpisode> open;
  double open_dev = 0.0;
  for (std::size_t t = 0; t < r.steps(); ++t) {
    const double hour = std::fmod(r.minute[t], 1440.0) / 60.0;
    const bool on_peak = hour >= options.on_peak_start_h && hour < options.on_peak_end_h;
    bool violating = false;
    double worst_dev = 0.0;
    std::size_t worst_k = 0;
    for (std::size_t j = 0; j < r.monitored.size(); ++j) {
      const double v = r.voltage_pu[t][j];
      (on_peak ? on : off).push_back(v);
      if (v < k.min_voltage_pu) {
        k.min_voltage_pu = v;
        k.min_voltage_at = r.monitored[j];
        k.min_voltage_minute = r.minute[t];
      }
      const double dev = std::max(band.low - v, v - band.high);
      if (dev > 0.0) {
        if (!violating || dev > worst_dev) {
          worst_dev = dev;
          worst_k = j;
        }
        violating = true;
      }
    }
    if (violating) {
      if (!open) {
        open = ViolationEpisode{r.minute[t], 0.0, 0, r.voltage_pu[t][worst_k], r.monitored[worst_k]};
        open_dev = worst_dev;
      } else if (worst_dev > open_dev) {
        open->worst_pu = r.voltage_pu[t][worst_k];
        open->worst_at = r.monitored[worst_k];
        open_dev = worst_dev;
      }
      ++open->steps;
      open->end_minute = r.minute[t] + r.timestep_min;
    } else if (open) {
      k.violations.push_back(*open);
      open.reset();
    }
    k.max_fixed_point_iterations = std::max(k.max_fixed_point_iterations, r.fixed_point_iterations[t]);
    if (!r.converged[t]) ++k.nonconverged_steps;
  }
  if (open) k.violations.push_back(*open);
  if (r.monitored.empty()) k.min_voltage_pu = 0.0;
  k.on_peak = box_stats(std::move(on));
  k.off_peak = box_stats(std::move(off));
  return k;
}

// ---------------------------------------------------------------------------
// Time series CSV

void write_timeseries_csv(const RunResult& r, std::ostream& out) {
  using detail::format_double;
  out << "minute,feeder_kw,feeder_kvar,min_voltage_pu,fixed_point_iterations,converged,p1_kw,p2_kw,p3_kw";
  for (const auto& ref : r.monitored) out << ",v_" << ref.to_string();
  out << '\n';
  std::string line;
  for (std::size_t t = 0; t < r.steps(); ++t) {
    line.clear();
    line += format_double(r.minute[t]);
    line += ',' + format_double(r.feeder_kw[t]);
    line += ',' + format_double(r.feeder_kvar[t]);
    line += ',' + (r.monitored.empty() ? std::string() : format_double(r.min_voltage(t)));
    line += ',' + std::to_string(r.fixed_point_iterations[t]);
    line += r.converged[t] ? ",1" : ",0";
    for (double p : r.phase_kw[t]) line += ',' + format_double(p);
    for (double v : r.voltage_pu[t]) line += ',' + format_double(v);
    out << line << '\n';
  }
}

RunResult read_timeseries_csv(std::istream& in, ScenarioLabel label) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("timeseries CSV: empty input");
  const std::string header(detail::split(line).size() > 0 ? line : "");
  const auto cols = detail::split(header);
  static const char* fixed[] = {"minute", "feeder_kw", "feeder_kvar", "min_voltage_pu", "fixed_point_iterations",
                                "converged", "p1_kw", "p2_kw", "p3_kw"};
  if (cols.size() < 9) throw ParseError("timeseries CSV: header has too few columns");
  for (int i = 0; i < 9; ++i)
    if (cols[i] != fixed[i]) throw ParseError("timeseries CSV: column " + std::to_string(i + 1) + " should be " + fixed[i]);
  RunResult r;
  r.label = label;
  for (std::size_t i = 9; i < cols.size(); ++i) {
    if (cols[i].substr(0, 2) != "v_") throw ParseError("timeseries CSV: unexpected column " + std::string(cols[i]));
    r.monitored.push_back(PhaseRef::parse(cols[i].substr(2)));
  }
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split(line);
    const std::string where = "timeseries CSV row " + std::to_string(row);
    if (f.size() != cols.size()) throw ParseError(where + ": expected " + std::to_string(cols.size()) + " fields");
    r.minute.push_back(detail::parse_double(f[0], where));
    r.feeder_kw.push_back(detail::parse_double(f[1], where));
    r.feeder_kvar.push_back(detail::parse_double(f[2], where));
    r.fixed_point_iterations.push_back(detail::parse_int(f[4], where));
    r.converged.push_back(detail::parse_int(f[5], where) != 0 ? 1 : 0);
    r.phase_kw.push_back({detail::parse_double(f[6], where), detail::parse_double(f[7], where),
                          detail::parse_double(f[8], where)});
    std::vector<double> v;
    for (std::size_t i = 9; i < f.size(); ++i) v.push_back(detail::parse_double(f[i], where));
    r.voltage_pu.push_back(std::move(v));
  }
  r.timestep_min = r.minute.size() > 1 ? static_cast<int>(std::lround(r.minute[1] - r.minute[0])) : 1;
  return r;
}

// ---------------------------------------------------------------------------
// Summary JSON

namespace {

constexpr int kSchemaVersion = 1;

Json box_json(const BoxStats& b) {
  return Json{{"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}, {"count", b.count}};
}

BoxStats box_from(const Json& j) {
  return {j.at("min").get<double>(), j.at("q1").get<double>(), j.at("median").get<double>(),
          j.at("q3").get<double>(), j.at("max").get<double>(), j.at("count").get<std::size_t>()};
}

}  // namespace

std::string summary_json(const std::vector<Kpis>& kpis, const KpiOptions& options) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["band"] = {{"low", options.band.low}, {"high", options.band.high}};
  doc["on_peak_hours"] = {options.on_peak_start_h, options.on_peak_end_h};
  Json list = Json::array();
  for (const auto& k : kpis) {
    Json s;
    s["scenario"] = k.scenario;
    s["peak_kw"] = k.peak_kw;
    s["peak_minute"] = k.peak_minute;
    s["peak_increase_pct"] = k.peak_increase_pct ? Json(*k.peak_increase_pct) : Json(nullptr);
    s["min_voltage_pu"] = k.min_voltage_pu;
    s["min_voltage_at"] = k.min_voltage_at.node.empty() ? Json(nullptr) : Json(k.min_voltage_at.to_string());
    s["min_voltage_minute"] = k.min_voltage_minute;
    Json episodes = Json::array();
    for (const auto& e : k.violations)
      episodes.push_back({{"start_minute", e.start_minute},
                          {"end_minute", e.end_minute},
                          {"steps", e.steps},
                          {"worst_pu", e.worst_pu},
                          {"worst_at", e.worst_at.to_string()}});
    s["violations"] = std::move(episodes);
    s["on_peak"] = box_json(k.on_peak);
    s["off_peak"] = box_json(k.off_peak);
    s["phase_increase_pct"] =
        k.phase_increase_pct ? Json(std::vector<double>(k.phase_increase_pct->begin(), k.phase_increase_pct->end()))
                             : Json(nullptr);
    s["nonconverged_steps"] = k.nonconverged_steps;
    s["max_fixed_point_iterations"] = k.max_fixed_point_iterations;
    list.push_back(std::move(s));
  }
  doc["scenarios"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::vector<Kpis> parse_summary_json(std::string_view text) {
  try {
    const Json doc = Json::parse(text);
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
      throw ParseError("summary.json: unsupported schema_version");
    std::vector<Kpis> out;
    for (const auto& s : doc.at("scenarios")) {
      Kpis k;
      k.scenario = s.at("scenario").get<std::string>();
      k.peak_kw = s.at("peak_kw").get<double>();
      k.peak_minute = s.at("peak_minute").get<double>();
      if (!s.at("peak_increase_pct").is_null()) k.peak_increase_pct = s.at("peak_increase_pct").get<double>();
      k.min_voltage_pu = s.at("min_voltage_pu").get<double>();
      if (!s.at("min_voltage_at").is_null()) k.min_voltage_at = PhaseRef::parse(s.at("min_voltage_at").get<std::string>());
      k.min_voltage_minute = s.at("min_voltage_minute").get<double>();
      for (const auto& e : s.at("violations"))
        k.violations.push_back({e.at("start_minute").get<double>(), e.at("end_minute").get<double>(),
                                e.at("steps").get<int>(), e.at("worst_pu").get<double>(),
                                PhaseRef::parse(e.at("worst_at").get<std::string>())});
      k.on_peak = box_from(s.at("on_peak"));
      k.off_peak = box_from(s.at("off_peak"));
      if (!s.at("phase_increase_pct").is_null()) {
        const auto v = s.at("phase_increase_pct").get<std::vector<double>>();
        if (v.size() != 3) throw ParseError("summary.json: phase_increase_pct needs three values");
        k.phase_increase_pct = std::array<double, 3>{v[0], v[1], v[2]};
      }
      k.nonconverged_steps = s.at("nonconverged_steps").get<int>();
      k.max_fixed_point_iterations = s.at("max_fixed_point_iterations").get<int>();
      out.push_back(std::move(k));
    }
    return out;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("summary.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// SVG plots

namespace {

constexpr double kWidth = 900.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 190.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* color(ScenarioLabel label) {
  switch (label) {
    case ScenarioLabel::NoPev: return "#000000";
    case ScenarioLabel::Uncontrolled: return "#d62728";
    case ScenarioLabel::EnergyShift: return "#1f77b4";
    case ScenarioLabel::ReactivePower: return "#ff7f0e";
    case ScenarioLabel::Combined: return "#2ca02c";
  }
  return "#7f7f7f";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

/// Round tick spacing giving about `target` intervals over [lo, hi].
double tick_step(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

class Chart {
 public:
  Chart(std::string title, double x0, double x1, double y0, double y1, std::string xlabel, std::string ylabel)
      : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    svg_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg_ << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
         << "</text>\n";
    axes(xlabel, ylabel);
  }

  double x(double v) const { return kLeft + (v - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight); }
  double y(double v) const { return kHeight - kBottom - (v - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom); }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys, const char* stroke, double width = 1.2) {
    svg_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) svg_ << (i ? " " : "") << num(x(xs[i])) << ',' << num(y(ys[i]));
    svg_ << "\"/>\n";
  }

  void hline(double v, const char* stroke, std::string_view label) {
    svg_ << "<line x1=\"" << num(x(x0_)) << "\" x2=\"" << num(x(x1_)) << "\" y1=\"" << num(y(v)) << "\" y2=\""
         << num(y(v)) << "\" stroke=\"" << stroke << "\" stroke-dasharray=\"6,4\"/>\n";
    svg_ << "<text x=\"" << num(x(x1_) - 4) << "\" y=\"" << num(y(v) - 4) << "\" text-anchor=\"end\" fill=\"" << stroke
         << "\">" << escape(label) << "</text>\n";
  }

  void legend(std::size_t row, const char* stroke, std::string_view label) {
    const double ly = kTop + 10 + 18.0 * static_cast<double>(row);
    const double lx = kWidth - kRight + 15;
    svg_ << "<line x1=\"" << num(lx) << "\" x2=\"" << num(lx + 22) << "\" y1=\"" << num(ly) << "\" y2=\"" << num(ly)
         << "\" stroke=\"" << stroke << "\" stroke-width=\"3\"/>\n";
    svg_ << "<text x=\"" << num(lx + 28) << "\" y=\"" << num(ly + 4) << "\">" << escape(label) << "</text>\n";
  }

  std::ostringstream& raw() { return svg_; }

  std::string finish() {
    svg_ << "</svg>\n";
    return svg_.str();
  }

 private:
  void axes(const std::string& xlabel, const std::string& ylabel) {
    const double bottom = kHeight - kBottom;
    svg_ << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kWidth - kLeft - kRight)
         << "\" height=\"" << num(kHeight - kTop - kBottom) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const double xs = tick_step(x0_, x1_, 8);
    for (double v = std::ceil(x0_ / xs) * xs; v <= x1_ + 1e-9; v += xs) {
      svg_ << "<line x1=\"" << num(x(v)) << "\" x2=\"" << num(x(v)) << "\" y1=\"" << num(bottom) << "\" y2=\""
           << num(bottom + 5) << "\" stroke=\"#444\"/>\n";
      svg_ << "<text x=\"" << num(x(v)) << "\" y=\"" << num(bottom + 18) << "\" text-anchor=\"middle\">"
           << num(v).substr(0, num(v).find(".00") == std::string::npos ? std::string::npos : num(v).find(".00"))
           << "</text>\n";
    }
    const double ys = tick_step(y0_, y1_, 6);
    for (double v = std::ceil(y0_ / ys) * ys; v <= y1_ + 1e-9; v += ys) {
      svg_ << "<line x1=\"" << num(kLeft - 5) << "\" x2=\"" << num(kLeft) << "\" y1=\"" << num(y(v)) << "\" y2=\""
           << num(y(v)) << "\" stroke=\"#444\"/>\n";
      char buf[32];
      std::snprintf(buf, sizeof buf, ys < 0.1 ? "%.3f" : (ys < 1 ? "%.2f" : "%.0f"), v);
      svg_ << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y(v) + 4) << "\" text-anchor=\"end\">" << buf
           << "</text>\n";
    }
    svg_ << "<text x=\"" << num(x((x0_ + x1_) / 2)) << "\" y=\"" << num(kHeight - 10) << "\" text-anchor=\"middle\">"
         << escape(xlabel) << "</text>\n";
    svg_ << "<text transform=\"translate(16," << num(y((y0_ + y1_) / 2)) << ") rotate(-90)\" text-anchor=\"middle\">"
         << escape(ylabel) << "</text>\n";
  }

  std::ostringstream svg_;
  double x0_, x1_, y0_, y1_;
};

std::vector<double> hours(const RunResult& r) {
  std::vector<double> h(r.minute.size());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = r.minute[i] / 60.0;
  return h;
}

double horizon_hours(const std::vector<ScenarioOutput>& results) {
  double h = 1.0;
  for (const auto& s : results)
    if (s.result->steps() > 0) h = std::max(h, (s.result->minute.back() + s.result->timestep_min) / 60.0);
  return h;
}

std::string feeder_power_svg(const std::vector<ScenarioOutput>& results) {
  double top = 0.0;
  for (const auto& s : results)
    for (double p : s.result->feeder_kw) top = std::max(top, p);
  Chart c("Feeder-head real power", 0.0, horizon_hours(results), 0.0, std::max(1.0, top * 1.08), "time (h)",
          "feeder power (kW)");
  for (std::size_t i = 0; i < results.size(); ++i) {
    c.polyline(hours(*results[i].result), results[i].result->feeder_kw, color(results[i].label));
    c.legend(i, color(results[i].label), to_string(results[i].label));
  }
  return c.finish();
}

std::string min_voltage_svg(const std::vector<ScenarioOutput>& results, const KpiOptions& options) {
  double lo = options.band.low - 0.02;
  double hi = options.band.high + 0.01;
  std::vector<std::vector<double>> series;
  for (const auto& s : results) {
    std::vector<double> v(s.result->steps());
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = s.result->min_voltage(t);
    for (double x : v)
      if (std::isfinite(x)) lo = std::min(lo, x - 0.01);
    series.push_back(std::move(v));
  }
  Chart c("Minimum monitored voltage", 0.0, horizon_hours(results), lo, hi, "time (h)", "voltage (pu)");
  c.hline(options.band.low, "#7f7f7f", "ANSI low " + num(options.band.low));
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].result->monitored.empty()) c.polyline(hours(*results[i].result), series[i], color(results[i].label));
    c.legend(i, color(results[i].label), to_string(results[i].label));
  }
  return c.finish();
}

std::string boxplot_svg(const std::vector<ScenarioOutput>& results, const KpiOptions& options) {
  double lo = options.band.low - 0.02;
  double hi = options.band.high + 0.01;
  for (const auto& s : results)
    for (const BoxStats* b : {&s.kpis.on_peak, &s.kpis.off_peak})
      if (b->count > 0) {
        lo = std::min(lo, b->min - 0.01);
        hi = std::max(hi, b->max + 0.01);
      }
  const double n = static_cast<double>(results.size());
  Chart c("Monitored voltages, on-peak (filled) and off-peak (open)", 0.0, std::max(1.0, n), lo, hi, "scenario",
          "voltage (pu)");
  c.hline(options.band.low, "#7f7f7f", "ANSI low " + num(options.band.low));
  auto box = [&](double center, const BoxStats& b, const char* stroke, bool filled) {
    if (b.count == 0) return;
    const double half = 0.14 * (c.x(1.0) - c.x(0.0));
    const double cx = c.x(center);
    auto& o = c.raw();
    o << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(c.y(b.min)) << "\" y2=\""
      << num(c.y(b.max)) << "\" stroke=\"" << stroke << "\"/>\n";
    o << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(c.y(b.q3)) << "\" width=\"" << num(2 * half)
      << "\" height=\"" << num(std::max(0.5, c.y(b.q1) - c.y(b.q3))) << "\" fill=\"" << (filled ? stroke : "white")
      << "\" fill-opacity=\"" << (filled ? "0.35" : "1") << "\" stroke=\"" << stroke << "\"/>\n";
    o << "<line x1=\"" << num(cx - half) << "\" x2=\"" << num(cx + half) << "\" y1=\"" << num(c.y(b.median))
      << "\" y2=\"" << num(c.y(b.median)) << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n";
  };
  for (std::size_t i = 0; i < results.size(); ++i) {
    const double base = static_cast<double>(i);
    box(base + 0.32, results[i].kpis.on_peak, color(results[i].label), true);
    box(base + 0.68, results[i].kpis.off_peak, color(results[i].label), false);
    c.legend(i, color(results[i].label), to_string(results[i].label));
  }
  return c.finish();
}

/// Nodes laid out by distance from the source (x) and leaf order (y).
std::string load_map_svg(const FeederModel& model, const RunResult& run) {
  const std::size_t n = model.nodes.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& s : model.segments) {
    const auto a = model.node_index(s.from), b = model.node_index(s.to);
    if (a && b) {
      adj[*a].push_back({*b, s.length_ft});
      adj[*b].push_back({*a, s.length_ft});
    }
  }
  for (const auto& t : model.transformers) {
    const auto a = model.node_index(t.from), b = model.node_index(t.to);
    if (a && b) {
      adj[*a].push_back({*b, 500.0});
      adj[*b].push_back({*a, 500.0});
    }
  }
  const std::size_t root = model.node_index(model.source.node).value_or(0);
  std::vector<double> dist(n, -1.0), ypos(n, 0.0);
  std::vector<int> parent(n, -1);
  double next_leaf = 0.0;
  // Iterative DFS; children placed before their parent's y is averaged.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
  dist[root] = 0.0;
  std::vector<std::vector<std::size_t>> children(n);
  while (!stack.empty()) {
    auto& [u, i] = stack.back();
    if (i < adj[u].size()) {
      const auto [v, len] = adj[u][i++];
      if (dist[v] < 0.0) {
        dist[v] = dist[u] + len;
        parent[v] = static_cast<int>(u);
        children[u].push_back(v);
        stack.push_back({v, 0});
      }
      continue;
    }
    const std::size_t done = u;
    stack.pop_back();
    if (children[done].empty()) {
      ypos[done] = next_leaf++;
    } else {
      double sum = 0.0;
      for (auto c : children[done]) sum += ypos[c];
      ypos[done] = sum / static_cast<double>(children[done].size());
    }
  }
  double max_dist = 1.0;
  for (double d : dist) max_dist = std::max(max_dist, d);

  std::size_t peak = 0;
  for (std::size_t t = 0; t < run.steps(); ++t)
    if (run.feeder_kw[t] > run.feeder_kw[peak]) peak = t;
  std::vector<double> load(n, 0.0);
  if (peak < run.node_kw.size())
    for (std::size_t i = 0; i < n && i < run.node_kw[peak].size(); ++i) load[i] = run.node_kw[peak][i];
  double max_load = 0.0;
  for (double l : load) max_load = std::max(max_load, l);

  char title[160];
  std::snprintf(title, sizeof title, "Node load at the %s peak (minute %.0f), marker size proportional to kW",
                std::string(to_string(run.label)).c_str(), run.steps() ? run.minute[peak] : 0.0);
  Chart c(title, -0.02 * max_dist, max_dist * 1.05, -1.0, std::max(1.0, next_leaf), "distance from source (ft)",
          "branch");
  auto& o = c.raw();
  for (std::size_t v = 0; v < n; ++v) {
    if (parent[v] < 0) continue;
    const auto u = static_cast<std::size_t>(parent[v]);
    o << "<polyline fill=\"none\" stroke=\"#999\" points=\"" << num(c.x(dist[u])) << ',' << num(c.y(ypos[u])) << ' '
      << num(c.x(dist[u])) << ',' << num(c.y(ypos[v])) << ' ' << num(c.x(dist[v])) << ',' << num(c.y(ypos[v]))
      << "\"/>\n";
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (dist[v] < 0.0) continue;
    const double r = max_load > 0.0 ? 2.0 + 18.0 * std::max(0.0, load[v]) / max_load : 2.0;
    o << "<circle cx=\"" << num(c.x(dist[v])) << "\" cy=\"" << num(c.y(ypos[v])) << "\" r=\"" << num(r)
      << "\" fill=\"#d62728\" fill-opacity=\"0.45\" stroke=\"#7f0000\"><title>" << escape(model.nodes[v].id) << ": "
      << num(load[v]) << " kW</title></circle>\n";
    o << "<text x=\"" << num(c.x(dist[v]) + 4) << "\" y=\"" << num(c.y(ypos[v]) - 5) << "\" font-size=\"9\">"
      << escape(model.nodes[v].id) << "</text>\n";
  }
  return c.finish();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> emit_outputs(const std::vector<ScenarioOutput>& results,
                                                const std::filesystem::path& out_dir, const FeederModel* model,
                                                const KpiOptions& options) {
  std::vector<std::filesystem::path> manifest;
  if (results.empty()) return manifest;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<Kpis> kpis;
  for (const auto& s : results) {
    const auto dir = out_dir / std::string(to_string(s.label));
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    std::ostringstream csv;
    write_timeseries_csv(*s.result, csv);
    write_file(dir / "timeseries.csv", csv.str());
    manifest.push_back(dir / "timeseries.csv");
    kpis.push_back(s.kpis);
  }
  write_file(out_dir / "summary.json", summary_json(kpis, options));
  manifest.push_back(out_dir / "summary.json");

  write_file(out_dir / "feeder_power.svg", feeder_power_svg(results));
  manifest.push_back(out_dir / "feeder_power.svg");
  write_file(out_dir / "min_voltage.svg", min_voltage_svg(results, options));
  manifest.push_back(out_dir / "min_voltage.svg");
  write_file(out_dir / "voltage_boxplots.svg", boxplot_svg(results, options));
  manifest.push_back(out_dir / "voltage_boxplots.svg");
  if (model) {
    const ScenarioOutput* map_run = &results.front();
    for (const auto& s : results)
      if (s.label == ScenarioLabel::Uncontrolled) map_run = &s;
    write_file(out_dir / "peak_load_map.svg", load_map_svg(*model, *map_run->result));
    manifest.push_back(out_dir / "peak_load_map.svg");
  }
  return manifest;
}

}  // namespace pevgrid
