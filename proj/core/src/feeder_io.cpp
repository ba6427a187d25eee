#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "pevgrid/error.hpp"
#include "pevgrid/feeder_model.hpp"

namespace pevgrid {

using Json = nlohmann::ordered_json;

namespace {

double parse_double(std::string_view s, std::string_view whole) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("malformed complex number \"" + std::string(whole) + "\"");
  return value;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Complex parse_complex(std::string_view text) {
  const auto first = text.find_first_not_of(" \t");
  const auto last = text.find_last_not_of(" \t");
  if (first == std::string_view::npos) throw ParseError("empty complex number");
  const std::string_view s = text.substr(first, last - first + 1);

  const auto j = s.find('j');
  if (j == std::string_view::npos) return {parse_double(s, text), 0.0};
  double sign = 1.0;
  std::string_view real_part = s.substr(0, j);
  if (!real_part.empty() && (real_part.back() == '+' || real_part.back() == '-')) {
    sign = real_part.back() == '-' ? -1.0 : 1.0;
    real_part.remove_suffix(1);
  }
  const double im = sign * parse_double(s.substr(j + 1), text);
  const double re = real_part.empty() ? 0.0 : parse_double(real_part, text);
  return {re, im};
}

std::string format_complex(Complex value) {
  const double re = value.real();
  const double im = value.imag();
  if (im == 0.0) return shortest(re == 0.0 ? 0.0 : re);
  std::string imag = im < 0.0 ? "-j" + shortest(-im) : "j" + shortest(im);
  if (re == 0.0) return imag;
  return shortest(re) + (im < 0.0 ? "" : "+") + imag;
}

namespace {

template <class T>
T field(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": field \"" + key + "\" has the wrong type");
  }
}

template <class T>
T field_or(const Json& obj, const char* key, T fallback, const std::string& where) {
  return obj.contains(key) ? field<T>(obj, key, where) : fallback;
}

const Json& array_field(const Json& doc, const char* key) {
  static const Json empty = Json::array();
  auto it = doc.find(key);
  if (it == doc.end()) return empty;
  if (!it->is_array()) throw ParseError(std::string("section \"") + key + "\" must be an array");
  return *it;
}

std::array<double, 3> triple(const Json& obj, const char* key, const std::string& where) {
  auto v = field<std::vector<double>>(obj, key, where);
  if (v.size() != 3) throw ParseError(where + ": field \"" + key + "\" must have 3 entries");
  return {v[0], v[1], v[2]};
}

Matrix3c read_matrix(const Json& obj, const char* key, PhaseSet phasing, const std::string& where) {
  auto rows = field<std::vector<std::vector<std::string>>>(obj, key, where);
  std::vector<int> present;
  for (Phase p : kAllPhases)
    if (phasing.has(p)) present.push_back(index(p));
  if (rows.size() != present.size())
    throw ParseError(where + ": \"" + key + "\" must be " + std::to_string(present.size()) + "x" +
                     std::to_string(present.size()) + " for phasing " + phasing.to_string());
  Matrix3c m = Matrix3c::Zero();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != present.size())
      throw ParseError(where + ": \"" + key + "\" row " + std::to_string(i + 1) + " has wrong length");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(present[i], present[j]) = parse_complex(rows[i][j]);
  }
  return m;
}

Json write_matrix(const Matrix3c& m, PhaseSet phasing) {
  Json rows = Json::array();
  for (Phase r : kAllPhases) {
    if (!phasing.has(r)) continue;
    Json row = Json::array();
    for (Phase c : kAllPhases)
      if (phasing.has(c)) row.push_back(format_complex(m(index(r), index(c))));
    rows.push_back(std::move(row));
  }
  return rows;
}

PhaseSet phases_field(const Json& obj, const char* key, const std::string& where) {
  return PhaseSet::parse(field<std::string>(obj, key, where));
}

}  // namespace

FeederModel parse_feeder(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("feeder file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("feeder file must contain a JSON object");

  FeederModel m;
  m.name = field_or<std::string>(doc, "name", "", "feeder");
  m.base_kva = field<double>(doc, "base_kva", "feeder");
  const auto& src = doc.contains("source") ? doc["source"] : throw ParseError("feeder: missing section \"source\"");
  m.source.node = field<std::string>(src, "node", "source");
  m.source.voltage_pu = field_or<double>(src, "voltage_pu", 1.05, "source");
  m.source.angle_deg = field_or<double>(src, "angle_deg", 0.0, "source");
  if (doc.contains("substation")) {
    const auto& s = doc["substation"];
    SubstationTransformer st;
    st.kva = field<double>(s, "kva", "substation");
    st.kv_high = field<double>(s, "kv_high", "substation");
    st.kv_low = field<double>(s, "kv_low", "substation");
    st.r_pu = field<double>(s, "r_pu", "substation");
    st.x_pu = field<double>(s, "x_pu", "substation");
    st.connection = field_or<std::string>(s, "connection", st.connection, "substation");
    st.modeled = field_or<bool>(s, "modeled", false, "substation");
    m.substation = st;
  }

  for (const auto& n : array_field(doc, "nodes")) {
    Node node;
    node.id = field<std::string>(n, "id", "node");
    const std::string where = "node '" + node.id + "'";
    node.phases = phases_field(n, "phases", where);
    node.kv_ll = field<double>(n, "kv_ll", where);
    m.nodes.push_back(std::move(node));
  }
  for (const auto& c : array_field(doc, "configs")) {
    LineConfiguration cfg;
    cfg.id = field<std::string>(c, "id", "config");
    const std::string where = "config '" + cfg.id + "'";
    cfg.phasing = phases_field(c, "phasing", where);
    cfg.z_ohm_per_mile = read_matrix(c, "z_ohm_per_mile", cfg.phasing, where);
    if (c.contains("y_us_per_mile")) cfg.y_us_per_mile = read_matrix(c, "y_us_per_mile", cfg.phasing, where);
    m.configs.push_back(std::move(cfg));
  }
  for (const auto& s : array_field(doc, "segments")) {
    Segment seg;
    seg.from = field<std::string>(s, "from", "segment");
    seg.to = field<std::string>(s, "to", "segment");
    const std::string where = "segment '" + seg.from + "-" + seg.to + "'";
    seg.length_ft = field<double>(s, "length_ft", where);
    seg.config = field<std::string>(s, "config", where);
    m.segments.push_back(std::move(seg));
  }
  for (const auto& t : array_field(doc, "transformers")) {
    Transformer x;
    x.id = field<std::string>(t, "id", "transformer");
    const std::string where = "transformer '" + x.id + "'";
    x.from = field<std::string>(t, "from", where);
    x.to = field<std::string>(t, "to", where);
    x.kva = field<double>(t, "kva", where);
    x.kv_primary = field<double>(t, "kv_primary", where);
    x.kv_secondary = field<double>(t, "kv_secondary", where);
    x.r_pu = field<double>(t, "r_pu", where);
    x.x_pu = field<double>(t, "x_pu", where);
    x.connection = field_or<std::string>(t, "connection", x.connection, where);
    m.transformers.push_back(std::move(x));
  }
  for (const auto& r : array_field(doc, "regulators")) {
    Regulator reg;
    reg.id = field<std::string>(r, "id", "regulator");
    const std::string where = "regulator '" + reg.id + "'";
    reg.from = field<std::string>(r, "from", where);
    reg.to = field<std::string>(r, "to", where);
    reg.phases = phases_field(r, "phases", where);
    auto taps = field<std::vector<int>>(r, "taps", where);
    if (taps.size() != 3) throw ParseError(where + ": \"taps\" must have 3 entries");
    reg.taps = {taps[0], taps[1], taps[2]};
    reg.step_pu = field_or<double>(r, "step_pu", reg.step_pu, where);
    reg.mode = parse_regulator_mode(field_or<std::string>(r, "mode", "fixed", where));
    reg.band_center_v = field_or<double>(r, "band_center_v", reg.band_center_v, where);
    reg.bandwidth_v = field_or<double>(r, "bandwidth_v", reg.bandwidth_v, where);
    reg.pt_ratio = field_or<double>(r, "pt_ratio", reg.pt_ratio, where);
    reg.ct_primary_a = field_or<double>(r, "ct_primary_a", reg.ct_primary_a, where);
    if (r.contains("r_ldc_v")) reg.r_ldc_v = triple(r, "r_ldc_v", where);
    if (r.contains("x_ldc_v")) reg.x_ldc_v = triple(r, "x_ldc_v", where);
    m.regulators.push_back(std::move(reg));
  }
  for (const auto& c : array_field(doc, "capacitors")) {
    Capacitor cap;
    cap.id = field<std::string>(c, "id", "capacitor");
    const std::string where = "capacitor '" + cap.id + "'";
    cap.node = field<std::string>(c, "node", where);
    cap.kvar = triple(c, "kvar", where);
    m.capacitors.push_back(std::move(cap));
  }
  for (const auto& l : array_field(doc, "loads")) {
    Load load;
    load.id = field<std::string>(l, "id", "load");
    const std::string where = "load '" + load.id + "'";
    load.node = field<std::string>(l, "node", where);
    if (l.contains("to_node")) load.to_node = field<std::string>(l, "to_node", where);
    load.connection = parse_load_connection(field<std::string>(l, "connection", where));
    load.model = parse_load_model(field<std::string>(l, "model", where));
    load.kw = triple(l, "kw", where);
    load.kvar = triple(l, "kvar", where);
    m.loads.push_back(std::move(load));
  }
  return m;
}

std::string serialize_feeder(const FeederModel& m) {
  Json doc;
  doc["format"] = "pevgrid-feeder";
  doc["format_version"] = 1;
  doc["name"] = m.name;
  doc["base_kva"] = m.base_kva;
  doc["source"] = {{"node", m.source.node}, {"voltage_pu", m.source.voltage_pu}, {"angle_deg", m.source.angle_deg}};
  if (m.substation) {
    const auto& s = *m.substation;
    doc["substation"] = {{"kva", s.kva},   {"kv_high", s.kv_high},       {"kv_low", s.kv_low}, {"r_pu", s.r_pu},
                         {"x_pu", s.x_pu}, {"connection", s.connection}, {"modeled", s.modeled}};
  }
  Json& nodes = doc["nodes"] = Json::array();
  for (const auto& n : m.nodes) nodes.push_back({{"id", n.id}, {"phases", n.phases.to_string()}, {"kv_ll", n.kv_ll}});
  Json& configs = doc["configs"] = Json::array();
  for (const auto& c : m.configs)
    configs.push_back({{"id", c.id},
                       {"phasing", c.phasing.to_string()},
                       {"z_ohm_per_mile", write_matrix(c.z_ohm_per_mile, c.phasing)},
                       {"y_us_per_mile", write_matrix(c.y_us_per_mile, c.phasing)}});
  Json& segments = doc["segments"] = Json::array();
  for (const auto& s : m.segments)
    segments.push_back({{"from", s.from}, {"to", s.to}, {"length_ft", s.length_ft}, {"config", s.config}});
  Json& transformers = doc["transformers"] = Json::array();
  for (const auto& t : m.transformers)
    transformers.push_back({{"id", t.id},
                            {"from", t.from},
                            {"to", t.to},
                            {"kva", t.kva},
                            {"kv_primary", t.kv_primary},
                            {"kv_secondary", t.kv_secondary},
                            {"r_pu", t.r_pu},
                            {"x_pu", t.x_pu},
                            {"connection", t.connection}});
  Json& regulators = doc["regulators"] = Json::array();
  for (const auto& r : m.regulators)
    regulators.push_back({{"id", r.id},
                          {"from", r.from},
                          {"to", r.to},
                          {"phases", r.phases.to_string()},
                          {"taps", r.taps},
                          {"step_pu", r.step_pu},
                          {"mode", to_string(r.mode)},
                          {"band_center_v", r.band_center_v},
                          {"bandwidth_v", r.bandwidth_v},
                          {"pt_ratio", r.pt_ratio},
                          {"ct_primary_a", r.ct_primary_a},
                          {"r_ldc_v", r.r_ldc_v},
                          {"x_ldc_v", r.x_ldc_v}});
  Json& caps = doc["capacitors"] = Json::array();
  for (const auto& c : m.capacitors) caps.push_back({{"id", c.id}, {"node", c.node}, {"kvar", c.kvar}});
  Json& loads = doc["loads"] = Json::array();
  for (const auto& l : m.loads) {
    Json j = {{"id", l.id}, {"node", l.node}};
    if (l.to_node) j["to_node"] = *l.to_node;
    j["connection"] = to_string(l.connection);
    j["model"] = to_string(l.model);
    j["kw"] = l.kw;
    j["kvar"] = l.kvar;
    loads.push_back(std::move(j));
  }

  // One record per line keeps the file diffable.
  std::ostringstream out;
  out << "{\n";
  std::size_t k = 0;
  for (auto it = doc.begin(); it != doc.end(); ++it, ++k) {
    out << "  " << Json(it.key()).dump() << ": ";
    if (it->is_array()) {
      out << "[\n";
      for (std::size_t i = 0; i < it->size(); ++i) out << "    " << (*it)[i].dump() << (i + 1 < it->size() ? ",\n" : "\n");
      out << "  ]";
    } else {
      out << it->dump();
    }
    out << (k + 1 < doc.size() ? ",\n" : "\n");
  }
  out << "}\n";
  return out.str();
}

FeederModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feeder file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  FeederModel model = parse_feeder(buf.str());
  if (auto report = validate_feeder(model); !report.ok())
    throw ValidationError("invalid feeder " + path.string() + ":\n" + report.to_string());
  return model;
}

void save_feeder(const FeederModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feeder file " + path.string());
  out << serialize_feeder(model);
  if (!out) throw IoError("failed writing feeder file " + path.string());
}

}  // namespace pevgrid
