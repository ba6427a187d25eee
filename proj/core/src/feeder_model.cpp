#include "pevgrid/feeder_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "pevgrid/error.hpp"

namespace pevgrid {

double Node::base_ln_volts() const { return kv_ll * 1000.0 / std::sqrt(3.0); }

std::string_view to_string(RegulatorMode mode) {
  return mode == RegulatorMode::Fixed ? "fixed" : "automatic";
}

RegulatorMode parse_regulator_mode(std::string_view text) {
  if (text == "fixed") return RegulatorMode::Fixed;
  if (text == "automatic") return RegulatorMode::Automatic;
  throw ParseError("unknown regulator mode \"" + std::string(text) + "\"");
}

std::string_view to_string(LoadConnection c) { return c == LoadConnection::Wye ? "wye" : "delta"; }

std::string_view to_string(LoadModel m) {
  switch (m) {
    case LoadModel::ConstantPower: return "PQ";
    case LoadModel::ConstantCurrent: return "I";
    case LoadModel::ConstantImpedance: return "Z";
  }
  return "?";
}

LoadConnection parse_load_connection(std::string_view text) {
  if (text == "wye" || text == "Y") return LoadConnection::Wye;
  if (text == "delta" || text == "D") return LoadConnection::Delta;
  throw ParseError("unknown load connection \"" + std::string(text) + "\"");
}

LoadModel parse_load_model(std::string_view text) {
  if (text == "PQ") return LoadModel::ConstantPower;
  if (text == "I") return LoadModel::ConstantCurrent;
  if (text == "Z") return LoadModel::ConstantImpedance;
  throw ParseError("unknown load model \"" + std::string(text) + "\"");
}

PhaseSet Load::phases_used() const {
  PhaseSet used;
  for (int k = 0; k < 3; ++k) {
    if (kw[k] == 0.0 && kvar[k] == 0.0) continue;
    used.insert(static_cast<Phase>(k));
    // Delta branch k spans phases k and k+1 (AB, BC, CA).
    if (connection == LoadConnection::Delta) used.insert(static_cast<Phase>((k + 1) % 3));
  }
  return used;
}

std::optional<std::size_t> FeederModel::node_index(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

const Node* FeederModel::find_node(std::string_view id) const {
  auto i = node_index(id);
  return i ? &nodes[*i] : nullptr;
}

const LineConfiguration* FeederModel::find_config(std::string_view id) const {
  auto it = std::find_if(configs.begin(), configs.end(), [&](const auto& c) { return c.id == id; });
  return it == configs.end() ? nullptr : &*it;
}

const Segment* FeederModel::find_segment(std::string_view a, std::string_view b) const {
  for (const auto& s : segments)
    if ((s.from == a && s.to == b) || (s.from == b && s.to == a)) return &s;
  return nullptr;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += '\n';
    out += issue;
  }
  return out;
}

Matrix3c segment_impedance(const LineConfiguration& config, double length_ft) {
  return config.z_ohm_per_mile * (length_ft / kFeetPerMile);
}

Matrix3c segment_admittance(const LineConfiguration& config, double length_ft) {
  return config.y_us_per_mile * (1e-6 * length_ft / kFeetPerMile);
}

namespace {

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

bool nearly_equal(Complex a, Complex b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

void check_matrix(const LineConfiguration& c, const Matrix3c& m, std::string_view what, bool require_positive_r,
                  std::vector<std::string>& issues) {
  const std::string where = "config '" + c.id + "' " + std::string(what);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const bool present = c.phasing.has(static_cast<Phase>(i)) && c.phasing.has(static_cast<Phase>(j));
      if (!present && m(i, j) != Complex{}) {
        issues.push_back(where + ": nonzero entry for phase absent from phasing " + c.phasing.to_string());
        return;
      }
      if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag())) {
        issues.push_back(where + ": non-finite entry");
        return;
      }
      if (j > i && !nearly_equal(m(i, j), m(j, i))) {
        issues.push_back(where + ": matrix not symmetric at (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
      }
    }
    if (require_positive_r && c.phasing.has(static_cast<Phase>(i)) && !(m(i, i).real() > 0.0))
      issues.push_back(where + ": diagonal resistance of phase " + phase_letter(static_cast<Phase>(i)) + " not positive");
  }
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

ValidationReport validate_feeder(const FeederModel& model) {
  ValidationReport report;
  auto& issues = report.issues;

  if (!positive(model.base_kva)) issues.push_back("feeder base_kva must be positive");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    const auto& n = model.nodes[i];
    if (!index.emplace(n.id, i).second) issues.push_back("node '" + n.id + "' defined more than once");
    if (n.phases.empty()) issues.push_back("node '" + n.id + "' has no phases");
    if (!positive(n.kv_ll)) issues.push_back("node '" + n.id + "' base kV must be positive");
  }
  auto node = [&](const std::string& id) -> const Node* {
    auto it = index.find(id);
    return it == index.end() ? nullptr : &model.nodes[it->second];
  };

  if (!node(model.source.node)) issues.push_back("source node '" + model.source.node + "' does not exist");
  if (!positive(model.source.voltage_pu)) issues.push_back("source voltage must be positive");
  if (model.substation && model.substation->modeled) {
    const auto& s = *model.substation;
    if (!positive(s.kva) || !positive(s.kv_high) || !positive(s.kv_low))
      issues.push_back("substation transformer ratings must be positive");
  }

  std::set<std::string> config_ids;
  for (const auto& c : model.configs) {
    if (!config_ids.insert(c.id).second) issues.push_back("config '" + c.id + "' defined more than once");
    if (c.phasing.empty()) issues.push_back("config '" + c.id + "' has empty phasing");
    check_matrix(c, c.z_ohm_per_mile, "impedance", true, issues);
    check_matrix(c, c.y_us_per_mile, "admittance", false, issues);
  }

  // Edges of the topology: segments then transformers, in file order.
  struct Edge {
    std::string label;
    std::string from, to;
  };
  std::vector<Edge> edges;

  for (const auto& s : model.segments) {
    const std::string label = "segment '" + s.from + "-" + s.to + "'";
    const Node* a = node(s.from);
    const Node* b = node(s.to);
    if (!a) issues.push_back(label + ": unknown node '" + s.from + "'");
    if (!b) issues.push_back(label + ": unknown node '" + s.to + "'");
    if (s.from == s.to) issues.push_back(label + ": connects a node to itself");
    if (!positive(s.length_ft)) issues.push_back(label + ": length must be positive");
    const LineConfiguration* c = model.find_config(s.config);
    if (!c) {
      issues.push_back(label + ": unknown configuration id '" + s.config + "'");
    } else {
      if (a && !c->phasing.subset_of(a->phases))
        issues.push_back(label + ": phasing " + c->phasing.to_string() + " not available at node '" + s.from + "'");
      if (b && !c->phasing.subset_of(b->phases))
        issues.push_back(label + ": phasing " + c->phasing.to_string() + " not available at node '" + s.to + "'");
    }
    if (a && b && s.from != s.to) edges.push_back({label, s.from, s.to});
  }

  for (const auto& t : model.transformers) {
    const std::string label = "transformer '" + t.id + "'";
    const Node* a = node(t.from);
    const Node* b = node(t.to);
    if (!a) issues.push_back(label + ": unknown node '" + t.from + "'");
    if (!b) issues.push_back(label + ": unknown node '" + t.to + "'");
    if (!positive(t.kva) || !positive(t.kv_primary) || !positive(t.kv_secondary))
      issues.push_back(label + ": kVA and kV ratings must be positive");
    if (t.connection != "gr_wye-gr_wye") issues.push_back(label + ": unsupported connection '" + t.connection + "'");
    if (a && positive(t.kv_primary) && std::abs(a->kv_ll - t.kv_primary) > 1e-9 * t.kv_primary)
      issues.push_back(label + ": primary kV does not match base of node '" + t.from + "'");
    if (b && positive(t.kv_secondary) && std::abs(b->kv_ll - t.kv_secondary) > 1e-9 * t.kv_secondary)
      issues.push_back(label + ": secondary kV does not match base of node '" + t.to + "'");
    if (a && b && !b->phases.subset_of(a->phases))
      issues.push_back(label + ": secondary phases not available on primary node '" + t.from + "'");
    if (a && b && t.from != t.to) edges.push_back({label, t.from, t.to});
  }

  // Radiality: no edge may close a cycle, and every node must be reachable.
  DisjointSet dsu(model.nodes.size());
  std::map<std::string, std::vector<std::string>> adjacency;
  for (const auto& e : edges) {
    if (!dsu.unite(index.at(e.from), index.at(e.to))) {
      issues.push_back(e.label + " closes a cycle (topology must be radial)");
      continue;
    }
    adjacency[e.from].push_back(e.to);
    adjacency[e.to].push_back(e.from);
  }
  if (node(model.source.node)) {
    std::set<std::string> seen{model.source.node};
    std::deque<std::string> queue{model.source.node};
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      for (const auto& next : adjacency[cur])
        if (seen.insert(next).second) queue.push_back(next);
    }
    for (const auto& n : model.nodes)
      if (!seen.contains(n.id)) issues.push_back("node '" + n.id + "' is not reachable from the source");
  }

  std::set<std::pair<std::string, std::string>> regulated;
  for (const auto& r : model.regulators) {
    const std::string label = "regulator '" + r.id + "'";
    const Segment* s = nullptr;
    for (const auto& seg : model.segments)
      if (seg.from == r.from && seg.to == r.to) s = &seg;
    if (!s) {
      issues.push_back(label + ": no segment from '" + r.from + "' to '" + r.to + "'");
    } else if (const auto* c = model.find_config(s->config); c && !r.phases.subset_of(c->phasing)) {
      issues.push_back(label + ": phases " + r.phases.to_string() + " not on segment");
    }
    if (!regulated.emplace(r.from, r.to).second) issues.push_back(label + ": segment already has a regulator");
    for (Phase p : kAllPhases)
      if (r.phases.has(p) && std::abs(r.taps[pevgrid::index(p)]) > kMaxTap)
        issues.push_back(label + ": tap on phase " + phase_letter(p) + " outside [-16, +16]");
    if (!positive(r.step_pu)) issues.push_back(label + ": step must be positive");
    if (!positive(r.bandwidth_v) || !positive(r.pt_ratio) || !positive(r.ct_primary_a) || !positive(r.band_center_v))
      issues.push_back(label + ": control settings must be positive");
  }

  for (const auto& c : model.capacitors) {
    const std::string label = "capacitor '" + c.id + "'";
    const Node* n = node(c.node);
    if (!n) {
      issues.push_back(label + ": unknown node '" + c.node + "'");
      continue;
    }
    for (Phase p : kAllPhases) {
      const double q = c.kvar[pevgrid::index(p)];
      if (!std::isfinite(q) || q < 0.0) issues.push_back(label + ": kvar must be nonnegative");
      if (q != 0.0 && !n->phases.has(p))
        issues.push_back(label + ": phase " + std::string(1, phase_letter(p)) + " absent at node '" + c.node + "'");
    }
  }

  for (const auto& l : model.loads) {
    const std::string label = "load '" + l.id + "'";
    const PhaseSet used = l.phases_used();
    for (int k = 0; k < 3; ++k)
      if (!std::isfinite(l.kw[k]) || !std::isfinite(l.kvar[k])) issues.push_back(label + ": non-finite power");
    std::vector<std::string> ends{l.node};
    if (l.to_node) {
      ends.push_back(*l.to_node);
      if (!model.find_segment(l.node, *l.to_node))
        issues.push_back(label + ": no segment between '" + l.node + "' and '" + *l.to_node + "'");
    }
    for (const auto& id : ends) {
      const Node* n = node(id);
      if (!n) {
        issues.push_back(label + ": unknown node '" + id + "'");
        continue;
      }
      for (Phase p : kAllPhases)
        if (used.has(p) && !n->phases.has(p))
          issues.push_back(label + ": phase " + std::string(1, phase_letter(p)) + " absent at node '" + id + "'");
    }
  }

  return report;
}

}  // namespace pevgrid
