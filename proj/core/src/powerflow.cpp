#include "pevgrid/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>

#include "pevgrid/error.hpp"
#include "text_util.hpp"

namespace pevgrid {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Vector3cd to_eigen(const PhaseVector& v) { return {v[0], v[1], v[2]}; }
PhaseVector from_eigen(const Eigen::Vector3cd& v) { return {v(0), v(1), v(2)}; }

PhaseVector masked(PhaseVector v, PhaseSet phases) {
  for (Phase p : kAllPhases)
    if (!phases.has(p)) v[index(p)] = {};
  return v;
}

/// Per-branch current for one load connection, given the branch voltage.
Complex branch_current(LoadModel model, Complex s_va, Complex v, double nominal) {
  switch (model) {
    case LoadModel::ConstantPower:
      return std::conj(s_va / v);
    case LoadModel::ConstantCurrent:
      return std::polar(std::abs(s_va) / nominal, std::arg(v) - std::arg(s_va));
    case LoadModel::ConstantImpedance:
      return std::conj(s_va) / (nominal * nominal) * v;
  }
  return {};
}

}  // namespace

LoadSet LoadSet::scaled(double factor) const {
  LoadSet out = *this;
  for (auto& e : out.entries)
    for (auto& s : e.s_kva) s *= factor;
  return out;
}

LoadSet nominal_loads(const FeederModel& model) {
  LoadSet set;
  for (const auto& load : model.loads) {
    PhaseVector s{};
    for (int k = 0; k < 3; ++k) s[k] = {load.kw[k], load.kvar[k]};
    auto node = model.node_index(load.node);
    if (!node) throw ValidationError("load '" + load.id + "': unknown node '" + load.node + "'");
    if (!load.to_node) {
      set.add({*node, load.connection, load.model, s});
      continue;
    }
    auto other = model.node_index(*load.to_node);
    if (!other) throw ValidationError("load '" + load.id + "': unknown node '" + *load.to_node + "'");
    for (auto& x : s) x *= 0.5;
    set.add({*node, load.connection, load.model, s});
    set.add({*other, load.connection, load.model, s});
  }
  return set;
}

TapSettings configured_taps(const FeederModel& model) {
  TapSettings taps;
  for (const auto& r : model.regulators) taps.push_back(r.taps);
  return taps;
}

PhaseVector load_injection_current(const LoadEntry& entry, const PhaseVector& v_ln, double nominal_ln_volts,
                                   double collapse_floor_pu) {
  PhaseVector current{};
  if (entry.connection == LoadConnection::Wye) {
    for (int p = 0; p < 3; ++p) {
      const Complex s = entry.s_kva[p] * 1000.0;
      if (s == Complex{}) continue;
      if (std::abs(v_ln[p]) < collapse_floor_pu * nominal_ln_volts)
        throw VoltageCollapse(std::string("voltage on phase ") + phase_letter(static_cast<Phase>(p)) +
                              " below collapse floor");
      current[p] = branch_current(entry.model, s, v_ln[p], nominal_ln_volts);
    }
    return current;
  }
  const double nominal_ll = std::sqrt(3.0) * nominal_ln_volts;
  for (int k = 0; k < 3; ++k) {
    const Complex s = entry.s_kva[k] * 1000.0;
    if (s == Complex{}) continue;
    const int i = k;
    const int j = (k + 1) % 3;
    const Complex v = v_ln[i] - v_ln[j];
    if (std::abs(v) < collapse_floor_pu * nominal_ll)
      throw VoltageCollapse(std::string("voltage on phases ") + phase_letter(static_cast<Phase>(i)) +
                            phase_letter(static_cast<Phase>(j)) + " below collapse floor");
    const Complex i_branch = branch_current(entry.model, s, v, nominal_ll);
    current[i] += i_branch;
    current[j] -= i_branch;
  }
  return current;
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::VoltageCollapse: return "voltage-collapse";
  }
  return "?";
}

double PowerFlowSolution::angle_deg(std::size_t node, Phase p) const {
  return std::arg(voltage_pu[node][index(p)]) / kDeg;
}

PowerFlowSolver::PowerFlowSolver(const FeederModel& model, SolverOptions options)
    : model_(&model), options_(options) {
  const std::size_t n = model.nodes.size();
  buses_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    buses_[i].phases = model.nodes[i].phases;
    buses_[i].base_ln = model.nodes[i].base_ln_volts();
    buses_[i].model_node = static_cast<int>(i);
  }
  auto source = model.node_index(model.source.node);
  if (!source) throw PowerFlowError("source node '" + model.source.node + "' does not exist");

  // Undirected adjacency over devices; orientation comes from the BFS below.
  struct Link {
    BranchKind kind;
    int device;
    int a, b;
  };
  std::vector<Link> links;
  auto node_of = [&](const std::string& id) {
    auto i = model.node_index(id);
    if (!i) throw PowerFlowError("unknown node '" + id + "'");
    return static_cast<int>(*i);
  };
  for (std::size_t s = 0; s < model.segments.size(); ++s)
    links.push_back({BranchKind::Line, static_cast<int>(s), node_of(model.segments[s].from), node_of(model.segments[s].to)});
  for (std::size_t t = 0; t < model.transformers.size(); ++t)
    links.push_back({BranchKind::Transformer, static_cast<int>(t), node_of(model.transformers[t].from),
                     node_of(model.transformers[t].to)});
  std::vector<std::vector<int>> adjacency(n);
  for (std::size_t k = 0; k < links.size(); ++k) {
    adjacency[links[k].a].push_back(static_cast<int>(k));
    adjacency[links[k].b].push_back(static_cast<int>(k));
  }

  std::vector<int> regulator_of_segment(model.segments.size(), -1);
  for (std::size_t r = 0; r < model.regulators.size(); ++r) {
    const auto& reg = model.regulators[r];
    bool found = false;
    for (std::size_t s = 0; s < model.segments.size(); ++s) {
      if (model.segments[s].from == reg.from && model.segments[s].to == reg.to) {
        regulator_of_segment[s] = static_cast<int>(r);
        found = true;
      }
    }
    if (!found) throw PowerFlowError("regulator '" + reg.id + "': segment not found");
  }

  shunt_.assign(n, Matrix3c::Zero());
  const double src_mag = model.source.voltage_pu * buses_[*source].base_ln;
  const double src_ang = model.source.angle_deg * kDeg;
  for (int p = 0; p < 3; ++p) source_v_[p] = std::polar(src_mag, src_ang - 2.0 * std::numbers::pi / 3.0 * p);
  source_v_ = masked(source_v_, buses_[*source].phases);

  auto add_branch = [&](Branch b) {
    branches_.push_back(b);
    buses_[b.to].parent = static_cast<int>(branches_.size() - 1);
  };

  if (model.substation && model.substation->modeled) {
    const auto& st = *model.substation;
    if (!(st.kva > 0.0) || !(st.kv_low > 0.0) || !std::isfinite(st.r_pu) || !std::isfinite(st.x_pu))
      throw PowerFlowError("substation transformer: singular model (rating must be positive and finite)");
    Bus bus;
    bus.phases = buses_[*source].phases;
    bus.base_ln = buses_[*source].base_ln;
    buses_.push_back(bus);
    shunt_.push_back(Matrix3c::Zero());
    slack_ = static_cast<int>(buses_.size() - 1);
    Branch b;
    b.kind = BranchKind::Substation;
    b.from = slack_;
    b.to = static_cast<int>(*source);
    const double zbase = st.kv_low * st.kv_low * 1000.0 / st.kva;
    b.z = Matrix3c::Zero();
    for (Phase p : kAllPhases)
      if (bus.phases.has(p)) b.z(index(p), index(p)) = Complex(st.r_pu, st.x_pu) * zbase;
    add_branch(b);
  } else {
    slack_ = static_cast<int>(*source);
  }

  std::vector<bool> seen(n, false);
  seen[*source] = true;
  std::deque<int> queue{static_cast<int>(*source)};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int k : adjacency[u]) {
      const Link& l = links[k];
      const int v = l.a == u ? l.b : l.a;
      if (seen[v]) continue;
      seen[v] = true;
      queue.push_back(v);
      if (l.kind == BranchKind::Transformer) {
        const auto& t = model.transformers[l.device];
        if (l.a != u) throw PowerFlowError("transformer '" + t.id + "': primary side faces away from the source");
        const double turns = t.kv_primary / t.kv_secondary;
        if (!(t.kva > 0.0) || !std::isfinite(turns) || !(turns > 0.0) || !std::isfinite(t.r_pu) ||
            !std::isfinite(t.x_pu))
          throw PowerFlowError("transformer '" + t.id + "': singular model (ratings must be positive and finite)");
        if (t.connection != "gr_wye-gr_wye")
          throw PowerFlowError("transformer '" + t.id + "': unsupported connection '" + t.connection + "'");
        Branch b;
        b.kind = BranchKind::Transformer;
        b.from = u;
        b.to = v;
        b.device = l.device;
        b.turns = turns;
        const double zbase = t.kv_secondary * t.kv_secondary * 1000.0 / t.kva;
        for (Phase p : kAllPhases)
          if (buses_[v].phases.has(p)) b.z(index(p), index(p)) = Complex(t.r_pu, t.x_pu) * zbase;
        add_branch(b);
        continue;
      }
      const auto& seg = model.segments[l.device];
      const auto* cfg = model.find_config(seg.config);
      if (!cfg) throw PowerFlowError("segment '" + seg.from + "-" + seg.to + "': unknown config '" + seg.config + "'");
      int line_from = u;
      if (const int r = regulator_of_segment[l.device]; r >= 0) {
        const auto& reg = model.regulators[r];
        if (l.a != u) throw PowerFlowError("regulator '" + reg.id + "': input side faces away from the source");
        Bus out;
        out.phases = cfg->phasing;
        out.base_ln = buses_[u].base_ln;
        out.regulator = r;
        buses_.push_back(out);
        shunt_.push_back(Matrix3c::Zero());
        Branch rb;
        rb.kind = BranchKind::Regulator;
        rb.from = u;
        rb.to = static_cast<int>(buses_.size() - 1);
        rb.device = r;
        add_branch(rb);
        line_from = rb.to;
      }
      Branch b;
      b.kind = BranchKind::Line;
      b.from = line_from;
      b.to = v;
      b.device = l.device;
      b.z = segment_impedance(*cfg, seg.length_ft);
      add_branch(b);
      const Matrix3c half = segment_admittance(*cfg, seg.length_ft) * 0.5;
      shunt_[line_from] += half;
      shunt_[v] += half;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw PowerFlowError("node '" + model.nodes[i].id + "' is not connected to the source");

  for (const auto& cap : model.capacitors) {
    const int b = node_of(cap.node);
    for (Phase p : kAllPhases) {
      const double base = buses_[b].base_ln;
      shunt_[b](index(p), index(p)) += Complex(0.0, cap.kvar[index(p)] * 1000.0 / (base * base));
    }
  }

  // Breadth-first order over all buses (including internal ones) via parents.
  children_.assign(buses_.size(), {});
  for (std::size_t k = 0; k < branches_.size(); ++k) children_[branches_[k].from].push_back(static_cast<int>(k));
  order_.clear();
  order_.push_back(slack_);
  for (std::size_t head = 0; head < order_.size(); ++head)
    for (int k : children_[order_[head]]) order_.push_back(branches_[k].to);
}

PowerFlowSolution PowerFlowSolver::solve(const LoadSet& loads, const TapSettings& taps,
                                         const PowerFlowSolution* warm_start) const {
  const auto& model = *model_;
  if (taps.size() != model.regulators.size())
    throw ContractViolation("tap settings must have one entry per regulator");
  for (const auto& load : loads.entries)
    if (load.node >= model.nodes.size()) throw ContractViolation("load references a node outside the model");

  const std::size_t nb = buses_.size();
  std::vector<Eigen::Vector3cd> v(nb, Eigen::Vector3cd::Zero());
  auto ratio = [&](int r) {
    Eigen::Vector3d a;
    for (int p = 0; p < 3; ++p) a(p) = 1.0 + model.regulators[r].step_pu * taps[r][p];
    return a;
  };

  // Initial voltages: flat start through regulator ratios, or the warm start.
  v[slack_] = to_eigen(source_v_);
  for (std::size_t k = 1; k < order_.size(); ++k) {
    const int b = order_[k];
    const Branch& br = branches_[buses_[b].parent];
    Eigen::Vector3cd x = v[br.from];
    if (br.kind == BranchKind::Regulator) x = ratio(br.device).cast<Complex>().cwiseProduct(x);
    if (br.kind == BranchKind::Transformer) x /= br.turns;
    for (Phase p : kAllPhases)
      if (!buses_[b].phases.has(p)) x(index(p)) = 0.0;
    v[b] = x;
  }
  if (warm_start && warm_start->voltage_v.size() == model.nodes.size() &&
      warm_start->regulator_output_v.size() == model.regulators.size()) {
    for (std::size_t b = 0; b < nb; ++b) {
      if (static_cast<int>(b) == slack_) continue;
      if (buses_[b].model_node >= 0) v[b] = to_eigen(warm_start->voltage_v[buses_[b].model_node]);
      if (buses_[b].regulator >= 0) v[b] = to_eigen(warm_start->regulator_output_v[buses_[b].regulator]);
    }
  }

  // Loads grouped by bus.
  std::vector<std::vector<const LoadEntry*>> loads_at(nb);
  for (const auto& e : loads.entries) loads_at[e.node].push_back(&e);

  PowerFlowSolution sol;
  std::vector<Eigen::Vector3cd> injection(nb), series(nb), input(nb);

  auto compute_injections = [&](std::vector<Eigen::Vector3cd>& out) {
    for (std::size_t b = 0; b < nb; ++b) {
      Eigen::Vector3cd i = shunt_[b] * v[b];
      for (const LoadEntry* e : loads_at[b]) {
        try {
          i += to_eigen(load_injection_current(*e, from_eigen(v[b]), buses_[b].base_ln, options_.collapse_floor_pu));
        } catch (const VoltageCollapse& ex) {
          throw VoltageCollapse("node '" + model.nodes[b].id + "': " + ex.what());
        }
      }
      out[b] = i;
    }
  };
  // Backward sweep: series[b] is the current entering bus b through its parent
  // branch; input[b] the same current referred to the branch's sending side.
  auto backward = [&]() {
    for (std::size_t k = order_.size(); k-- > 0;) {
      const int b = order_[k];
      Eigen::Vector3cd i = injection[b];
      for (int c : children_[b]) i += input[branches_[c].to];
      series[b] = i;
      if (b == slack_) break;
      const Branch& br = branches_[buses_[b].parent];
      if (br.kind == BranchKind::Regulator)
        input[b] = ratio(br.device).cast<Complex>().cwiseProduct(i);
      else if (br.kind == BranchKind::Transformer)
        input[b] = i / br.turns;
      else
        input[b] = i;
    }
  };

  bool converged = false;
  int it = 0;
  double mismatch = 0.0;
  try {
    for (it = 1; it <= options_.max_iterations; ++it) {
      compute_injections(injection);
      backward();
      mismatch = 0.0;
      for (std::size_t k = 1; k < order_.size(); ++k) {
        const int b = order_[k];
        const Branch& br = branches_[buses_[b].parent];
        Eigen::Vector3cd x;
        switch (br.kind) {
          case BranchKind::Regulator:
            x = ratio(br.device).cast<Complex>().cwiseProduct(v[br.from]);
            break;
          case BranchKind::Transformer:
            x = v[br.from] / br.turns - br.z * series[b];
            break;
          default:
            x = v[br.from] - br.z * series[b];
        }
        for (Phase p : kAllPhases) {
          const int q = index(p);
          if (!buses_[b].phases.has(p)) x(q) = 0.0;
          mismatch = std::max(mismatch, std::abs(x(q) - v[b](q)) / buses_[b].base_ln);
        }
        v[b] = x;
      }
      if (mismatch < options_.tolerance_pu) {
        converged = true;
        break;
      }
    }
    sol.status = converged ? SolveStatus::Converged : SolveStatus::MaxIterations;
    if (!converged) {
      it = options_.max_iterations;
      sol.diagnostic = "no convergence after " + std::to_string(it) + " sweeps, mismatch " + std::to_string(mismatch) + " pu";
    }
  } catch (const VoltageCollapse& ex) {
    sol.status = SolveStatus::VoltageCollapse;
    sol.diagnostic = ex.what();
  }
  sol.iterations = std::min(it, options_.max_iterations);
  sol.max_mismatch_pu = mismatch;

  // Results. Branch currents are those that produced the final voltages.
  const std::size_t nn = model.nodes.size();
  sol.voltage_v.resize(nn);
  sol.voltage_pu.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    sol.voltage_v[i] = from_eigen(v[i]);
    for (int p = 0; p < 3; ++p) sol.voltage_pu[i][p] = v[i](p) / buses_[i].base_ln;
  }
  sol.segment_current_a.assign(model.segments.size(), PhaseVector{});
  sol.transformer_current_a.assign(model.transformers.size(), PhaseVector{});
  sol.regulator_output_v.assign(model.regulators.size(), PhaseVector{});
  sol.regulator_current_a.assign(model.regulators.size(), PhaseVector{});
  for (std::size_t b = 0; b < nb; ++b) {
    if (buses_[b].parent < 0) continue;
    const Branch& br = branches_[buses_[b].parent];
    if (br.kind == BranchKind::Line) sol.segment_current_a[br.device] = from_eigen(series[b]);
    if (br.kind == BranchKind::Transformer) sol.transformer_current_a[br.device] = from_eigen(series[b]);
    if (br.kind == BranchKind::Regulator) {
      sol.regulator_output_v[br.device] = from_eigen(v[b]);
      sol.regulator_current_a[br.device] = from_eigen(series[b]);
    }
  }
  if (sol.status == SolveStatus::VoltageCollapse) return sol;

  const Eigen::Vector3cd head_current = series[slack_];
  for (int p = 0; p < 3; ++p) sol.head_kva[p] = v[slack_](p) * std::conj(head_current(p)) / 1000.0;
  sol.total_head_kva = sol.head_kva[0] + sol.head_kva[1] + sol.head_kva[2];

  double losses = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    if (buses_[b].parent < 0) continue;
    const Branch& br = branches_[buses_[b].parent];
    if (br.kind == BranchKind::Regulator) continue;
    losses += (series[b].adjoint() * br.z * series[b])(0).real();
  }
  sol.losses_kw = losses / 1000.0;

  // Injections at the final voltages give the load power and the KCL residual.
  std::vector<Eigen::Vector3cd> final_injection(nb);
  try {
    compute_injections(final_injection);
  } catch (const VoltageCollapse& ex) {
    sol.status = SolveStatus::VoltageCollapse;
    sol.diagnostic = ex.what();
    return sol;
  }
  double load_w = 0.0;
  double residual = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    for (int p = 0; p < 3; ++p) load_w += (v[b](p) * std::conj(final_injection[b](p))).real();
    Eigen::Vector3cd kcl = series[b] - final_injection[b];
    for (int c : children_[b]) kcl -= input[branches_[c].to];
    const double base_current = model.base_kva * 1000.0 / 3.0 / buses_[b].base_ln;
    residual = std::max(residual, kcl.cwiseAbs().maxCoeff() / base_current);
  }
  sol.load_kw = load_w / 1000.0;
  sol.kcl_residual_pu = residual;
  return sol;
}

PowerFlowSolution solve(const FeederModel& model, const LoadSet& loads, const TapSettings& taps,
                        SolverOptions options) {
  return PowerFlowSolver(model, options).solve(loads, taps);
}

std::array<double, 3> regulator_relay_voltage(const Regulator& r, const PowerFlowSolution& solution,
                                              std::size_t r_index) {
  std::array<double, 3> out{};
  for (int p = 0; p < 3; ++p) {
    const Complex z_ldc(r.r_ldc_v[p], r.x_ldc_v[p]);
    const Complex relay = solution.regulator_output_v[r_index][p] / r.pt_ratio -
                          z_ldc * solution.regulator_current_a[r_index][p] / r.ct_primary_a;
    out[p] = std::abs(relay);
  }
  return out;
}

TapControlResult regulator_taps(RegulatorMode mode, const PowerFlowSolver& solver, const LoadSet& loads,
                                TapSettings taps, PowerFlowSolution solution, TapControlOptions options) {
  TapControlResult result{std::move(taps), std::move(solution), 0, false};
  if (mode == RegulatorMode::Fixed) return result;
  const auto& regs = solver.model().regulators;

  while (result.solution.converged()) {
    bool changed = false;
    for (std::size_t r = 0; r < regs.size(); ++r) {
      const auto& reg = regs[r];
      const auto relay = regulator_relay_voltage(reg, result.solution, r);
      const double step_v = reg.step_pu * 120.0;
      const double low = reg.band_center_v - reg.bandwidth_v / 2.0;
      const double high = reg.band_center_v + reg.bandwidth_v / 2.0;
      for (Phase p : kAllPhases) {
        if (!reg.phases.has(p)) continue;
        int& tap = result.taps[r][index(p)];
        int delta = 0;
        if (relay[index(p)] < low) delta = static_cast<int>(std::ceil((low - relay[index(p)]) / step_v));
        if (relay[index(p)] > high) delta = -static_cast<int>(std::ceil((relay[index(p)] - high) / step_v));
        const int next = std::clamp(tap + delta, -kMaxTap, kMaxTap);
        if (next == tap) continue;
        result.operations += std::abs(next - tap);
        tap = next;
        changed = true;
      }
    }
    if (!changed) break;
    result.solution = solver.solve(loads, result.taps, &result.solution);
    if (result.operations > options.max_operations) {
      result.limit_exceeded = true;
      break;
    }
  }
  return result;
}

void write_solution_csv(const FeederModel& model, const PowerFlowSolution& solution,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "node,phase,magnitude_pu,angle_deg\n";
  char buf[128];
  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    for (Phase p : kAllPhases) {
      if (!model.nodes[i].phases.has(p)) continue;
      std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.4f\n", model.nodes[i].id.c_str(), phase_number(p),
                    solution.magnitude_pu(i, p), solution.angle_deg(i, p));
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<BenchmarkPoint> read_benchmark_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<BenchmarkPoint> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split(line);
    const std::string where = path.filename().string() + " row " + std::to_string(row);
    if (f.size() != 4) throw ParseError(where + ": expected 4 fields");
    out.push_back({PhaseRef{std::string(f[0]), phase_from_number(detail::parse_int(f[1], where))},
                   detail::parse_double(f[2], where), detail::parse_double(f[3], where)});
  }
  return out;
}

BenchmarkDeviation compare_to_benchmark(const FeederModel& model, const PowerFlowSolution& solution,
                                        const std::vector<BenchmarkPoint>& benchmark) {
  BenchmarkDeviation d;
  for (const auto& b : benchmark) {
    const auto i = model.node_index(b.at.node);
    if (!i || !model.nodes[*i].phases.has(b.at.phase))
      throw ContractViolation("benchmark point " + b.at.to_string() + " is not in the model");
    const double dm = std::abs(solution.magnitude_pu(*i, b.at.phase) - b.magnitude_pu);
    double da = std::abs(solution.angle_deg(*i, b.at.phase) - b.angle_deg);
    da = std::min(da, 360.0 - da);
    if (dm >= d.max_magnitude_pu) {
      d.max_magnitude_pu = dm;
      d.worst_magnitude_at = b.at;
    }
    if (da >= d.max_angle_deg) {
      d.max_angle_deg = da;
      d.worst_angle_at = b.at;
    }
    ++d.points;
  }
  return d;
}

}  // namespace pevgrid
