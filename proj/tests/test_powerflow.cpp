#include <gtest/gtest.h>

#include <chrono>
#include <limits>
#include <numbers>

#include "pevgrid/error.hpp"
#include "pevgrid/powerflow.hpp"
#include "support.hpp"

using namespace pevgrid;
using pevgrid::testing::TwoBus;

namespace {

const FeederModel& ieee34() {
  static const FeederModel m = load_feeder(pevgrid::testing::ieee34_path());
  return m;
}

double min_voltage(const FeederModel& m, const PowerFlowSolution& s) {
  double v = 10.0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    for (Phase p : kAllPhases)
      if (m.nodes[i].phases.has(p)) v = std::min(v, s.magnitude_pu(i, p));
  return v;
}

/// Single-phase feeder s -> r with a phase-A regulator at the sending end.
FeederModel regulated_line(double band_center_v) {
  FeederModel m = TwoBus::model({0.01, 0.02});
  Regulator r;
  r.id = "R";
  r.from = "s";
  r.to = "r";
  r.phases = PhaseSet{Phase::A};
  r.mode = RegulatorMode::Automatic;
  r.pt_ratio = TwoBus::base_ln_volts() / 120.0;
  r.band_center_v = band_center_v;
  r.bandwidth_v = 2.0;
  m.regulators.push_back(r);
  return m;
}

}  // namespace

TEST(PowerFlow, ZeroLoadNeutralTapsIsFlat) {
  // Without line charging and capacitors nothing draws current.
  FeederModel m = ieee34();
  for (auto& c : m.configs) c.y_us_per_mile.setZero();
  m.capacitors.clear();
  TapSettings taps(m.regulators.size(), {0, 0, 0});
  const auto sol = solve(m, LoadSet{}, taps);
  ASSERT_TRUE(sol.converged());
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    for (Phase p : kAllPhases)
      if (m.nodes[i].phases.has(p)) {
        EXPECT_NEAR(sol.magnitude_pu(i, p), m.source.voltage_pu, 1e-12) << m.nodes[i].id;
      }
  EXPECT_NEAR(sol.losses_kw, 0.0, 1e-12);
}

namespace {

double two_bus_worst_error(double tolerance_pu) {
  const Complex z{0.01, 0.02};
  const FeederModel m = TwoBus::model(z);
  SolverOptions opts;
  opts.tolerance_pu = tolerance_pu;
  const PowerFlowSolver solver(m, opts);
  const std::size_t r = *m.node_index("r");
  double worst = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const Complex s{0.1 + 0.1 * i, -0.3 + 0.1 * j};
      const auto sol = solver.solve(TwoBus::load(s), {});
      if (!sol.converged()) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(sol.voltage_pu[r][0] - TwoBus::closed_form(1.0, z, s)));
    }
  return worst;
}

}  // namespace

// The sweep stops once an iteration moves less than the tolerance, so the
// answer carries a residual of about that size; 1e-8 agreement needs a
// tighter stopping tolerance than the 1e-6 default.
TEST(PowerFlow, TwoBusMatchesClosedForm) { EXPECT_LT(two_bus_worst_error(1e-10), 1e-8); }

TEST(PowerFlow, TwoBusDefaultToleranceResidual) { EXPECT_LT(two_bus_worst_error(1e-6), 1e-6); }

TEST(PowerFlow, TwoBusNamedExample) {
  const Complex z{0.01, 0.02}, s{0.5, 0.1};
  const auto sol = solve(TwoBus::model(z), TwoBus::load(s), {});
  ASSERT_TRUE(sol.converged());
  EXPECT_NEAR(std::abs(sol.voltage_pu[1][0] - TwoBus::closed_form(1.0, z, s)), 0.0, 1e-8);
}

TEST(PowerFlow, LoadInjectionZero) {
  const LoadEntry e{0, LoadConnection::Wye, LoadModel::ConstantPower, {}};
  const PhaseVector v{Complex(7200.0, 0.0), std::polar(7200.0, -2.0 * std::numbers::pi / 3.0),
                      std::polar(7200.0, 2.0 * std::numbers::pi / 3.0)};
  const auto i = load_injection_current(e, v, 7200.0);
  for (const auto& x : i) EXPECT_EQ(x, Complex(0.0, 0.0));
}

TEST(PowerFlow, LoadInjectionUnityPowerFactor) {
  const double base = 14376.0;
  const LoadEntry e{0, LoadConnection::Wye, LoadModel::ConstantPower, {Complex(1000.0, 0.0), {}, {}}};
  const PhaseVector v{Complex(base, 0.0), {}, {}};
  const auto i = load_injection_current(e, v, base);
  EXPECT_NEAR(i[0].real(), 1e6 / base, 1e-9);
  EXPECT_NEAR(i[0].imag(), 0.0, 1e-12);
}

TEST(PowerFlow, ConstantImpedanceScalesWithVoltageSquared) {
  const double base = 14376.0;
  const LoadEntry e{0, LoadConnection::Wye, LoadModel::ConstantImpedance, {Complex(1000.0, 300.0), {}, {}}};
  const PhaseVector v{Complex(0.9 * base, 0.0), {}, {}};
  const auto i = load_injection_current(e, v, base);
  const Complex s = v[0] * std::conj(i[0]) / 1000.0;
  EXPECT_NEAR(s.real(), 0.81 * 1000.0, 1e-9);
  EXPECT_NEAR(s.imag(), 0.81 * 300.0, 1e-9);
}

TEST(PowerFlow, ConstantCurrentScalesWithVoltage) {
  const double base = 14376.0;
  const LoadEntry e{0, LoadConnection::Wye, LoadModel::ConstantCurrent, {Complex(1000.0, 0.0), {}, {}}};
  const PhaseVector v{Complex(0.9 * base, 0.0), {}, {}};
  const auto i = load_injection_current(e, v, base);
  EXPECT_NEAR((v[0] * std::conj(i[0])).real() / 1000.0, 900.0, 1e-9);
}

TEST(PowerFlow, LoadBelowCollapseFloorThrows) {
  const LoadEntry e{0, LoadConnection::Wye, LoadModel::ConstantPower, {Complex(10.0, 0.0), {}, {}}};
  EXPECT_THROW(load_injection_current(e, {Complex(0.4 * 7200.0, 0.0), {}, {}}, 7200.0), VoltageCollapse);
}

TEST(PowerFlow, HeavyLoadReportsCollapseNotAnswer) {
  const auto sol = solve(TwoBus::model({0.01, 0.02}), TwoBus::load({40.0, 10.0}), {});
  EXPECT_FALSE(sol.converged());
}

TEST(PowerFlow, IterationCapIsFlagged) {
  SolverOptions opts;
  opts.max_iterations = 2;
  const auto sol = solve(ieee34(), nominal_loads(ieee34()), configured_taps(ieee34()), opts);
  EXPECT_EQ(sol.status, SolveStatus::MaxIterations);
  EXPECT_FALSE(sol.converged());
}

TEST(PowerFlow, SingularTransformerNamed) {
  FeederModel m = ieee34();
  m.transformers[0].kva = 0.0;
  try {
    PowerFlowSolver solver(m);
    FAIL() << "expected PowerFlowError";
  } catch (const PowerFlowError& e) {
    EXPECT_NE(std::string(e.what()).find(m.transformers[0].id), std::string::npos) << e.what();
  }
}

TEST(PowerFlow, BenchmarkWithinPublishedTolerance) {
  const PowerFlowSolver solver(ieee34());
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = solver.solve(nominal_loads(ieee34()), configured_taps(ieee34()));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_TRUE(sol.converged());
  const auto d = compare_to_benchmark(ieee34(), sol,
                                      read_benchmark_csv(pevgrid::testing::data_dir() / "ieee34_benchmark.csv"));
  EXPECT_GT(d.points, 80u);
  EXPECT_LE(d.max_magnitude_pu, 1e-3) << d.worst_magnitude_at.to_string();
  EXPECT_LE(d.max_angle_deg, 0.05) << d.worst_angle_at.to_string();
  EXPECT_LT(seconds, 1.0);
}

TEST(PowerFlow, PowerBalanceAndNonnegativeLosses) {
  const PowerFlowSolver solver(ieee34());
  const auto nominal = nominal_loads(ieee34());
  for (double k : {0.25, 0.5, 1.0, 1.25}) {
    const auto sol = solver.solve(nominal.scaled(k), configured_taps(ieee34()));
    ASSERT_TRUE(sol.converged()) << k;
    EXPECT_GE(sol.losses_kw, 0.0);
    EXPECT_NEAR(sol.total_head_kva.real(), sol.load_kw + sol.losses_kw, 1e-3 * sol.total_head_kva.real()) << k;
    EXPECT_LT(sol.kcl_residual_pu, 1e-4);
  }
}

TEST(PowerFlow, MinimumVoltageMonotoneInLoad) {
  const PowerFlowSolver solver(ieee34());
  const auto nominal = nominal_loads(ieee34());
  double previous = 10.0;
  for (int step = 0; step <= 6; ++step) {
    const double k = 0.25 * step;
    const auto sol = solver.solve(nominal.scaled(k), configured_taps(ieee34()));
    ASSERT_TRUE(sol.converged()) << k;
    const double v = min_voltage(ieee34(), sol);
    EXPECT_LE(v, previous) << "k = " << k;
    previous = v;
  }
}

TEST(PowerFlow, SolveIsDeterministic) {
  const PowerFlowSolver solver(ieee34());
  const auto a = solver.solve(nominal_loads(ieee34()), configured_taps(ieee34()));
  const auto b = solver.solve(nominal_loads(ieee34()), configured_taps(ieee34()));
  ASSERT_EQ(a.voltage_v.size(), b.voltage_v.size());
  for (std::size_t i = 0; i < a.voltage_v.size(); ++i) EXPECT_TRUE(a.voltage_v[i] == b.voltage_v[i]);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(TapControl, FixedModeLeavesTapsUnchanged) {
  const PowerFlowSolver solver(ieee34());
  const auto loads = nominal_loads(ieee34()).scaled(1.3);
  const auto taps = configured_taps(ieee34());
  auto sol = solver.solve(loads, taps);
  const auto out = regulator_taps(RegulatorMode::Fixed, solver, loads, taps, sol);
  EXPECT_EQ(out.taps, taps);
  EXPECT_EQ(out.operations, 0);
}

TEST(TapControl, InsideBandNoChange) {
  const FeederModel probe = regulated_line(120.0);
  const auto loads = TwoBus::load({0.3, 0.1});
  const PowerFlowSolver probe_solver(probe);
  const auto relay = regulator_relay_voltage(probe.regulators[0], probe_solver.solve(loads, {{0, 0, 0}}), 0)[0];

  const FeederModel m = regulated_line(relay);
  const PowerFlowSolver solver(m);
  auto sol = solver.solve(loads, {{0, 0, 0}});
  const auto out = regulator_taps(RegulatorMode::Automatic, solver, loads, {{0, 0, 0}}, sol);
  EXPECT_EQ(out.taps[0][0], 0);
  EXPECT_EQ(out.operations, 0);
}

TEST(TapControl, OneStepLowRaisesOneTap) {
  const FeederModel probe = regulated_line(120.0);
  const auto loads = TwoBus::load({0.3, 0.1});
  const PowerFlowSolver probe_solver(probe);
  const auto relay = regulator_relay_voltage(probe.regulators[0], probe_solver.solve(loads, {{0, 0, 0}}), 0)[0];

  // Band low edge 0.5 V above the relay voltage: less than one 0.75 V step short.
  const FeederModel m = regulated_line(relay + 1.0 + 0.5);
  const PowerFlowSolver solver(m);
  auto sol = solver.solve(loads, {{0, 0, 0}});
  const auto out = regulator_taps(RegulatorMode::Automatic, solver, loads, {{0, 0, 0}}, sol);
  EXPECT_EQ(out.taps[0][0], 1);
  EXPECT_EQ(out.operations, 1);
  EXPECT_FALSE(out.limit_exceeded);
}

TEST(TapControl, OperationCapIsFlagged) {
  const FeederModel m = regulated_line(150.0);
  const auto loads = TwoBus::load({0.3, 0.1});
  const PowerFlowSolver solver(m);
  auto sol = solver.solve(loads, {{0, 0, 0}});
  TapControlOptions opts;
  opts.max_operations = 4;
  const auto out = regulator_taps(RegulatorMode::Automatic, solver, loads, {{0, 0, 0}}, sol, opts);
  EXPECT_TRUE(out.limit_exceeded);
  // The returned solution belongs to the returned taps.
  const auto check = solver.solve(loads, out.taps);
  EXPECT_NEAR(std::abs(check.voltage_pu[1][0] - out.solution.voltage_pu[1][0]), 0.0, 1e-6);
}
