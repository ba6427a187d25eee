#include <gtest/gtest.h>

#include <cmath>

#include "pevgrid/charge_control.hpp"
#include "pevgrid/error.hpp"

using namespace pevgrid;

namespace {

ChargingSession parked(const char* where, double start, double end, double soc = 0.5) {
  ChargingSession s;
  s.location = PhaseRef::parse(where);
  s.park_start = start;
  s.park_end = end;
  s.arrival_soc = soc;
  return s;
}

}  // namespace

TEST(QAvailable, Envelope) {
  EXPECT_EQ(q_available(6.6, 6.6), 0.0);
  EXPECT_DOUBLE_EQ(q_available(6.6, 0.0), 6.6);
  // sqrt(1 - 0.7^2) = 0.71414...
  const double q = q_available(6.6, 0.7 * 6.6);
  EXPECT_NEAR(q, 4.713, 5e-4);
  EXPECT_NEAR(q / 6.6, 0.714, 5e-4);
  EXPECT_THROW(q_available(6.6, 6.7), ContractViolation);
  EXPECT_THROW(q_available(6.6, -0.1), ContractViolation);
}

TEST(VoltVar, DeadbandGivesZero) {
  const VoltVarCurve curve;
  for (double v : {0.98, 0.99, 1.0, 1.01, 1.02}) EXPECT_EQ(volt_var_setpoint(curve, v, 4.713), 0.0);
}

TEST(VoltVar, LowSaturation) {
  const double qa = q_available(6.6, 4.62);
  EXPECT_DOUBLE_EQ(volt_var_setpoint(VoltVarCurve{}, 0.92, qa), -qa);
  EXPECT_DOUBLE_EQ(volt_var_setpoint(VoltVarCurve{}, 0.85, qa), -qa);
  EXPECT_DOUBLE_EQ(volt_var_setpoint(VoltVarCurve{}, 1.2, qa), qa);
}

TEST(VoltVar, HalfwayDownTheLowSlope) {
  // 0.95 is halfway between 0.98 (0) and 0.92 (-1).
  const double qa = q_available(6.6, 4.62);
  EXPECT_NEAR(volt_var_setpoint(VoltVarCurve{}, 0.95, qa), -0.5 * qa, 1e-12);
  EXPECT_NEAR(volt_var_setpoint(VoltVarCurve{}, 0.95, qa), -2.357, 5e-4);
}

TEST(VoltVar, NonDecreasingForValidCurves) {
  RandomStream rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VoltVarCurve::Point> pts;
    double v = 0.85, q = -1.0;
    const int n = 2 + static_cast<int>(rng.uniform() * 5);
    for (int i = 0; i < n; ++i) {
      v += 0.005 + 0.05 * rng.uniform();
      q = std::min(1.0, q + 0.5 * rng.uniform());
      pts.push_back({v, q});
    }
    const VoltVarCurve curve(pts);
    double previous = -2.0;
    for (double x = 0.8; x <= 1.3; x += 0.001) {
      const double y = curve.normalized(x);
      EXPECT_GE(y, previous - 1e-15);
      previous = y;
    }
  }
}

TEST(VoltVar, InvalidCurvesRejected) {
  EXPECT_THROW(VoltVarCurve({{1.0, 0.0}}), ConfigError);
  EXPECT_THROW(VoltVarCurve({{1.0, 0.0}, {0.9, 1.0}}), ConfigError);
  EXPECT_THROW(VoltVarCurve({{0.9, 0.5}, {1.0, -0.5}}), ConfigError);
  EXPECT_THROW(VoltVarCurve({{0.9, -2.0}, {1.0, 0.0}}), ConfigError);
}

TEST(Scheduler, ExactDwellStartsAtParkStart) {
  RandomStream rng(1);
  const auto s = parked("856.2", 100.0, 400.0);
  EXPECT_EQ(schedule_energy_shift(s, 300.0, rng), 100.0);
}

TEST(Scheduler, ShortDwellStartsAtParkStart) {
  RandomStream rng(1);
  const auto s = parked("856.2", 100.0, 200.0);
  EXPECT_EQ(schedule_energy_shift(s, 300.0, rng), 100.0);
}

TEST(Scheduler, StartsWithinWindowAndCenteredOnAverage) {
  RandomStream rng(2024);
  const auto s = parked("856.2", 1100.0, 1900.0);
  const double t_charge = 240.0;
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double start = schedule_energy_shift(s, t_charge, rng);
    EXPECT_GE(start, s.park_start);
    EXPECT_LE(start, s.park_end - t_charge);
    sum += start;
  }
  const double midpoint = 0.5 * (s.park_start + s.park_end - t_charge);
  EXPECT_NEAR(sum / n, midpoint, 10.0);
}

class Setpoints : public ::testing::Test {
 protected:
  std::vector<ChargingSession> sessions{parked("856.2", 0.0, 600.0), parked("810.2", 0.0, 600.0),
                                        parked("838.2", 0.0, 600.0, 1.0), parked("826.2", 300.0, 600.0)};
  std::vector<PevState> pevs() const {
    std::vector<PevState> out;
    for (const auto& s : sessions) out.emplace_back(s);
    return out;
  }
  VoltageMap voltages(double v) const {
    VoltageMap m;
    for (const auto& s : sessions) m[s.location] = v;
    return m;
  }
};

TEST_F(Setpoints, UncontrolledFullRatedNoQ) {
  const auto sp = control_setpoints(pevs(), voltages(0.9), ControlConfig{}, 100.0);
  EXPECT_EQ(sp[0], (Setpoint{6.6, 0.0}));
  EXPECT_EQ(sp[1], (Setpoint{6.6, 0.0}));
  EXPECT_EQ(sp[2].p_limit_kw, 0.0);  // full
  EXPECT_EQ(sp[3].p_limit_kw, 0.0);  // not yet parked
}

TEST_F(Setpoints, ReactiveSupportLimitsRealPower) {
  ControlConfig cfg;
  cfg.reactive_support = true;
  const auto sp = control_setpoints(pevs(), voltages(0.9), cfg, 100.0);
  EXPECT_NEAR(sp[0].p_limit_kw, 4.62, 1e-12);
  EXPECT_NEAR(sp[1].p_limit_kw, 4.62, 1e-12);
  for (const auto& s : sp) EXPECT_LE(std::hypot(s.p_limit_kw, s.q_kvar), 6.6 + 1e-9);
}

TEST_F(Setpoints, DeadbandMeansNoQ) {
  for (bool es : {false, true})
    for (bool parked_q : {false, true}) {
      ControlConfig cfg;
      cfg.energy_shift = es;
      cfg.reactive_support = true;
      cfg.q_while_parked = parked_q;
      for (const auto& s : control_setpoints(pevs(), voltages(1.0), cfg, 100.0)) EXPECT_EQ(s.q_kvar, 0.0);
    }
}

TEST_F(Setpoints, EnvelopeHoldsAcrossVoltages) {
  ControlConfig cfg;
  cfg.reactive_support = true;
  cfg.q_while_parked = true;
  for (double v = 0.85; v <= 1.15; v += 0.005)
    for (const auto& s : control_setpoints(pevs(), voltages(v), cfg, 400.0))
      EXPECT_LE(std::hypot(s.p_limit_kw, s.q_kvar), 6.6 + 1e-9);
}

TEST_F(Setpoints, MissingVoltageNamesLocation) {
  ControlConfig cfg;
  cfg.reactive_support = true;
  auto v = voltages(0.95);
  v.erase(PhaseRef::parse("810.2"));
  try {
    control_setpoints(pevs(), v, cfg, 100.0);
    FAIL() << "expected ContractViolation";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("810.2"), std::string::npos) << e.what();
  }
}

TEST_F(Setpoints, DependOnlyOnOwnNodeVoltage) {
  ControlConfig cfg;
  cfg.reactive_support = true;
  const auto base = control_setpoints(pevs(), voltages(0.95), cfg, 100.0);
  auto v = voltages(0.95);
  v[PhaseRef::parse("810.2")] = 0.91;
  const auto perturbed = control_setpoints(pevs(), v, cfg, 100.0);
  EXPECT_EQ(perturbed[0], base[0]);
  EXPECT_NE(perturbed[1], base[1]);
  EXPECT_EQ(perturbed[2], base[2]);
  EXPECT_EQ(perturbed[3], base[3]);
}
