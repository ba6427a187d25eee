#include <gtest/gtest.h>

#include <sstream>

#include "pevgrid/error.hpp"
#include "pevgrid/pev_agent.hpp"

using namespace pevgrid;

namespace {

ChargingSession session(double arrival_soc, double target_soc = 1.0) {
  ChargingSession s;
  s.location = PhaseRef::parse("856.2");
  s.park_start = 1000.0;
  s.park_end = 1900.0;
  s.arrival_soc = arrival_soc;
  s.target_soc = target_soc;
  return s;
}

std::vector<Placement> reference_placement() {
  std::vector<Placement> p;
  for (const char* id : {"810.2", "826.2", "856.2", "838.2"}) p.push_back({PhaseRef::parse(id), 50});
  return p;
}

}  // namespace

TEST(ChargePower, ZeroAtTarget) {
  const auto s = session(1.0);
  EXPECT_EQ(charge_power(PevState(s), 6.6), 0.0);
}

TEST(ChargePower, ConstantBelowTaper) {
  const auto s = session(0.5);
  EXPECT_DOUBLE_EQ(charge_power(PevState(s), 6.6), 6.6);
  EXPECT_DOUBLE_EQ(charge_power(PevState(s), 4.62), 4.62);
  EXPECT_DOUBLE_EQ(charge_power(PevState(s), 9.0), 6.6);
}

TEST(ChargePower, HalfwayThroughTaper) {
  const auto s = session(0.975);
  EXPECT_NEAR(charge_power(PevState(s), 6.6), 3.3, 1e-12);
}

TEST(ChargePower, NeverAboveLimitOrRatedNorNegative) {
  for (double soc = 0.0; soc <= 1.0; soc += 0.0125)
    for (double limit : {0.0, 1.0, 4.62, 6.6, 10.0}) {
      const auto s = session(soc);
      const double p = charge_power(PevState(s), limit);
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, std::min(limit, s.charger_kva) + 1e-12);
    }
}

TEST(TimeToFull, ZeroWhenAlreadyAtTarget) { EXPECT_EQ(time_to_full(session(0.8, 0.8), 6.6), 0.0); }

TEST(TimeToFull, ConstantPowerRegion) {
  // 0.65 * 50 kWh at 6.6 kW.
  EXPECT_NEAR(time_to_full(session(0.30, 0.95), 6.6), 0.65 * 50.0 / 6.6 * 60.0, 1e-9);
  EXPECT_NEAR(time_to_full(session(0.30, 0.95), 6.6), 295.4545, 1e-4);
}

TEST(TimeToFull, RejectsNonPositiveLimit) { EXPECT_THROW(time_to_full(session(0.3), 0.0), ContractViolation); }

TEST(TimeToFull, MonotoneInLimit) {
  for (double soc : {0.1, 0.5, 0.96}) {
    double previous = std::numeric_limits<double>::infinity();
    for (double limit = 0.5; limit <= 8.0; limit += 0.5) {
      const double t = time_to_full(session(soc), limit);
      EXPECT_LE(t, previous + 1e-9);
      previous = t;
    }
  }
}

TEST(TimeToFull, AgreesWithSteppingWithinOneStep) {
  for (double soc : {0.2, 0.6, 0.94, 0.97})
    for (double limit : {6.6, 4.62, 2.0}) {
      const auto s = session(soc);
      PevState st(s);
      int minutes = 0;
      while (!st.full() && minutes < 10000) {
        charge_step(st, step_power(st, limit, 1.0), 1.0);
        ++minutes;
      }
      EXPECT_NEAR(minutes, time_to_full(s, limit), 1.0) << soc << " " << limit;
    }
}

TEST(ChargeStep, EnergyAccountingExact) {
  for (double eta : {1.0, 0.9}) {
    ChargerModel charger;
    charger.efficiency = eta;
    const auto s = session(0.3);
    PevState st(s);
    for (int minute = 0; minute < 600; ++minute) {
      charge_step(st, step_power(st, 6.6, 1.0, charger), 1.0, charger);
      EXPECT_NEAR(st.energy_kwh, (st.soc - s.arrival_soc) * s.battery_kwh / eta, 1e-9);
      EXPECT_LE(st.soc, s.target_soc);
    }
    EXPECT_TRUE(st.full());
  }
}

TEST(Sampling, ZeroCountsGiveNoSessions) {
  std::vector<Placement> p{{PhaseRef::parse("856.2"), 0}, {PhaseRef::parse("810.2"), 0}};
  EXPECT_TRUE(sample_sessions(BehaviorConfig{}, p, 7).empty());
}

TEST(Sampling, FourNodesOfFiftyGiveTwoHundredPerDayOnPhaseB) {
  const auto one_day = sample_sessions(BehaviorConfig{}, reference_placement(), 7, 1);
  EXPECT_EQ(one_day.size(), 200u);
  for (const auto& s : one_day) EXPECT_EQ(s.location.phase, Phase::B);
  const auto two_days = sample_sessions(BehaviorConfig{}, reference_placement(), 7);
  EXPECT_EQ(two_days.size(), 400u);
  for (const auto& s : two_days) EXPECT_NO_THROW(check_session(s));
}

TEST(Sampling, SameSeedIdenticalDifferentSeedNot) {
  const auto a = sample_sessions(BehaviorConfig{}, reference_placement(), 42);
  const auto b = sample_sessions(BehaviorConfig{}, reference_placement(), 42);
  const auto c = sample_sessions(BehaviorConfig{}, reference_placement(), 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Sampling, SamplesRespectSupports) {
  BehaviorConfig cfg;
  for (const auto& s : sample_sessions(cfg, reference_placement(), 3)) {
    const double day = s.park_start >= 1440.0 ? 1440.0 : 0.0;
    EXPECT_GE(s.park_start - day, cfg.arrival.support_min());
    EXPECT_LE(s.park_start - day, cfg.arrival.support_max());
    EXPECT_GE(s.arrival_soc, 0.2);
    EXPECT_LE(s.arrival_soc, 0.8);
  }
}

TEST(Sampling, EmptySupportIsConfigError) {
  EXPECT_THROW(Distribution::truncated_normal(100.0, 10.0, 50.0, 40.0).check("arrival"), ConfigError);
  BehaviorConfig cfg;
  cfg.arrival_soc = Distribution::uniform(0.9, 1.2);
  EXPECT_THROW(cfg.check(), ConfigError);
}

TEST(Sessions, CsvRoundTrip) {
  const auto a = sample_sessions(BehaviorConfig{}, reference_placement(), 11);
  std::stringstream buf;
  write_sessions_csv(a, buf);
  EXPECT_EQ(read_sessions_csv(buf), a);
}

TEST(Sessions, InvariantViolationNamed) {
  auto s = session(0.5);
  s.park_end = s.park_start - 1.0;
  EXPECT_THROW(check_session(s), ContractViolation);
  s = session(0.9, 0.5);
  EXPECT_THROW(check_session(s), ContractViolation);
}

TEST(Random, SubstreamsAreStableAndDistinct) {
  EXPECT_EQ(substream_seed(1, "sessions"), substream_seed(1, "sessions"));
  EXPECT_NE(substream_seed(1, "sessions"), substream_seed(1, "scheduling"));
  EXPECT_NE(substream_seed(1, "sessions"), substream_seed(2, "sessions"));
  RandomStream r(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform_open();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}
