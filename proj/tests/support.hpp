#pragma once

#include <cmath>
#include <complex>
#include <filesystem>

#include "pevgrid/feeder_model.hpp"
#include "pevgrid/powerflow.hpp"

namespace pevgrid::testing {

inline std::filesystem::path data_dir() { return PEVGRID_DATA_DIR; }
inline std::filesystem::path ieee34_path() { return data_dir() / "ieee34.json"; }
inline std::filesystem::path reference_config_path() { return data_dir() / "reference_scenario.json"; }

/// Single-phase source-line-load network in per unit on a 1000 kVA, 12.47 kV base.
struct TwoBus {
  static constexpr double kBaseKva = 1000.0;
  static constexpr double kKvLl = 12.47;

  static double base_ln_volts() { return kKvLl * 1000.0 / std::sqrt(3.0); }
  static double base_ohms() { return base_ln_volts() * base_ln_volts() / (kBaseKva * 1000.0); }

  /// Feeder "s" -> "r", phase A only, one mile long with series impedance `z_pu`.
  static FeederModel model(Complex z_pu, double source_pu = 1.0) {
    FeederModel m;
    m.name = "two-bus";
    m.base_kva = kBaseKva;
    m.source = {"s", source_pu, 0.0};
    m.nodes = {{"s", PhaseSet{Phase::A}, kKvLl}, {"r", PhaseSet{Phase::A}, kKvLl}};
    LineConfiguration c;
    c.id = "1ph";
    c.phasing = PhaseSet{Phase::A};
    c.z_ohm_per_mile(0, 0) = z_pu * base_ohms();
    m.configs = {c};
    m.segments = {{"s", "r", kFeetPerMile, "1ph"}};
    return m;
  }

  static LoadSet load(Complex s_pu) {
    LoadSet loads;
    PhaseVector s{};
    s[0] = s_pu * kBaseKva;
    loads.add({1, LoadConnection::Wye, LoadModel::ConstantPower, s});
    return loads;
  }

  /// Receiving-end voltage from the exact quadratic in |V_r|^2 with the
  /// sending end at `vs` (real), phase angle recovered from
  /// Vs conj(Vr) = |Vr|^2 + Z conj(S).
  static Complex closed_form(double vs, Complex z, Complex s) {
    const double b = vs * vs - 2.0 * (z.real() * s.real() + z.imag() * s.imag());
    const double disc = b * b - 4.0 * std::norm(z) * std::norm(s);
    const double vr2 = 0.5 * (b + std::sqrt(disc));
    return std::conj((vr2 + z * std::conj(s)) / vs);
  }
};

}  // namespace pevgrid::testing
