#pragma once

#include <array>
#include <complex>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace pevgrid {

using Complex = std::complex<double>;
using PhaseVector = std::array<Complex, 3>;

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::A, Phase::B, Phase::C};

constexpr int index(Phase p) { return static_cast<int>(p); }
/// 1-based number used in "node.phase" notation.
constexpr int phase_number(Phase p) { return static_cast<int>(p) + 1; }
constexpr char phase_letter(Phase p) { return "ABC"[static_cast<int>(p)]; }

/// Throws ParseError unless n is 1, 2 or 3.
Phase phase_from_number(int n);

class PhaseSet {
 public:
  constexpr PhaseSet() = default;
  constexpr PhaseSet(std::initializer_list<Phase> phases) {
    for (Phase p : phases) insert(p);
  }

  /// Parses letters such as "ABC" or "B"; order-insensitive, duplicates rejected.
  static PhaseSet parse(std::string_view letters);

  constexpr bool has(Phase p) const { return (bits_ >> index(p)) & 1U; }
  constexpr void insert(Phase p) { bits_ |= static_cast<std::uint8_t>(1U << index(p)); }
  constexpr int count() const { return (bits_ & 1U) + ((bits_ >> 1) & 1U) + ((bits_ >> 2) & 1U); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool subset_of(PhaseSet other) const { return (bits_ & ~other.bits_) == 0; }
  std::string to_string() const;

  constexpr bool operator==(const PhaseSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr PhaseSet kThreePhase{Phase::A, Phase::B, Phase::C};

/// One phase of one node, written "856.2" for node 856 phase B.
struct PhaseRef {
  std::string node;
  Phase phase = Phase::A;

  static PhaseRef parse(std::string_view text);
  std::string to_string() const;

  auto operator<=>(const PhaseRef&) const = default;
};

}  // namespace pevgrid
