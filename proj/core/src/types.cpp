#include "pevgrid/types.hpp"

#include <charconv>

#include "pevgrid/error.hpp"

namespace pevgrid {

Phase phase_from_number(int n) {
  if (n < 1 || n > 3) throw ParseError("phase number must be 1, 2 or 3, got " + std::to_string(n));
  return static_cast<Phase>(n - 1);
}

PhaseSet PhaseSet::parse(std::string_view letters) {
  PhaseSet set;
  for (char c : letters) {
    Phase p;
    switch (c) {
      case 'A': case 'a': p = Phase::A; break;
      case 'B': case 'b': p = Phase::B; break;
      case 'C': case 'c': p = Phase::C; break;
      default: throw ParseError("invalid phase letter '" + std::string(1, c) + "' in \"" + std::string(letters) + "\"");
    }
    if (set.has(p)) throw ParseError("duplicate phase in \"" + std::string(letters) + "\"");
    set.insert(p);
  }
  return set;
}

std::string PhaseSet::to_string() const {
  std::string s;
  for (Phase p : kAllPhases)
    if (has(p)) s += phase_letter(p);
  return s;
}

PhaseRef PhaseRef::parse(std::string_view text) {
  auto dot = text.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 >= text.size())
    throw ParseError("expected node.phase, got \"" + std::string(text) + "\"");
  int n = 0;
  auto digits = text.substr(dot + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc{} || ptr != digits.data() + digits.size())
    throw ParseError("expected node.phase, got \"" + std::string(text) + "\"");
  return PhaseRef{std::string(text.substr(0, dot)), phase_from_number(n)};
}

std::string PhaseRef::to_string() const { return node + "." + std::to_string(phase_number(phase)); }

}  // namespace pevgrid
