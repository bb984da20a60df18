#include "rdx/interval.hpp"

#include <sstream>

#include "rdx/errors.hpp"

namespace rdx {

IdentifiedInterval IdentifiedInterval::at_point(double lower, double upper, std::string restriction,
                                                std::vector<double> kappa, double x_star) {
  IdentifiedInterval out;
  out.lower = lower;
  out.upper = upper;
  out.restriction = std::move(restriction);
  out.kappa = std::move(kappa);
  out.x_star = x_star;
  return out;
}

bool IdentifiedInterval::subset_of(const IdentifiedInterval& other) const noexcept {
  if (empty) return true;
  if (other.empty) return false;
  return other.lower <= lower && upper <= other.upper;
}

IdentifiedInterval effect_from_bias(double gamma, const Range& bias, std::string restriction,
                                    std::vector<double> kappa, double x_star) {
  return IdentifiedInterval::at_point(gamma - bias.hi, gamma - bias.lo, std::move(restriction),
                                      std::move(kappa), x_star);
}

IdentifiedInterval bounds_intersect(std::span<const IdentifiedInterval> members) {
  if (members.empty()) throw PreconditionError("bounds_intersect needs at least one interval");
  const auto& first = members.front();
  IdentifiedInterval out;
  out.x_star = first.x_star;
  out.range = first.range;
  out.kappa = first.kappa;
  out.lower = first.lower;
  out.upper = first.upper;
  out.empty = first.empty;
  out.outer = first.outer;
  out.notes = first.notes;

  std::string names = first.restriction;
  std::size_t lower_from = 0, upper_from = 0;
  for (std::size_t i = 1; i < members.size(); ++i) {
    const auto& m = members[i];
    if (m.x_star != first.x_star || m.range != first.range) {
      throw PreconditionError("bounds_intersect: members target different points");
    }
    names += "," + m.restriction;
    out.notes.insert(out.notes.end(), m.notes.begin(), m.notes.end());
    out.empty = out.empty || m.empty;
    out.outer = out.outer || m.outer;
    if (m.lower > out.lower) {
      out.lower = m.lower;
      lower_from = i;
    }
    if (m.upper < out.upper) {
      out.upper = m.upper;
      upper_from = i;
    }
    if (m.kappa != out.kappa) out.kappa.clear();
  }
  out.restriction = members.size() == 1 ? first.restriction : "ib(" + names + ")";
  if (!out.empty && out.lower > out.upper) {
    out.empty = true;
    std::ostringstream msg;
    msg << "empty intersection: lower bound of member " << lower_from << " ("
        << members[lower_from].restriction << ") exceeds upper bound of member " << upper_from
        << " (" << members[upper_from].restriction << ")";
    out.notes.push_back(msg.str());
  }
  return out;
}

}  // namespace rdx
