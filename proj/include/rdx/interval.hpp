#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rdx {

/// Closed interval [lo, hi] on an unobserved quantity (a bias value or mu_0(x*)).
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Identified set for the treatment effect: [lower, upper] or the empty set.
struct IdentifiedInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool empty = false;

  std::string restriction;
  std::vector<double> kappa;
  std::optional<double> x_star;
  std::optional<std::pair<double, double>> range;  // averaged targets
  bool outer = false;                              // superset of the sharp set
  std::vector<std::string> notes;

  static IdentifiedInterval at_point(double lower, double upper, std::string restriction,
                                     std::vector<double> kappa, double x_star);

  double width() const noexcept { return empty ? 0.0 : upper - lower; }
  bool contains(double v) const noexcept { return !empty && lower <= v && v <= upper; }
  /// Empty sets are subsets of everything.
  bool subset_of(const IdentifiedInterval& other) const noexcept;
};

/// theta = gamma - B: maps an interval on the bias into an interval on the effect.
IdentifiedInterval effect_from_bias(double gamma, const Range& bias, std::string restriction,
                                    std::vector<double> kappa, double x_star);

/// [max of lowers, min of uppers]; empty when they cross. All members must share x*.
IdentifiedInterval bounds_intersect(std::span<const IdentifiedInterval> members);

}  // namespace rdx
