#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "rdx/data.hpp"

namespace rdx::sim {

/// Two-cutoff simulation design with cutoffs 33 and 66 on x in [0, 100].
/// The outcome constants are fixed; only the size and seed vary.
struct DgpSpec {
  std::size_t n = 2000;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr double kLow = 33.0;
inline constexpr double kHigh = 66.0;
inline constexpr double kScale = 100.0;

/// mt19937_64 stream. Uniforms take the top 53 bits, (r >> 11) * 2^-53; normals use
/// Marsaglia's polar method. Both are spelled out so a seed gives the same draws with
/// any standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// First n/2 rows face the low cutoff, the rest the high one. Each row draws
/// u ~ U[0, 1) and then one standard normal, in that order.
ObservationTable generate(const DgpSpec& spec);

namespace truth {

/// Conditional mean of Y(d) in subpopulation `subpop` (0 = low cutoff, 1 = high).
double mu(int treated, int subpop, double x);
/// mu(0, 0, x) - mu(0, 1, x)
double bias(double x);
/// Effect of treatment in the low subpopulation; constant.
double tau_low(double x);

}  // namespace truth

}  // namespace rdx::sim
