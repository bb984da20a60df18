#include "rdx/simgen.hpp"

#include <cmath>

#include "rdx/errors.hpp"

namespace rdx::sim {

namespace {

struct Coefficients {
  double level, cubic, linear, effect;
};

constexpr Coefficients kCoef[2] = {{10.0, 18.0, 0.6, 5.0}, {20.0, 20.0, 0.6, 3.0}};

double mean_unscaled(int treated, int subpop, double x) {
  const auto& k = kCoef[subpop];
  const double t = x / kScale - 0.5;
  return k.level + k.cubic * t * t * t + k.linear * t + (treated ? k.effect : 0.0);
}

}  // namespace

void DgpSpec::validate() const {
  if (n < 2) throw PreconditionError("simulation needs n >= 2");
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

ObservationTable generate(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<double> y(spec.n), x(spec.n), c(spec.n);
  const std::size_t half = spec.n / 2;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int subpop = i < half ? 0 : 1;
    c[i] = subpop == 0 ? kLow : kHigh;
    x[i] = kScale * rng.uniform();
    const int d = x[i] >= c[i] ? 1 : 0;
    y[i] = kScale * (mean_unscaled(d, subpop, x[i]) + rng.normal());
  }
  return ObservationTable(std::move(y), std::move(x), std::move(c));
}

namespace truth {

double mu(int treated, int subpop, double x) {
  if (subpop != 0 && subpop != 1) throw PreconditionError("subpop must be 0 or 1");
  return kScale * mean_unscaled(treated, subpop, x);
}

double bias(double x) { return mu(0, 0, x) - mu(0, 1, x); }

double tau_low(double) { return kScale * kCoef[0].effect; }

}  // namespace truth

}  // namespace rdx::sim
