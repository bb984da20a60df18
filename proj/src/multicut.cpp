#include "rdx/multicut.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rdx/errors.hpp"

namespace rdx {

namespace {

double factorial(std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

void require_multi(const SeriesFitSet& fits) {
  if (!fits.design.multi()) throw PreconditionError("operation requires a two-cutoff design");
}

void check_target(const SeriesFitSet& fits, double x_star) {
  require_multi(fits);
  if (!(x_star > fits.design.low && x_star < fits.design.high)) {
    std::ostringstream msg;
    msg << "x* = " << x_star << " must lie in (" << fits.design.low << ", " << fits.design.high
        << ")";
    throw PreconditionError(msg.str());
  }
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw PreconditionError("kappa must be finite and >= 0");
}

IdentifiedInterval from_envelope(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                                 std::size_t s, double kappa, std::string name) {
  check_target(fits, x_star);
  check_kappa(kappa);
  auto out = effect_from_bias(estimate_gamma(fits, x_star), taylor_envelope(bias, x_star, s, kappa),
                              std::move(name), {kappa}, x_star);
  const auto& high = fits.at(kHighUntreated);
  if (!high.in_fit_region(x_star)) {
    out.notes.push_back("x* is outside the observed support of high:untreated; its fit extrapolates");
  }
  return out;
}

}  // namespace

double estimate_gamma(const SeriesFitSet& fits, double x) {
  require_multi(fits);
  const auto& design = fits.design;
  if (x >= design.high) {
    std::ostringstream msg;
    msg << "gamma(x) is only used below the high cutoff; x = " << x << " >= " << design.high;
    throw PreconditionError(msg.str());
  }
  const auto& low_side = x <= design.low ? fits.at(kLowUntreated) : fits.at(kLowTreated);
  return low_side.predict(x) - fits.at(kHighUntreated).predict(x);
}

BiasModel::BiasModel(SeriesFit untreated_low, SeriesFit untreated_high, double low,
                     const BiasOptions& options)
    : low_fit_(std::move(untreated_low)),
      high_fit_(std::move(untreated_high)),
      low_(low),
      grid_size_(options.grid_size) {
  const std::size_t p = options.max_order;
  if (p >= low_fit_.order() || p >= high_fit_.order()) {
    throw PreconditionError("bias derivative order p = " + std::to_string(p) +
                            " needs p < J* of both untreated fits (J* = " +
                            std::to_string(low_fit_.order()) + ", " +
                            std::to_string(high_fit_.order()) + ")");
  }
  if (grid_size_ < 2) throw PreconditionError("bias grid needs at least 2 points");
  grid_lo_ = std::max(low_fit_.x_lo(), high_fit_.x_lo());
  if (!(grid_lo_ < low_)) {
    throw InsufficientDataError("untreated", "no common untreated support below the low cutoff");
  }

  std::vector<double> grid(grid_size_);
  const double step = (low_ - grid_lo_) / static_cast<double>(grid_size_ - 1);
  for (std::size_t i = 0; i < grid_size_; ++i) grid[i] = grid_lo_ + step * static_cast<double>(i);
  grid.back() = low_;

  sup_.assign(p + 1, 0.0);
  scanned_.assign(p + 1, 0.0);
  argsup_.assign(p + 1, grid_lo_);
  anchor_.assign(p + 1, 0.0);
  overridden_.assign(p + 1, false);
  for (std::size_t s = 0; s <= p; ++s) {
    for (double g : grid) {
      const double v = std::abs(derivative(g, s));
      if (v > scanned_[s]) {
        scanned_[s] = v;
        argsup_[s] = g;
      }
    }
    anchor_[s] = derivative(low_, s);
    sup_[s] = scanned_[s];
  }
  for (const auto& [s, value] : options.sup_override) {
    if (s > p) throw PreconditionError("B-bar override for order " + std::to_string(s) + " > p");
    if (!(value >= 0.0)) throw PreconditionError("B-bar override must be >= 0");
    sup_[s] = value;
    overridden_[s] = true;
  }

  double mx = 0.0, mb = 0.0;
  for (double g : grid) {
    mx += g;
    mb += value(g);
  }
  mx /= static_cast<double>(grid.size());
  mb /= static_cast<double>(grid.size());
  double sxx = 0.0, sxb = 0.0, sbb = 0.0;
  for (double g : grid) {
    const double b = value(g) - mb;
    sxx += (g - mx) * (g - mx);
    sxb += (g - mx) * b;
    sbb += b * b;
  }
  linear_r2_ = sbb > 0.0 ? (sxb * sxb) / (sxx * sbb) : 1.0;
}

double BiasModel::derivative(double x, std::size_t s) const {
  return low_fit_.derivative(x, s) - high_fit_.derivative(x, s);
}

BiasModel build_bias_model(const SeriesFitSet& fits, const BiasOptions& options) {
  require_multi(fits);
  return BiasModel(fits.at(kLowUntreated), fits.at(kHighUntreated), fits.design.low, options);
}

Range taylor_envelope(const BiasModel& bias, double x_star, std::size_t s, double kappa) {
  check_kappa(kappa);
  if (!(x_star > bias.low())) throw PreconditionError("taylor_envelope needs x* above the low cutoff");
  if (s > bias.max_order()) {
    throw PreconditionError("taylor_envelope order " + std::to_string(s) +
                            " exceeds the bias model's p = " + std::to_string(bias.max_order()));
  }
  const double d = x_star - bias.low();
  double center = 0.0;
  for (std::size_t j = 0; j < s; ++j) {
    center += bias.anchor(j) * std::pow(d, static_cast<double>(j)) / factorial(j);
  }
  const double half = kappa * bias.sup(s) * std::pow(d, static_cast<double>(s)) / factorial(s);
  return {center - half, center + half};
}

IdentifiedInterval bounds_bam(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                              double kappa) {
  return from_envelope(fits, bias, x_star, 0, kappa, "bam");
}

IdentifiedInterval bounds_brm(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                              double kappa) {
  return from_envelope(fits, bias, x_star, 1, kappa, "brm");
}

IdentifiedInterval bounds_sd(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                             double kappa) {
  return from_envelope(fits, bias, x_star, 2, kappa, "sd");
}

IdentifiedInterval bounds_bpe(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                              std::span<const double> kappas) {
  if (kappas.empty()) throw PreconditionError("bpe needs kappa_0..kappa_p (p + 1 values)");
  std::vector<IdentifiedInterval> orders;
  for (std::size_t s = 0; s < kappas.size(); ++s) {
    orders.push_back(
        from_envelope(fits, bias, x_star, s, kappas[s], "order " + std::to_string(s)));
  }
  auto out = bounds_intersect(orders);
  out.restriction = "bpe";
  out.kappa.assign(kappas.begin(), kappas.end());
  return out;
}

double point_estimate_constant_bias(const SeriesFitSet& fits, const BiasModel& bias, double x_star) {
  check_target(fits, x_star);
  return estimate_gamma(fits, x_star) - bias.anchor(0);
}

IdentifiedInterval aggregate_bounds(std::span<const double> xs,
                                    std::span<const IdentifiedInterval> pointwise,
                                    const DensityEstimate& density) {
  if (xs.empty() || xs.size() != pointwise.size()) {
    throw PreconditionError("aggregate_bounds: need one pointwise interval per grid point");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] < xs[i - 1]) throw PreconditionError("aggregate_bounds: grid must be increasing");
  }
  IdentifiedInterval out;
  out.restriction = pointwise.front().restriction;
  out.kappa = pointwise.front().kappa;
  out.range = std::make_pair(xs.front(), xs.back());
  out.outer = true;
  for (const auto& iv : pointwise) {
    if (iv.empty) {
      out.empty = true;
      out.notes.push_back("a pointwise identified set on the averaging grid is empty");
      return out;
    }
  }
  if (xs.front() == xs.back()) {
    out.lower = pointwise.front().lower;
    out.upper = pointwise.front().upper;
    return out;
  }
  std::vector<double> f(xs.size()), fl(xs.size()), fu(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    f[i] = density(xs[i]);
    fl[i] = f[i] * pointwise[i].lower;
    fu[i] = f[i] * pointwise[i].upper;
  }
  const double mass = trapezoid(xs, f);
  if (!(mass > 0.0)) throw PreconditionError("aggregate_bounds: density has no mass on [a, b]");
  out.lower = trapezoid(xs, fl) / mass;
  out.upper = trapezoid(xs, fu) / mass;
  return out;
}

}  // namespace rdx
