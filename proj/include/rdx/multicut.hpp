#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rdx/data.hpp"
#include "rdx/interval.hpp"
#include "rdx/regress.hpp"

namespace rdx {

/// Observable difference of outcome regressions across the two subpopulations:
/// mu_{0,low}(x) - mu_{0,high}(x) for x <= low, mu_{1,low}(x) - mu_{0,high}(x) on (low, high).
/// Throws PreconditionError for x >= high.
double estimate_gamma(const SeriesFitSet& fits, double x);

struct BiasOptions {
  std::size_t max_order = 2;      // p: suprema and anchors for s = 0..p
  std::size_t grid_size = 1000;   // scan points on [grid_lo, low]
  std::map<std::size_t, double> sup_override;  // user-imposed constant for B-bar^(s)
};

/// Estimated bias B(x) = mu_{0,low}(x) - mu_{0,high}(x) below the low cutoff, with
/// derivative suprema and anchor derivatives at the cutoff.
class BiasModel {
 public:
  BiasModel(SeriesFit untreated_low, SeriesFit untreated_high, double low,
            const BiasOptions& options);

  double value(double x) const { return derivative(x, 0); }
  double derivative(double x, std::size_t s) const;

  std::size_t max_order() const noexcept { return sup_.size() - 1; }
  double low() const noexcept { return low_; }
  double grid_lo() const noexcept { return grid_lo_; }
  std::size_t grid_size() const noexcept { return grid_size_; }

  /// B-bar^(s): max over the grid of |B^(s)|, or the user override.
  double sup(std::size_t s) const { return sup_.at(s); }
  /// Grid supremum before any override.
  double scanned_sup(std::size_t s) const { return scanned_.at(s); }
  double argsup(std::size_t s) const { return argsup_.at(s); }
  bool overridden(std::size_t s) const { return overridden_.at(s); }
  /// B^(s)(low) from the analytic derivatives of the two fits.
  double anchor(std::size_t s) const { return anchor_.at(s); }

  /// R^2 of a straight line through B on the scan grid (near one: bias looks linear).
  double linear_r2() const noexcept { return linear_r2_; }

 private:
  SeriesFit low_fit_;
  SeriesFit high_fit_;
  double low_ = 0.0;
  double grid_lo_ = 0.0;
  std::size_t grid_size_ = 0;
  std::vector<double> sup_, scanned_, argsup_, anchor_;
  std::vector<bool> overridden_;
  double linear_r2_ = 0.0;
};

/// Requires a two-cutoff design and max_order < J* of both untreated fits.
BiasModel build_bias_model(const SeriesFitSet& fits, const BiasOptions& options = {});

/// Bounds on B(x*) when |B^(s)| <= kappa * B-bar^(s) on (low, x*]:
/// sum_{j<s} B^(j)(low) d^j / j!  +/-  kappa * B-bar^(s) * d^s / s!,  d = x* - low.
Range taylor_envelope(const BiasModel& bias, double x_star, std::size_t s, double kappa);

IdentifiedInterval bounds_bam(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                              double kappa);
IdentifiedInterval bounds_brm(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                              double kappa);
IdentifiedInterval bounds_sd(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                             double kappa);
/// Intersection over s = 0..p of the order-s envelopes; kappas holds kappa_0..kappa_p.
IdentifiedInterval bounds_bpe(const SeriesFitSet& fits, const BiasModel& bias, double x_star,
                              std::span<const double> kappas);

/// Constant-bias point estimate gamma(x*) - B(low).
double point_estimate_constant_bias(const SeriesFitSet& fits, const BiasModel& bias, double x_star);

/// Outer region for the density-weighted average of pointwise bounds over [a, b].
/// xs must be increasing and span [a, b]; the density is restricted and renormalized.
IdentifiedInterval aggregate_bounds(std::span<const double> xs,
                                    std::span<const IdentifiedInterval> pointwise,
                                    const DensityEstimate& density);

}  // namespace rdx
