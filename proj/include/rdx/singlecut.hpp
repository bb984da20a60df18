#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdx/data.hpp"
#include "rdx/interval.hpp"
#include "rdx/regress.hpp"

namespace rdx {

// Single-cutoff restrictions act on subpopulation 0: the whole sample of a single
// design, or the low-cutoff subpopulation of a two-cutoff design.

/// Lipschitz class: the untreated regression may change by at most kappa per unit of x.
/// The envelope intersects the cones of the fitted untreated curve on a grid over
/// [x_lo, c0]. When kappa is below the fitted curve's own slope the class is refuted
/// and the result is empty.
IdentifiedInterval bounds_lipschitz(const SeriesFitSet& fits, double x_star, double kappa,
                                    std::size_t grid_size = 1000);

/// Bounded second derivative: mu_0(x*) in level + slope * d +/- (kappa / 2) d^2, anchored
/// at the untreated fit's value and slope at c0. Needs J* >= 2 for the untreated fit.
IdentifiedInterval bounds_smoothness_single(const SeriesFitSet& fits, double x_star, double kappa);

/// One discrete covariate cell of the bounded-KS model.
struct KsCell {
  std::string key;
  std::vector<double> untreated_y;  // sorted
  std::size_t n = 0;                // all rows in the cell
  double propensity = 0.0;          // share of the cell's rows that are untreated
  double weight = 0.0;              // kernel-weighted frequency at x*
  std::optional<SeriesFit> treated_fit;
  bool pooled_treated_fit = false;  // too few treated rows; pooled fit used
};

class KsModel {
 public:
  /// Cells are keyed by ObservationTable::covariate_key. Only rows facing `cutoff` are used.
  static KsModel build(const ObservationTable& table, double cutoff, Range support, double x_star,
                       std::size_t j_max = kDefaultMaxOrder);

  /// Assembles a model from prepared cells (weights are renormalized to sum to one).
  KsModel(std::vector<KsCell> cells, Range support, double cutoff, double x_star);

  const std::vector<KsCell>& cells() const noexcept { return cells_; }
  const KsCell& cell(const std::string& key) const;
  Range support() const noexcept { return support_; }
  double cutoff() const noexcept { return cutoff_; }
  double x_star() const noexcept { return x_star_; }

 private:
  std::vector<KsCell> cells_;
  Range support_;
  double cutoff_ = 0.0;
  double x_star_ = 0.0;
};

inline constexpr std::size_t kMinTreatedForCellFit = 10;

/// Right-continuous step band on F_{Y(0)|w}. Entry k of the value vectors holds on
/// [knots[k-1], knots[k]); entry 0 is below the first knot.
struct CdfBand {
  std::vector<double> knots;
  std::vector<double> ecdf;
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t piece(double y) const;
  double lower_at(double y) const { return lower[piece(y)]; }
  double upper_at(double y) const { return upper[piece(y)]; }
  double ecdf_at(double y) const { return ecdf[piece(y)]; }
};

/// F in [(1 + kappa (P - 1)) F0, (1 + kappa (P - 1)) F0 + (1 - P) kappa], clipped to [0, 1].
/// Requires kappa in [0, 1].
CdfBand ks_cdf_bounds(const KsModel& model, const std::string& cell, double kappa);

/// Bounds on E[Y(0) | w] from the CDF band and the declared support.
Range ks_mean_bounds(const KsModel& model, const std::string& cell, double kappa);

/// theta = sum_w weight_w * (mu_1(x*, w) - E[Y(0) | w]) with the mean bounds swapped in.
IdentifiedInterval ks_tau_bounds(const KsModel& model, double kappa);

}  // namespace rdx
