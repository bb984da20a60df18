#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdx/data.hpp"

namespace rdx {

inline constexpr std::size_t kDefaultMaxOrder = 8;

/// Least-squares fit on the power basis 1, x, ..., x^(J-1).
///
/// Internally the basis is built on z = (x - center) / half_width, which maps the
/// fit region onto [-1, 1]; predictions and derivatives are reported in x.
class SeriesFit {
 public:
  std::size_t order() const noexcept { return coef_.size(); }
  std::size_t n() const noexcept { return residuals_.size(); }

  double predict(double x) const noexcept;
  /// s-th derivative in x. Requires s < order().
  double derivative(double x, std::size_t s) const;

  /// Coefficients on z powers.
  std::span<const double> coefficients() const noexcept { return coef_; }
  /// Coefficients on raw x powers (may be badly conditioned for high orders).
  std::vector<double> raw_coefficients() const;

  double center() const noexcept { return center_; }
  double half_width() const noexcept { return half_width_; }
  double x_lo() const noexcept { return x_lo_; }
  double x_hi() const noexcept { return x_hi_; }
  bool in_fit_region(double x) const noexcept { return x >= x_lo_ && x <= x_hi_; }

  std::span<const double> residuals() const noexcept { return residuals_; }
  std::span<const double> leverages() const noexcept { return leverages_; }

 private:
  friend SeriesFit fit_poly(std::span<const double>, std::span<const double>, std::size_t);

  std::vector<double> coef_;
  std::vector<double> residuals_;
  std::vector<double> leverages_;
  double center_ = 0.0;
  double half_width_ = 1.0;
  double x_lo_ = 0.0;
  double x_hi_ = 0.0;
};

/// Requires n > J >= 1. Throws InsufficientDataError when the scaled design is rank deficient.
SeriesFit fit_poly(std::span<const double> x, std::span<const double> y, std::size_t order);

/// CV(J) = mean((e_i / (1 - h_ii))^2) for J = 1..j_max. Orders whose design is rank
/// deficient or that produce a leverage of one are ineligible and reported as NaN.
std::vector<double> loocv_scores(std::span<const double> x, std::span<const double> y,
                                 std::size_t j_max);

struct OrderSelection {
  std::size_t order = 0;
  std::vector<double> scores;  // scores[J - 1]
};

/// argmin of CV(J); ties (within floating-point noise) go to the smaller order.
OrderSelection loocv_select(std::span<const double> x, std::span<const double> y,
                            std::size_t j_max = kDefaultMaxOrder);

/// One LOOCV-selected fit per partition cell.
struct SeriesFitSet {
  DesignSpec design;
  std::map<CellKey, SeriesFit> fits;
  std::map<CellKey, OrderSelection> selection;
  std::vector<std::string> warnings;

  bool contains(const CellKey& key) const { return fits.count(key) != 0; }
  const SeriesFit& at(const CellKey& key) const;
};

/// Fits every cell. The high:treated cell of a two-cutoff design is optional and
/// skipped with a warning when too small; any other cell that cannot be fit raises
/// InsufficientDataError naming it. j_max is capped at n - 1 per cell.
SeriesFitSet fit_cells(const Partition& partition, std::size_t j_max = kDefaultMaxOrder);

struct LocalDerivEstimate {
  double point = 0.0;
  int derivative_order = 1;
  double bandwidth = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t effective_n = 0;
  bool bandwidth_fallback = false;  // rule of thumb undefined; whole cell used
};

inline constexpr std::size_t kMinLocalObservations = 20;

/// First derivative at `point` from a local quadratic fit with a triangular kernel and an
/// HC1 robust standard error. Without a bandwidth the Fan-Gijbels rule of thumb is used.
LocalDerivEstimate local_poly_derivative(std::span<const double> x, std::span<const double> y,
                                         double point,
                                         std::optional<double> bandwidth = std::nullopt);

/// Fan-Gijbels rule-of-thumb bandwidth for the first derivative, local quadratic,
/// triangular kernel. Returns nullopt when the pilot fit leaves it undefined
/// (zero residual variance or zero third derivative).
std::optional<double> rule_of_thumb_bandwidth(std::span<const double> x, std::span<const double> y,
                                              double point);

}  // namespace rdx
