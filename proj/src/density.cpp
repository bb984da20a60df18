#include <algorithm>
#include <cmath>
#include <numbers>

#include "rdx/data.hpp"
#include "rdx/errors.hpp"

namespace rdx {

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> even_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

}  // namespace

double trapezoid(std::span<const double> x, std::span<const double> f) {
  if (x.size() != f.size()) throw PreconditionError("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  return s;
}

double silverman_bandwidth(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double xi : v) mean += xi;
  mean /= n;
  double ss = 0.0;
  for (double xi : v) ss += (xi - mean) * (xi - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

DensityEstimate::DensityEstimate(std::vector<double> grid, std::vector<double> density,
                                 double bandwidth)
    : grid_(std::move(grid)), density_(std::move(density)), bandwidth_(bandwidth) {
  if (grid_.size() != density_.size() || grid_.size() < 2) {
    throw PreconditionError("density grid and values must have equal size >= 2");
  }
  for (double v : density_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("density must be finite and nonnegative");
  }
  normalization_ = trapezoid(grid_, density_);
  if (!(normalization_ > 0.0)) throw PreconditionError("density integrates to zero");
  for (double& v : density_) v /= normalization_;
}

double DensityEstimate::operator()(double x) const {
  if (x < grid_.front() || x > grid_.back()) return 0.0;
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  if (it == grid_.end()) return density_.back();
  const auto i = static_cast<std::size_t>(it - grid_.begin());
  const double t = (x - grid_[i - 1]) / (grid_[i] - grid_[i - 1]);
  return density_[i - 1] + t * (density_[i] - density_[i - 1]);
}

DensityEstimate DensityEstimate::conditional(double a, double b, std::size_t grid_size) const {
  if (!(a < b) || a < grid_.front() || b > grid_.back()) {
    throw PreconditionError("conditional density needs grid_lo <= a < b <= grid_hi");
  }
  if (grid_size < 2) throw PreconditionError("conditional density grid too coarse");
  auto g = even_grid(a, b, grid_size);
  std::vector<double> f(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) f[i] = (*this)(g[i]);
  return DensityEstimate(std::move(g), std::move(f), bandwidth_);
}

DensityEstimate estimate_density(std::span<const double> x, std::size_t grid_size) {
  if (grid_size < kMinDensityGrid) {
    throw PreconditionError("density grid too coarse: " + std::to_string(grid_size) + " < " +
                            std::to_string(kMinDensityGrid));
  }
  if (x.size() < 30) {
    throw InsufficientDataError("x", "density estimation needs >= 30 observations, got " +
                                         std::to_string(x.size()));
  }
  // Sorted copy: the sum order, and therefore the result, does not depend on row order.
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  if (v.front() == v.back()) throw DataError("density estimation: running variable is degenerate");

  const double h = silverman_bandwidth(v);
  const double reach = 8.0 * h;
  const double norm = 1.0 / (static_cast<double>(v.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  auto grid = even_grid(v.front(), v.back(), grid_size);
  std::vector<double> f(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto lo = std::lower_bound(v.begin(), v.end(), grid[g] - reach);
    const auto hi = std::upper_bound(lo, v.end(), grid[g] + reach);
    double s = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double u = (grid[g] - *it) / h;
      s += std::exp(-0.5 * u * u);
    }
    f[g] = s * norm;
  }
  return DensityEstimate(std::move(grid), std::move(f), h);
}

DensityEstimate estimate_density(const ObservationTable& table, std::size_t grid_size) {
  return estimate_density(table.x(), grid_size);
}

}  // namespace rdx
