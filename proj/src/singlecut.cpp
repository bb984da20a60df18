#include "rdx/singlecut.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "rdx/errors.hpp"

namespace rdx {

namespace {

void check_target(const SeriesFitSet& fits, double x_star) {
  if (!(x_star > fits.design.low)) {
    std::ostringstream msg;
    msg << "x* = " << x_star << " must lie above the cutoff " << fits.design.low;
    throw PreconditionError(msg.str());
  }
}

void check_kappa(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw PreconditionError("kappa must be finite and >= 0");
}

IdentifiedInterval effect_from_untreated(const SeriesFitSet& fits, double x_star, Range mu0,
                                         std::string name, double kappa) {
  const double mu1 = fits.at(kLowTreated).predict(x_star);
  return IdentifiedInterval::at_point(mu1 - mu0.hi, mu1 - mu0.lo, std::move(name), {kappa}, x_star);
}

// Integral of 1 - F over [lo, hi] for a step function laid out as in CdfBand.
double survival_integral(const std::vector<double>& knots, const std::vector<double>& f,
                         double lo, double hi) {
  double total = 0.0;
  double left = lo;
  for (std::size_t k = 0; k <= knots.size(); ++k) {
    const double right = k < knots.size() ? std::min(knots[k], hi) : hi;
    if (right > left) {
      total += (right - left) * (1.0 - f[k]);
      left = right;
    }
  }
  return total;
}

}  // namespace

IdentifiedInterval bounds_lipschitz(const SeriesFitSet& fits, double x_star, double kappa,
                                    std::size_t grid_size) {
  check_target(fits, x_star);
  check_kappa(kappa);
  if (grid_size < 2) throw PreconditionError("Lipschitz grid needs at least 2 points");
  const auto& untreated = fits.at(kLowUntreated);
  const double c0 = fits.design.low;
  const double lo = std::min(untreated.x_lo(), c0);
  const double step = (c0 - lo) / static_cast<double>(grid_size - 1);

  double env_lo = -std::numeric_limits<double>::infinity();
  double env_hi = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double g = i + 1 == grid_size ? c0 : lo + step * static_cast<double>(i);
    const double m = untreated.predict(g);
    env_lo = std::max(env_lo, m - kappa * (x_star - g));
    env_hi = std::min(env_hi, m + kappa * (x_star - g));
  }
  if (env_lo > env_hi) {
    auto out = IdentifiedInterval::at_point(0.0, 0.0, "lip", {kappa}, x_star);
    out.empty = true;
    std::ostringstream msg;
    msg << "Lipschitz envelope empty: kappa = " << kappa
        << " is below the variation of the fitted untreated curve below the cutoff";
    out.notes.push_back(msg.str());
    return out;
  }
  return effect_from_untreated(fits, x_star, {env_lo, env_hi}, "lip", kappa);
}

IdentifiedInterval bounds_smoothness_single(const SeriesFitSet& fits, double x_star, double kappa) {
  check_target(fits, x_star);
  check_kappa(kappa);
  const auto& untreated = fits.at(kLowUntreated);
  if (untreated.order() < 2) {
    throw PreconditionError("smoothness restriction needs an untreated fit with J* >= 2 (got J* = " +
                            std::to_string(untreated.order()) + ")");
  }
  const double c0 = fits.design.low;
  const double d = x_star - c0;
  const double center = untreated.predict(c0) + untreated.derivative(c0, 1) * d;
  const double half = 0.5 * kappa * d * d;
  return effect_from_untreated(fits, x_star, {center - half, center + half}, "sd1", kappa);
}

KsModel::KsModel(std::vector<KsCell> cells, Range support, double cutoff, double x_star)
    : cells_(std::move(cells)), support_(support), cutoff_(cutoff), x_star_(x_star) {
  if (cells_.empty()) throw PreconditionError("KS model needs at least one covariate cell");
  if (!(support_.lo < support_.hi)) throw PreconditionError("outcome support needs y_min < y_max");
  double total = 0.0;
  for (auto& c : cells_) {
    if (c.untreated_y.empty()) {
      throw InsufficientDataError(c.key, "covariate cell '" + c.key + "' has no untreated outcomes");
    }
    std::sort(c.untreated_y.begin(), c.untreated_y.end());
    if (c.untreated_y.front() < support_.lo || c.untreated_y.back() > support_.hi) {
      throw DataError("observed outcome outside the declared support in cell '" + c.key + "'");
    }
    if (!(c.propensity >= 0.0 && c.propensity <= 1.0)) {
      throw PreconditionError("propensity must lie in [0, 1]");
    }
    if (!(c.weight >= 0.0)) throw PreconditionError("cell weight must be >= 0");
    total += c.weight;
  }
  if (!(total > 0.0)) throw PreconditionError("cell weights sum to zero");
  for (auto& c : cells_) c.weight /= total;
}

KsModel KsModel::build(const ObservationTable& table, double cutoff, Range support, double x_star,
                       std::size_t j_max) {
  struct Acc {
    std::vector<double> untreated_y, treated_x, treated_y;
    std::size_t n = 0;
    double kernel = 0.0;
  };
  std::vector<double> xs;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.c()[i] == cutoff) xs.push_back(table.x()[i]);
  }
  if (xs.size() < 2) throw InsufficientDataError("ks", "KS model: too few rows at the cutoff");
  const double bw = silverman_bandwidth(xs);

  std::map<std::string, Acc> acc;
  std::vector<double> pooled_x, pooled_y;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.c()[i] != cutoff) continue;
    auto& a = acc[table.covariate_key(i)];
    ++a.n;
    const double u = (table.x()[i] - x_star) / bw;
    a.kernel += std::exp(-0.5 * u * u);
    const double y = table.y()[i];
    if (y < support.lo || y > support.hi) {
      throw DataError("row " + std::to_string(i) + ": outcome outside the declared support");
    }
    if (table.treated(i)) {
      a.treated_x.push_back(table.x()[i]);
      a.treated_y.push_back(y);
      pooled_x.push_back(table.x()[i]);
      pooled_y.push_back(y);
    } else {
      a.untreated_y.push_back(y);
    }
  }

  std::optional<SeriesFit> pooled;
  std::vector<KsCell> cells;
  for (auto& [key, a] : acc) {
    KsCell cell;
    cell.key = key;
    cell.n = a.n;
    cell.propensity = static_cast<double>(a.untreated_y.size()) / static_cast<double>(a.n);
    cell.weight = a.kernel;
    cell.untreated_y = std::move(a.untreated_y);
    if (a.treated_y.size() >= kMinTreatedForCellFit) {
      const auto sel = loocv_select(a.treated_x, a.treated_y, std::min(j_max, a.treated_y.size() - 1));
      cell.treated_fit = fit_poly(a.treated_x, a.treated_y, sel.order);
    } else {
      if (!pooled) {
        if (pooled_y.size() < 2) throw InsufficientDataError("treated", "KS model: no treated rows");
        const auto sel = loocv_select(pooled_x, pooled_y, std::min(j_max, pooled_y.size() - 1));
        pooled = fit_poly(pooled_x, pooled_y, sel.order);
      }
      cell.treated_fit = pooled;
      cell.pooled_treated_fit = true;
    }
    cells.push_back(std::move(cell));
  }
  return KsModel(std::move(cells), support, cutoff, x_star);
}

const KsCell& KsModel::cell(const std::string& key) const {
  for (const auto& c : cells_) {
    if (c.key == key) return c;
  }
  throw PreconditionError("KS model has no covariate cell '" + key + "'");
}

std::size_t CdfBand::piece(double y) const {
  return static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), y) - knots.begin());
}

CdfBand ks_cdf_bounds(const KsModel& model, const std::string& key, double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw PreconditionError("KS sensitivity kappa must lie in [0, 1] (mixture weight)");
  }
  const auto& cell = model.cell(key);
  const auto& ys = cell.untreated_y;
  const double n = static_cast<double>(ys.size());
  const double scale = 1.0 + kappa * (cell.propensity - 1.0);
  const double shift = (1.0 - cell.propensity) * kappa;

  CdfBand band;
  band.ecdf.push_back(0.0);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (i + 1 < ys.size() && ys[i + 1] == ys[i]) continue;
    band.knots.push_back(ys[i]);
    band.ecdf.push_back(static_cast<double>(i + 1) / n);
  }
  band.ecdf.back() = 1.0;
  for (double f : band.ecdf) {
    band.lower.push_back(std::clamp(scale * f, 0.0, 1.0));
    band.upper.push_back(std::clamp(scale * f + shift, 0.0, 1.0));
  }
  return band;
}

Range ks_mean_bounds(const KsModel& model, const std::string& cell, double kappa) {
  const auto band = ks_cdf_bounds(model, cell, kappa);
  const auto [lo, hi] = model.support();
  // A stochastically smaller distribution (upper CDF) has the smaller mean.
  return {lo + survival_integral(band.knots, band.upper, lo, hi),
          lo + survival_integral(band.knots, band.lower, lo, hi)};
}

IdentifiedInterval ks_tau_bounds(const KsModel& model, double kappa) {
  const double x_star = model.x_star();
  if (!(x_star > model.cutoff())) throw PreconditionError("KS bounds need x* above the cutoff");
  double lower = 0.0, upper = 0.0;
  bool pooled = false;
  for (const auto& cell : model.cells()) {
    if (!cell.treated_fit) throw InsufficientDataError(cell.key, "no treated fit for cell " + cell.key);
    const double mu1 = cell.treated_fit->predict(x_star);
    const Range mean = ks_mean_bounds(model, cell.key, kappa);
    lower += cell.weight * (mu1 - mean.hi);
    upper += cell.weight * (mu1 - mean.lo);
    pooled = pooled || cell.pooled_treated_fit;
  }
  auto out = IdentifiedInterval::at_point(lower, upper, "ks", {kappa}, x_star);
  out.notes.push_back("covariate cells aggregated with kernel-weighted frequencies at x*");
  if (pooled) out.notes.push_back("some cells use the pooled treated fit (too few treated rows)");
  return out;
}

}  // namespace rdx
