#include "rdx/regress.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "rdx/errors.hpp"

namespace rdx {

namespace {

constexpr double kLeverageOne = 1e-10;
constexpr double kRankTolerance = 1e-10;

struct Scaling {
  double lo, hi, center, half;
};

Scaling scaling_for(std::span<const double> x) {
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  Scaling s{*mn, *mx, 0.5 * (*mn + *mx), 0.5 * (*mx - *mn)};
  if (!(s.half > 0.0)) s.half = 1.0;
  return s;
}

Eigen::MatrixXd power_design(std::span<const double> x, const Scaling& s, std::size_t order) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(order));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = (x[static_cast<std::size_t>(i)] - s.center) / s.half;
    double p = 1.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      z(i, j) = p;
      p *= zi;
    }
  }
  return z;
}

void check_inputs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("x and y differ in length");
}

double falling_factorial(std::size_t k, std::size_t s) {
  double f = 1.0;
  for (std::size_t i = 0; i < s; ++i) f *= static_cast<double>(k - i);
  return f;
}

}  // namespace

double SeriesFit::predict(double x) const noexcept {
  const double z = (x - center_) / half_width_;
  double v = 0.0;
  for (auto it = coef_.rbegin(); it != coef_.rend(); ++it) v = v * z + *it;
  return v;
}

double SeriesFit::derivative(double x, std::size_t s) const {
  if (s >= order()) {
    throw PreconditionError("derivative of order " + std::to_string(s) +
                            " undefined for a series fit with J = " + std::to_string(order()));
  }
  if (s == 0) return predict(x);
  const double z = (x - center_) / half_width_;
  double v = 0.0;
  for (std::size_t k = order(); k-- > s;) v = v * z + coef_[k] * falling_factorial(k, s);
  return v / std::pow(half_width_, static_cast<double>(s));
}

std::vector<double> SeriesFit::raw_coefficients() const {
  const std::size_t J = order();
  std::vector<double> raw(J, 0.0);
  for (std::size_t k = 0; k < J; ++k) {
    const double scale = coef_[k] / std::pow(half_width_, static_cast<double>(k));
    double binom = 1.0;  // C(k, j)
    for (std::size_t j = 0; j <= k; ++j) {
      raw[j] += scale * binom * std::pow(-center_, static_cast<double>(k - j));
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
  }
  return raw;
}

SeriesFit fit_poly(std::span<const double> x, std::span<const double> y, std::size_t order) {
  check_inputs(x, y);
  if (order < 1) throw PreconditionError("series order must be >= 1");
  if (x.size() <= order) {
    throw PreconditionError("series fit needs n > J (n = " + std::to_string(x.size()) +
                            ", J = " + std::to_string(order) + ")");
  }
  const Scaling s = scaling_for(x);
  const Eigen::MatrixXd z = power_design(x, s, order);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < static_cast<Eigen::Index>(order)) {
    throw InsufficientDataError(
        "series fit", "rank-deficient design matrix for J = " + std::to_string(order) +
                          ", n = " + std::to_string(x.size()) + " (too few distinct x values)");
  }
  const Eigen::VectorXd coef = qr.solve(yv);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), static_cast<Eigen::Index>(order));
  const Eigen::VectorXd resid = yv - z * coef;
  const Eigen::VectorXd lev = q.rowwise().squaredNorm();

  SeriesFit fit;
  fit.coef_.assign(coef.data(), coef.data() + coef.size());
  fit.residuals_.assign(resid.data(), resid.data() + resid.size());
  fit.leverages_.assign(lev.data(), lev.data() + lev.size());
  fit.center_ = s.center;
  fit.half_width_ = s.half;
  fit.x_lo_ = s.lo;
  fit.x_hi_ = s.hi;
  return fit;
}

std::vector<double> loocv_scores(std::span<const double> x, std::span<const double> y,
                                 std::size_t j_max) {
  check_inputs(x, y);
  if (j_max < 1) throw PreconditionError("J_max must be >= 1");
  if (x.size() <= j_max) {
    throw PreconditionError("LOOCV needs n > J_max (n = " + std::to_string(x.size()) +
                            ", J_max = " + std::to_string(j_max) + ")");
  }
  // The power bases are nested, so one unpivoted QR of the J_max design gives every
  // smaller order: its first J columns of Q span the order-J design.
  const Scaling s = scaling_for(x);
  const Eigen::MatrixXd z = power_design(x, s, j_max);
  const auto n = z.rows();
  const auto cols = static_cast<Eigen::Index>(j_max);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, cols);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd qy = q.transpose() * yv;
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();

  const double r_scale = std::abs(r(0, 0));
  std::vector<double> scores(j_max, std::numeric_limits<double>::quiet_NaN());
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd lev = Eigen::VectorXd::Zero(n);
  bool rank_ok = true;
  for (Eigen::Index k = 0; k < cols; ++k) {
    rank_ok = rank_ok && std::abs(r(k, k)) > kRankTolerance * r_scale;
    if (!rank_ok) break;
    fitted += q.col(k) * qy(k);
    lev += q.col(k).cwiseAbs2();
    if (lev.maxCoeff() > 1.0 - kLeverageOne) continue;
    double cv = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = (yv(i) - fitted(i)) / (1.0 - lev(i));
      cv += e * e;
    }
    scores[static_cast<std::size_t>(k)] = cv / static_cast<double>(n);
  }
  return scores;
}

OrderSelection loocv_select(std::span<const double> x, std::span<const double> y,
                            std::size_t j_max) {
  OrderSelection sel;
  sel.scores = loocv_scores(x, y, j_max);
  double best = std::numeric_limits<double>::infinity();
  for (double cv : sel.scores) {
    if (std::isfinite(cv)) best = std::min(best, cv);
  }
  if (!std::isfinite(best)) {
    throw InsufficientDataError("series fit", "LOOCV: every order up to J_max = " +
                                                  std::to_string(j_max) + " is ineligible");
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double scale = 0.0;
  for (double v : y) scale += (v - mean) * (v - mean);
  scale /= static_cast<double>(y.size());
  const double tol = 1e-9 * best + 1e-12 * scale;
  for (std::size_t j = 0; j < sel.scores.size(); ++j) {
    if (std::isfinite(sel.scores[j]) && sel.scores[j] <= best + tol) {
      sel.order = j + 1;
      break;
    }
  }
  return sel;
}

const SeriesFit& SeriesFitSet::at(const CellKey& key) const {
  const auto it = fits.find(key);
  if (it == fits.end()) {
    throw InsufficientDataError(cell_label(key, design.kind),
                                "no series fit for cell " + cell_label(key, design.kind));
  }
  return it->second;
}

SeriesFitSet fit_cells(const Partition& partition, std::size_t j_max) {
  SeriesFitSet set;
  set.design = partition.design;
  for (const auto& cell : partition.cells) {
    const bool optional = partition.design.multi() && cell.key == kHighTreated;
    try {
      if (cell.size() < 2) {
        throw InsufficientDataError(cell.label, "needs at least 2 observations");
      }
      const std::size_t cap = std::min(j_max, cell.size() - 1);
      auto sel = loocv_select(cell.x, cell.y, cap);
      set.fits.emplace(cell.key, fit_poly(cell.x, cell.y, sel.order));
      set.selection.emplace(cell.key, std::move(sel));
    } catch (const InsufficientDataError& e) {
      if (optional) {
        set.warnings.push_back("cell " + cell.label + " not fitted: " + e.what());
        continue;
      }
      throw InsufficientDataError(cell.label, "cell " + cell.label + ": " + e.what());
    }
  }
  return set;
}

}  // namespace rdx
