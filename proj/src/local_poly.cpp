#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "rdx/errors.hpp"
#include "rdx/regress.hpp"

namespace rdx {

namespace {

constexpr int kLocalDegree = 2;
constexpr int kDerivOrder = 1;

double triangular(double u) { return std::max(0.0, 1.0 - std::abs(u)); }

// Fan-Gijbels constant C_{nu,p}(K) for nu = 1, p = 2 and the triangular kernel restricted
// to [t_lo, t_hi] (the full kernel in the interior, one half at a boundary point).
double rot_constant(double t_lo, double t_hi) {
  constexpr int kSteps = 4000;  // even, Simpson
  const double h = (t_hi - t_lo) / kSteps;
  const auto simpson = [&](auto&& f) {
    double s = f(t_lo) + f(t_hi);
    for (int i = 1; i < kSteps; ++i) s += (i % 2 ? 4.0 : 2.0) * f(t_lo + i * h);
    return s * h / 3.0;
  };
  constexpr int p = kLocalDegree;
  Eigen::Matrix3d moments;
  for (int j = 0; j <= p; ++j) {
    for (int l = 0; l <= p; ++l) {
      moments(j, l) = simpson([&](double t) { return std::pow(t, j + l) * triangular(t); });
    }
  }
  const Eigen::Vector3d row = moments.inverse().row(kDerivOrder).transpose();
  const auto equivalent = [&](double t) {
    return (row(0) + row(1) * t + row(2) * t * t) * triangular(t);
  };
  const double k_sq = simpson([&](double t) { return equivalent(t) * equivalent(t); });
  const double mom = simpson([&](double t) { return std::pow(t, p + 1) * equivalent(t); });
  const double fact = 6.0;  // (p + 1)!
  const double num = fact * fact * (2 * kDerivOrder + 1) * k_sq;
  const double den = 2.0 * (p + 1 - kDerivOrder) * mom * mom;
  return std::pow(num / den, 1.0 / (2 * p + 3));
}

double farthest_distance(std::span<const double> x, double point) {
  double d = 0.0;
  for (double xi : x) d = std::max(d, std::abs(xi - point));
  return d;
}

}  // namespace

std::optional<double> rule_of_thumb_bandwidth(std::span<const double> x, std::span<const double> y,
                                              double point) {
  if (x.size() != y.size()) throw PreconditionError("x and y differ in length");
  // Pilot: global polynomial of degree p + 3 (J = 6), capped by the sample size.
  const std::size_t pilot_order = std::min<std::size_t>(kLocalDegree + 4, x.size() > 0 ? x.size() - 1 : 0);
  if (pilot_order < kLocalDegree + 2) return std::nullopt;
  SeriesFit pilot;
  try {
    pilot = fit_poly(x, y, pilot_order);
  } catch (const InsufficientDataError&) {
    return std::nullopt;
  }
  const double n = static_cast<double>(x.size());
  double rss = 0.0;
  for (double e : pilot.residuals()) rss += e * e;
  const double sigma2 = rss / (n - static_cast<double>(pilot_order));
  double curvature = 0.0;
  for (double xi : x) {
    const double m3 = pilot.derivative(xi, kLocalDegree + 1);
    curvature += m3 * m3;
  }
  const double support = pilot.x_hi() - pilot.x_lo();
  if (!(support > 0.0)) return std::nullopt;
  // Residuals or third derivatives at rounding level count as exactly zero.
  double y2 = 0.0;
  for (double v : y) y2 += v * v;
  const double y_scale = std::sqrt(y2 / n) + std::numeric_limits<double>::min();
  const double m3_floor = 1e-10 * y_scale / std::pow(support, kLocalDegree + 1);
  if (!(sigma2 > 1e-24 * y_scale * y_scale) || !(curvature > n * m3_floor * m3_floor)) {
    return std::nullopt;
  }

  double t_lo = -1.0, t_hi = 1.0;
  if (point >= pilot.x_hi()) t_hi = 0.0;
  if (point <= pilot.x_lo()) t_lo = 0.0;
  if (t_lo == t_hi) return std::nullopt;
  const double h = rot_constant(t_lo, t_hi) *
                   std::pow(sigma2 * support / curvature, 1.0 / (2 * kLocalDegree + 3));
  if (!std::isfinite(h) || !(h > 0.0)) return std::nullopt;
  return h;
}

LocalDerivEstimate local_poly_derivative(std::span<const double> x, std::span<const double> y,
                                         double point, std::optional<double> bandwidth) {
  if (x.size() != y.size()) throw PreconditionError("x and y differ in length");
  if (bandwidth && !(*bandwidth > 0.0)) throw PreconditionError("bandwidth must be positive");

  LocalDerivEstimate out;
  out.point = point;
  out.derivative_order = kDerivOrder;
  // The triangular kernel gives zero weight at |u| = 1; stretch the whole-cell window
  // slightly so the farthest observation still counts.
  const double whole = farthest_distance(x, point) * 1.05;
  if (bandwidth) {
    out.bandwidth = *bandwidth;
  } else if (auto rot = rule_of_thumb_bandwidth(x, y, point)) {
    out.bandwidth = std::min(*rot, whole);
  } else {
    out.bandwidth = whole;
    out.bandwidth_fallback = true;
  }
  const double h = out.bandwidth;

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (triangular((x[i] - point) / h) > 0.0) idx.push_back(i);
  }
  out.effective_n = idx.size();
  if (idx.size() < kMinLocalObservations) {
    throw InsufficientDataError(
        "local window", "local polynomial: only " + std::to_string(idx.size()) +
                            " observations within bandwidth " + std::to_string(h) + " of " +
                            std::to_string(point) + " (need " +
                            std::to_string(kMinLocalObservations) + ")");
  }

  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd design(m, kLocalDegree + 1);
  Eigen::VectorXd w(m), yy(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t i = idx[static_cast<std::size_t>(r)];
    const double u = (x[i] - point) / h;
    design(r, 0) = 1.0;
    design(r, 1) = u;
    design(r, 2) = u * u;
    w(r) = triangular(u);
    yy(r) = y[i];
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd wd = sw.asDiagonal() * design;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wd);
  if (qr.rank() < kLocalDegree + 1) {
    throw InsufficientDataError("local window", "local polynomial design is rank deficient");
  }
  const Eigen::VectorXd beta = qr.solve(sw.cwiseProduct(yy));
  const Eigen::VectorXd resid = yy - design * beta;

  const Eigen::MatrixXd bread = (wd.transpose() * wd).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(kLocalDegree + 1, kLocalDegree + 1);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double s = w(r) * resid(r);
    meat.noalias() += (s * s) * design.row(r).transpose() * design.row(r);
  }
  const double dof = static_cast<double>(m) / static_cast<double>(m - (kLocalDegree + 1));
  const Eigen::MatrixXd cov = dof * bread * meat * bread;

  out.estimate = beta(kDerivOrder) / h;
  out.std_error = std::sqrt(std::max(0.0, cov(kDerivOrder, kDerivOrder))) / h;
  return out;
}

}  // namespace rdx
