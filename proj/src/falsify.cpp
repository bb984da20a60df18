#include "rdx/falsify.hpp"

#include <algorithm>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rdx/errors.hpp"

namespace rdx {

namespace {

constexpr double kExactFit = 1e-9;

double normal_two_sided(double z) {
  if (!std::isfinite(z)) return 0.0;
  const boost::math::normal_distribution<> norm;
  return 2.0 * boost::math::cdf(boost::math::complement(norm, std::abs(z)));
}

// Maps coefficients on (1, z, .., z^p), z = (x - m) / s, to coefficients on (1, x, .., x^p).
Eigen::MatrixXd unscale_block(std::size_t p, double m, double s) {
  const auto k = static_cast<Eigen::Index>(p + 1);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index col = 0; col < k; ++col) {
    double binom = 1.0;
    for (Eigen::Index row = 0; row <= col; ++row) {
      a(row, col) = binom * std::pow(-m, static_cast<double>(col - row)) /
                    std::pow(s, static_cast<double>(col));
      binom = binom * static_cast<double>(col - row) / static_cast<double>(row + 1);
    }
  }
  return a;
}

void require_multi(const DesignSpec& design) {
  if (!design.multi()) {
    throw PreconditionError("parallel-trend tests need a two-cutoff design");
  }
}

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

GlobalTestResult global_parallel_test(const ObservationTable& table, const DesignSpec& design,
                                      std::size_t order) {
  require_multi(design);
  if (order < 1) throw PreconditionError("global test order must be >= 1");
  std::vector<double> xs, ys, ds;
  std::size_t n_low = 0, n_high = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table.x()[i] < design.low)) continue;
    const bool high = table.c()[i] == design.high;
    xs.push_back(table.x()[i]);
    ys.push_back(table.y()[i]);
    ds.push_back(high ? 1.0 : 0.0);
    (high ? n_high : n_low)++;
  }
  const std::size_t per_group = order + 1;
  if (n_low <= per_group || n_high <= per_group) {
    throw InsufficientDataError(
        n_low <= per_group ? "low:untreated" : "high:untreated",
        "global test of order " + std::to_string(order) + " needs more than " +
            std::to_string(per_group) + " rows below the low cutoff in each subpopulation (have " +
            std::to_string(n_low) + ", " + std::to_string(n_high) + ")");
  }

  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto k = static_cast<Eigen::Index>(2 * per_group);
  const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  const double m = 0.5 * (*mn + *mx);
  const double s = *mx > *mn ? 0.5 * (*mx - *mn) : 1.0;

  Eigen::MatrixXd x(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double z = (xs[ui] - m) / s;
    double pw = 1.0;
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(per_group); ++j) {
      x(i, j) = pw;
      x(i, j + static_cast<Eigen::Index>(per_group)) = ds[ui] * pw;
      pw *= z;
    }
    y(i) = ys[ui];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    throw InsufficientDataError("global test", "global test design is rank deficient for order " +
                                                   std::to_string(order));
  }
  const Eigen::VectorXd b = qr.solve(y);
  const Eigen::VectorXd e = y - x * b;
  const Eigen::MatrixXd bread = (x.transpose() * x).inverse();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) meat.noalias() += (e(i) * e(i)) * x.row(i).transpose() * x.row(i);
  const Eigen::MatrixXd v =
      (static_cast<double>(n) / static_cast<double>(n - k)) * bread * meat * bread;

  GlobalTestResult r;
  r.order = order;
  r.n = xs.size();
  r.df = order;

  // Wald on the interaction slopes, computed in scaled coordinates (the hypothesis
  // subspace is the same on raw powers).
  const Eigen::VectorXd delta = b.tail(static_cast<Eigen::Index>(order));
  const Eigen::MatrixXd vd = v.bottomRightCorner(static_cast<Eigen::Index>(order),
                                                 static_cast<Eigen::Index>(order));
  const double y_scale = y.cwiseAbs().maxCoeff() + 1.0;
  if (e.cwiseAbs().maxCoeff() <= kExactFit * y_scale) {
    r.exact_fit = true;
    const bool zero = delta.cwiseAbs().maxCoeff() <= 1e-8 * y_scale;
    r.wald = zero ? 0.0 : std::numeric_limits<double>::infinity();
    r.p_value = zero ? 1.0 : 0.0;
  } else {
    r.wald = std::max(0.0, delta.dot(vd.ldlt().solve(delta)));
    const boost::math::chi_squared_distribution<> chi2(static_cast<double>(order));
    r.p_value = boost::math::cdf(boost::math::complement(chi2, r.wald));
  }

  // Report on raw powers of x: reorder to (1, x.., D, D x..) and unscale.
  const Eigen::MatrixXd a = unscale_block(order, m, s);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  t.topLeftCorner(a.rows(), a.cols()) = a;
  t.bottomRightCorner(a.rows(), a.cols()) = a;
  const Eigen::VectorXd raw = t * b;
  const Eigen::MatrixXd raw_v = t * v * t.transpose();

  r.names.push_back("(Intercept)");
  for (std::size_t j = 1; j <= order; ++j) r.names.push_back(j == 1 ? "X" : "X^" + std::to_string(j));
  r.names.push_back("1{C=h}");
  for (std::size_t j = 1; j <= order; ++j) {
    r.names.push_back(std::string("1{C=h} x ") + (j == 1 ? "X" : "X^" + std::to_string(j)));
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    r.coef.push_back(raw(j));
    const double se = std::sqrt(std::max(0.0, raw_v(j, j)));
    r.std_error.push_back(se);
    r.p_values.push_back(se > 0.0 ? normal_two_sided(raw(j) / se) : (raw(j) == 0.0 ? 1.0 : 0.0));
    for (Eigen::Index l = 0; l < k; ++l) r.covariance.push_back(0.5 * (raw_v(j, l) + raw_v(l, j)));
  }

  const double ybar = y.mean();
  const double tss = (y.array() - ybar).square().sum();
  const double rss = e.squaredNorm();
  r.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
  r.adj_r2 = 1.0 - (1.0 - r.r2) * static_cast<double>(n - 1) / static_cast<double>(n - k);
  return r;
}

LocalTestResult local_derivative_test(const ObservationTable& table, const DesignSpec& design) {
  require_multi(design);
  const auto part = partition(table, design);
  const auto& lu = part.cell(kLowUntreated);
  const auto& hu = part.cell(kHighUntreated);
  LocalTestResult r;
  try {
    r.low = local_poly_derivative(lu.x, lu.y, design.low);
  } catch (const InsufficientDataError& e) {
    throw InsufficientDataError(lu.label, e.what());
  }
  try {
    r.high = local_poly_derivative(hu.x, hu.y, design.high);
  } catch (const InsufficientDataError& e) {
    throw InsufficientDataError(hu.label, e.what());
  }
  r.low_p = r.low.std_error > 0.0 ? normal_two_sided(r.low.estimate / r.low.std_error) : 0.0;
  r.high_p = r.high.std_error > 0.0 ? normal_two_sided(r.high.estimate / r.high.std_error) : 0.0;
  r.difference = r.low.estimate - r.high.estimate;
  r.difference_se = std::hypot(r.low.std_error, r.high.std_error);
  const double scale = std::abs(r.low.estimate) + std::abs(r.high.estimate) + 1.0;
  if (r.difference_se <= 1e-12 * scale) {
    // Noiseless input: no sampling variance to test against.
    const bool zero = std::abs(r.difference) <= 1e-8 * scale;
    r.z = zero ? 0.0 : std::numeric_limits<double>::infinity();
    r.p_value = zero ? 1.0 : 0.0;
  } else {
    r.z = r.difference / r.difference_se;
    r.p_value = normal_two_sided(r.z);
  }
  const boost::math::normal_distribution<> norm;
  const double crit = boost::math::quantile(norm, 0.975);
  r.ci_lo = r.difference - crit * r.difference_se;
  r.ci_hi = r.difference + crit * r.difference_se;
  return r;
}

nlohmann::json to_json(const GlobalTestResult& r) {
  nlohmann::json coefs = nlohmann::json::array();
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    coefs.push_back({{"name", r.names[j]},
                     {"estimate", r.coef[j]},
                     {"std_error", r.std_error[j]},
                     {"p_value", r.p_values[j]},
                     {"stars", significance_stars(r.p_values[j])}});
  }
  return {{"test", "global_polynomial"},
          {"order", r.order},
          {"n", r.n},
          {"coefficients", coefs},
          {"covariance", r.covariance},
          {"wald", std::isfinite(r.wald) ? nlohmann::json(r.wald) : nlohmann::json("inf")},
          {"df", r.df},
          {"p_value", r.p_value},
          {"r2", r.r2},
          {"adj_r2", r.adj_r2},
          {"exact_fit", r.exact_fit}};
}

nlohmann::json to_json(const LocalTestResult& r) {
  const auto est = [](const LocalDerivEstimate& e, double p) {
    return nlohmann::json{{"point", e.point},       {"estimate", e.estimate},
                          {"std_error", e.std_error}, {"bandwidth", e.bandwidth},
                          {"effective_n", e.effective_n}, {"p_value", p},
                          {"bandwidth_fallback", e.bandwidth_fallback}};
  };
  return {{"test", "local_polynomial"},
          {"low", est(r.low, r.low_p)},
          {"high", est(r.high, r.high_p)},
          {"difference", r.difference},
          {"difference_se", r.difference_se},
          {"z", std::isfinite(r.z) ? nlohmann::json(r.z) : nlohmann::json("inf")},
          {"p_value", r.p_value},
          {"ci95", {r.ci_lo, r.ci_hi}}};
}

std::string render_table(const GlobalTestResult& r) {
  std::ostringstream out;
  char line[160];
  out << "Parallel trend test using global polynomial approach\n";
  out << std::string(52, '-') << '\n';
  std::snprintf(line, sizeof line, "%-22s %15s %12s\n", "", "Estimate", "Std Error");
  out << line << std::string(52, '-') << '\n';
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const std::string est = fmt(r.coef[j]) + significance_stars(r.p_values[j]);
    std::snprintf(line, sizeof line, "%-22s %15s %12s\n", r.names[j].c_str(), est.c_str(),
                  ("(" + fmt(r.std_error[j]) + ")").c_str());
    out << line;
  }
  out << std::string(52, '-') << '\n';
  std::snprintf(line, sizeof line, "%-22s %15s\n%-22s %15s\n%-22s %15zu\n", "R^2",
                fmt(r.r2).c_str(), "Adj. R^2", fmt(r.adj_r2).c_str(), "Num. obs.", r.n);
  out << line;
  std::snprintf(line, sizeof line, "%-22s %15s (df = %zu, p = %s)\n", "Wald (interactions)",
                std::isfinite(r.wald) ? fmt(r.wald).c_str() : "inf", r.df, fmt(r.p_value, 3).c_str());
  out << line << std::string(52, '-') << '\n';
  out << "***p<0.001; **p<0.01; *p<0.05\n";
  return out.str();
}

std::string render_table(const LocalTestResult& r) {
  std::ostringstream out;
  char line[160];
  out << "Parallel trend test using local polynomial approach\n";
  out << std::string(70, '-') << '\n';
  std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %22s\n", "", "Estimate", "Bw", "p-value",
                "95% CI");
  out << line << std::string(70, '-') << '\n';
  const boost::math::normal_distribution<> norm;
  const double crit = boost::math::quantile(norm, 0.975);
  const auto row = [&](const char* name, const LocalDerivEstimate& e, double p) {
    const std::string ci = "[" + fmt(e.estimate - crit * e.std_error) + ", " +
                           fmt(e.estimate + crit * e.std_error) + "]";
    std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %22s\n", name, fmt(e.estimate).c_str(),
                  fmt(e.bandwidth).c_str(), fmt(p).c_str(), ci.c_str());
    out << line;
  };
  row("mu1_low(low)", r.low, r.low_p);
  row("mu1_high(high)", r.high, r.high_p);
  const std::string ci = "[" + fmt(r.ci_lo) + ", " + fmt(r.ci_hi) + "]";
  std::snprintf(line, sizeof line, "%-14s %10s %10s %10s %22s\n", "Difference",
                fmt(r.difference).c_str(), "", fmt(r.p_value).c_str(), ci.c_str());
  out << line << std::string(70, '-') << '\n';
  return out.str();
}

}  // namespace rdx
