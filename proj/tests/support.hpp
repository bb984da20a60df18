#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rdx/data.hpp"
#include "rdx/simgen.hpp"

namespace rdx::test {

// Evenly spaced running variable with the exact conditional means of the simulation
// design: a noiseless stand-in for the population.
inline ObservationTable population_table(std::size_t per_subpop = 2001) {
  std::vector<double> y, x, c;
  for (int s = 0; s < 2; ++s) {
    const double cut = s == 0 ? sim::kLow : sim::kHigh;
    for (std::size_t i = 0; i < per_subpop; ++i) {
      const double xi = 100.0 * static_cast<double>(i) / static_cast<double>(per_subpop - 1);
      const int d = xi >= cut ? 1 : 0;
      x.push_back(xi);
      c.push_back(cut);
      y.push_back(sim::truth::mu(d, s, xi));
    }
  }
  return ObservationTable(std::move(y), std::move(x), std::move(c));
}

// Closed forms of the simulation design, written out independently of simgen.
namespace oracle {
inline double t(double x) { return x / 100.0 - 0.5; }
inline double bias(double x) { return 100.0 * (-10.0 - 2.0 * std::pow(t(x), 3)); }
inline double bias_d1(double x) { return -6.0 * t(x) * t(x); }
inline double bias_d2(double x) { return -12.0 * t(x) / 100.0; }
inline double gamma_mid(double x) {
  return 100.0 * (10.0 + 18.0 * std::pow(t(x), 3) + 0.6 * t(x) + 5.0) -
         100.0 * (20.0 + 20.0 * std::pow(t(x), 3) + 0.6 * t(x));
}
}  // namespace oracle

// Leave-one-out CV by refitting n times with an SVD solve on a standardized basis.
inline double brute_force_cv(std::span<const double> x, std::span<const double> y, std::size_t order) {
  const auto n = static_cast<Eigen::Index>(x.size());
  double mean = 0.0, sd = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  for (double v : x) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(n));
  const auto row = [&](double v) {
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(order));
    for (Eigen::Index j = 0; j < r.size(); ++j) r(j) = std::pow((v - mean) / sd, static_cast<double>(j));
    return r;
  };
  double total = 0.0;
  for (Eigen::Index out = 0; out < n; ++out) {
    Eigen::MatrixXd a(n - 1, static_cast<Eigen::Index>(order));
    Eigen::VectorXd b(n - 1);
    for (Eigen::Index i = 0, k = 0; i < n; ++i) {
      if (i == out) continue;
      a.row(k) = row(x[static_cast<std::size_t>(i)]);
      b(k++) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd beta = a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
    const double e = y[static_cast<std::size_t>(out)] - row(x[static_cast<std::size_t>(out)]).dot(beta);
    total += e * e;
  }
  return total / static_cast<double>(n);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rdx_test_" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rdx::test
