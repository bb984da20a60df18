#include <cmath>
#include <random>

#include "doctest.h"
#include "rdx/errors.hpp"
#include "rdx/regress.hpp"
#include "support.hpp"

using namespace rdx;

namespace {

std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace

TEST_CASE("series fit reproduces a polynomial exactly") {
  const auto x = grid(10, 40, 60);
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 - 2.0 * v + 0.5 * v * v - 0.01 * v * v * v);
  const auto fit = fit_poly(x, y, 4);
  CHECK(fit.order() == 4);
  CHECK(fit.predict(25.0) == doctest::Approx(3.0 - 50.0 + 312.5 - 156.25).epsilon(1e-10));
  CHECK(fit.derivative(25.0, 1) == doctest::Approx(-2.0 + 25.0 - 0.03 * 625.0).epsilon(1e-9));
  CHECK(fit.derivative(25.0, 2) == doctest::Approx(1.0 - 0.06 * 25.0).epsilon(1e-8));
  CHECK(fit.derivative(25.0, 3) == doctest::Approx(-0.06).epsilon(1e-8));
  CHECK_THROWS_AS(fit.derivative(25.0, 4), PreconditionError);
  const auto raw = fit.raw_coefficients();
  CHECK(raw[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(raw[1] == doctest::Approx(-2.0).epsilon(1e-8));
  CHECK(raw[2] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(raw[3] == doctest::Approx(-0.01).epsilon(1e-8));
  CHECK(fit.in_fit_region(10.0));
  CHECK_FALSE(fit.in_fit_region(40.5));
}

TEST_CASE("series fit preconditions") {
  const std::vector<double> x{1, 2, 3}, y{1, 2, 3};
  CHECK_THROWS_AS(fit_poly(x, y, 3), PreconditionError);
  const std::vector<double> tied{1, 1, 1, 2}, ty{1, 2, 3, 4};
  CHECK_THROWS_AS(fit_poly(tied, ty, 3), InsufficientDataError);
}

TEST_CASE("derivatives agree with central finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto x = grid(0, 33, 300);
  std::vector<double> y;
  for (double v : x) y.push_back(std::sin(v / 5.0) * 10.0 + noise(rng));
  for (std::size_t order = 2; order <= 6; ++order) {
    const auto fit = fit_poly(x, y, order);
    for (double p : {3.0, 16.0, 30.0}) {
      const double h = 1e-3;
      const double fd1 = (fit.predict(p + h) - fit.predict(p - h)) / (2 * h);
      CHECK(fit.derivative(p, 1) == doctest::Approx(fd1).epsilon(1e-5));
      if (order >= 3) {
        const double fd2 = (fit.derivative(p + h, 1) - fit.derivative(p - h, 1)) / (2 * h);
        CHECK(fit.derivative(p, 2) == doctest::Approx(fd2).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("LOOCV scores match brute-force refits") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 50);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x(40 + 10 * rep), y;
    for (auto& v : x) v = u(rng);
    for (double v : x) y.push_back(0.01 * v * v - v + noise(rng));
    const auto scores = loocv_scores(x, y, 6);
    for (std::size_t j = 1; j <= 6; ++j) {
      CHECK(scores[j - 1] == doctest::Approx(test::brute_force_cv(x, y, j)).epsilon(1e-8));
    }
  }
}

TEST_CASE("LOOCV selection") {
  SUBCASE("noiseless cubic: ties resolve to the smallest exact order") {
    const auto x = grid(0, 10, 50);
    std::vector<double> y;
    for (double v : x) y.push_back(1 + v - 0.3 * v * v * v);
    CHECK(loocv_select(x, y, 8).order == 4);
  }
  SUBCASE("noisy quadratic picks a low order") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto x = grid(0, 10, 400);
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v * v + noise(rng));
    const auto sel = loocv_select(x, y, 8);
    CHECK(sel.order >= 3);
    CHECK(sel.order <= 5);
    CHECK(sel.scores.size() == 8);
  }
  SUBCASE("orders that interpolate a point are ineligible") {
    // The lone point at x = 5 has leverage one once J reaches the number of distinct x.
    const std::vector<double> x{0, 0, 1, 1, 5}, y{1, 2, 0, 1, 3};
    const auto scores = loocv_scores(x, y, 3);
    CHECK(std::isfinite(scores[0]));
    CHECK(std::isfinite(scores[1]));
    CHECK(std::isnan(scores[2]));
    CHECK(loocv_select(x, y, 3).order <= 2);
    CHECK_THROWS_AS(loocv_scores(x, y, 5), PreconditionError);
  }
}

TEST_CASE("fit_cells fits each cell with its own order") {
  const auto pop = test::population_table(401);
  const auto part = partition(pop, DesignSpec::from_table(pop));
  const auto fits = fit_cells(part, 8);
  CHECK(fits.fits.size() == 4);
  for (const auto& [key, sel] : fits.selection) CHECK(sel.order == 4);
  CHECK(fits.at(kLowUntreated).predict(20.0) == doctest::Approx(sim::truth::mu(0, 0, 20.0)).epsilon(1e-9));
}

TEST_CASE("local quadratic derivative") {
  SUBCASE("exact on a quadratic with a fixed bandwidth") {
    const auto x = grid(0, 33, 200);
    std::vector<double> y;
    for (double v : x) y.push_back(5 + 2 * v - 0.1 * v * v);
    const auto est = local_poly_derivative(x, y, 33.0, 10.0);
    CHECK(est.estimate == doctest::Approx(2 - 0.2 * 33).epsilon(1e-8));
    CHECK(est.std_error == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(est.effective_n > 20);
  }
  SUBCASE("rule of thumb is undefined without noise and falls back to the whole cell") {
    const auto x = grid(0, 33, 200);
    std::vector<double> y;
    for (double v : x) y.push_back(1 + v);
    CHECK_FALSE(rule_of_thumb_bandwidth(x, y, 33.0).has_value());
    const auto est = local_poly_derivative(x, y, 33.0);
    CHECK(est.bandwidth_fallback);
    CHECK(est.estimate == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("noisy data give a finite rule-of-thumb bandwidth") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto x = grid(0, 33, 2000);
    std::vector<double> y;
    for (double v : x) y.push_back(0.002 * v * v * v + noise(rng));
    const auto h = rule_of_thumb_bandwidth(x, y, 33.0);
    REQUIRE(h.has_value());
    CHECK(*h > 0.0);
    const auto est = local_poly_derivative(x, y, 33.0);
    CHECK(est.estimate == doctest::Approx(0.006 * 33 * 33).epsilon(0.15));
  }
  SUBCASE("too few observations") {
    const auto x = grid(0, 33, 10);
    std::vector<double> y(x);
    CHECK_THROWS_AS(local_poly_derivative(x, y, 33.0, 5.0), InsufficientDataError);
  }
}
