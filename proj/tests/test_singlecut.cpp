#include <numeric>
#include <random>

#include "doctest.h"
#include "rdx/errors.hpp"
#include "rdx/singlecut.hpp"
#include "support.hpp"

using namespace rdx;

namespace {

// Single cutoff at 50: untreated mean u(x), treated mean u(x) + 7, noiseless.
template <class F>
SeriesFitSet single_design(F untreated, std::size_t j_max = 8) {
  std::vector<double> y, x, c;
  for (int i = 0; i <= 400; ++i) {
    const double xi = i * 0.25;
    x.push_back(xi);
    c.push_back(50.0);
    y.push_back(untreated(xi) + (xi >= 50.0 ? 7.0 : 0.0));
  }
  const ObservationTable t(std::move(y), std::move(x), std::move(c));
  return fit_cells(partition(t, DesignSpec::from_table(t)), j_max);
}

KsModel uniform_cell(std::size_t n, double propensity) {
  KsCell cell;
  cell.key = "";
  cell.propensity = propensity;
  cell.weight = 1.0;
  for (std::size_t i = 0; i < n; ++i) cell.untreated_y.push_back((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return KsModel({cell}, {0.0, 1.0}, 0.0, 1.0);
}

}  // namespace

TEST_CASE("Lipschitz envelope of a linear untreated mean") {
  const auto fits = single_design([](double x) { return 2.0 + 0.4 * x; });
  const double x_star = 60.0, d = 10.0;
  const double mu1 = 2.0 + 0.4 * 60.0 + 7.0;
  const double m0 = 2.0 + 0.4 * 50.0;
  for (double k : {0.4, 0.5, 1.0, 3.0}) {
    const auto iv = bounds_lipschitz(fits, x_star, k);
    CHECK_FALSE(iv.empty);
    CHECK(iv.lower == doctest::Approx(mu1 - (m0 + k * d)).epsilon(1e-9));
    CHECK(iv.upper == doctest::Approx(mu1 - (m0 - k * d)).epsilon(1e-9));
  }
  // Below the observed slope the class is refuted.
  const auto refuted = bounds_lipschitz(fits, x_star, 0.2);
  CHECK(refuted.empty);
  CHECK_FALSE(refuted.notes.empty());
  CHECK(bounds_lipschitz(fits, x_star, 0.0).empty);
}

TEST_CASE("Lipschitz sets grow with kappa") {
  const auto fits = single_design([](double x) { return 5.0 * std::sin(x / 10.0); });
  IdentifiedInterval prev = bounds_lipschitz(fits, 70.0, 0.5);
  CHECK_FALSE(prev.empty);
  for (double k = 0.6; k < 5.0; k += 0.1) {
    const auto cur = bounds_lipschitz(fits, 70.0, k);
    CHECK(prev.subset_of(cur));
    prev = cur;
  }
}

TEST_CASE("bounded second derivative, single cutoff") {
  const auto fits = single_design([](double x) { return 1.0 + 0.3 * x - 0.01 * x * x; });
  const double x_star = 58.0, d = 8.0;
  const double level = 1.0 + 15.0 - 25.0, slope = 0.3 - 0.02 * 50.0;
  const double mu1 = 1.0 + 0.3 * x_star - 0.01 * x_star * x_star + 7.0;
  const auto iv = bounds_smoothness_single(fits, x_star, 2.0);
  CHECK(iv.lower == doctest::Approx(mu1 - (level + slope * d + d * d)).epsilon(1e-8));
  CHECK(iv.upper == doctest::Approx(mu1 - (level + slope * d - d * d)).epsilon(1e-8));
  // With kappa above the true |mu''| = 0.02 the truth is inside; below it, outside.
  CHECK(bounds_smoothness_single(fits, x_star, 0.021).contains(7.0));
  CHECK_FALSE(bounds_smoothness_single(fits, x_star, 0.019).contains(7.0));

  const auto linear = single_design([](double x) { return x; }, 1);
  CHECK_THROWS_AS(bounds_smoothness_single(linear, x_star, 1.0), PreconditionError);
  CHECK_THROWS_AS(bounds_smoothness_single(fits, 50.0, 1.0), PreconditionError);
}

TEST_CASE("KS mean bounds match the mixture closed form") {
  const auto model = uniform_cell(10000, 0.5);
  const auto& ys = model.cell("").untreated_y;
  const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  for (double k : {0.0, 0.25, 0.5, 1.0}) {
    const double a = 1.0 + k * (0.5 - 1.0);
    const auto r = ks_mean_bounds(model, "", k);
    CHECK(r.lo == doctest::Approx(a * mean + (1 - a) * 0.0).epsilon(1e-12));
    CHECK(r.hi == doctest::Approx(a * mean + (1 - a) * 1.0).epsilon(1e-12));
  }
  const auto at0 = ks_mean_bounds(model, "", 0.0);
  CHECK(at0.lo == doctest::Approx(mean).epsilon(1e-14));
  CHECK(at0.hi == doctest::Approx(mean).epsilon(1e-14));
  CHECK_THROWS_AS(ks_mean_bounds(model, "", 1.5), PreconditionError);
  CHECK_THROWS_AS(ks_mean_bounds(model, "", -0.1), PreconditionError);
}

TEST_CASE("KS CDF band") {
  const auto model = uniform_cell(100, 0.3);
  const double k = 0.4;
  const auto band = ks_cdf_bounds(model, "", k);
  for (std::size_t i = 0; i < band.ecdf.size(); ++i) {
    CHECK(band.lower[i] <= band.upper[i]);
    const double unclipped = (1 + k * (0.3 - 1)) * band.ecdf[i] + (1 - 0.3) * k;
    if (unclipped <= 1.0) CHECK(band.upper[i] - band.lower[i] == doctest::Approx(0.7 * k).epsilon(1e-12));
    if (i > 0) {
      CHECK(band.lower[i] >= band.lower[i - 1]);
      CHECK(band.upper[i] >= band.upper[i - 1]);
    }
  }
  CHECK(band.ecdf_at(-1.0) == 0.0);
  CHECK(band.ecdf_at(0.005) == doctest::Approx(0.01));
  CHECK(band.ecdf_at(2.0) == 1.0);
}

TEST_CASE("KS model from a table with covariates") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> y, x, c;
  std::vector<std::vector<std::string>> w(1);
  for (int i = 0; i < 3000; ++i) {
    const double xi = 10 * u(rng);
    const bool g = u(rng) < 0.4;
    x.push_back(xi);
    c.push_back(5.0);
    w[0].push_back(g ? "g" : "h");
    y.push_back(std::min(1.0, 0.1 * u(rng) + (xi >= 5 ? 0.5 : 0.0) + (g ? 0.2 : 0.0)));
  }
  const ObservationTable t(y, x, c, {"w"}, w);
  const auto model = KsModel::build(t, 5.0, {0.0, 1.0}, 7.0);
  REQUIRE(model.cells().size() == 2);
  double total = 0;
  for (const auto& cell : model.cells()) {
    total += cell.weight;
    CHECK(cell.propensity == doctest::Approx(0.5).epsilon(0.08));
    CHECK_FALSE(cell.pooled_treated_fit);
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(model.cell("g").weight == doctest::Approx(0.4).epsilon(0.1));

  const auto at0 = ks_tau_bounds(model, 0.0);
  CHECK(at0.lower == doctest::Approx(at0.upper).epsilon(1e-12));
  CHECK(at0.lower == doctest::Approx(0.5).epsilon(0.05));
  IdentifiedInterval prev = at0;
  for (double k = 0.1; k <= 1.0; k += 0.1) {
    const auto cur = ks_tau_bounds(model, k);
    CHECK(prev.subset_of(cur));
    prev = cur;
  }

  CHECK_THROWS_AS(KsModel::build(t, 5.0, {0.0, 0.5}, 7.0), DataError);
  CHECK_THROWS_AS(model.cell("zzz"), PreconditionError);
}
