#include <random>

#include "doctest.h"
#include "rdx/errors.hpp"
#include "rdx/falsify.hpp"
#include "support.hpp"

using namespace rdx;

namespace {

// Low cutoff 40, high cutoff 70; each subpopulation gets its own untreated mean.
template <class Low, class High>
ObservationTable two_groups(Low low, High high, double sigma, std::uint64_t seed, std::size_t n = 4000,
                            double scale = 1.0, double shift = 0.0) {
  sim::Rng rng(seed);
  std::vector<double> y, x, c;
  for (std::size_t i = 0; i < n; ++i) {
    const int s = i < n / 2 ? 0 : 1;
    const double xi = 100.0 * rng.uniform();
    const double cut = s == 0 ? 40.0 : 70.0;
    const double mean = (s == 0 ? low(xi) : high(xi)) + (xi >= cut ? 10.0 : 0.0);
    x.push_back(scale * xi + shift);
    c.push_back(scale * cut + shift);
    y.push_back(mean + sigma * rng.normal());
  }
  return ObservationTable(std::move(y), std::move(x), std::move(c));
}

}  // namespace

TEST_CASE("stars follow the 0.001 / 0.01 / 0.05 convention") {
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.05) == "");
  CHECK(significance_stars(0.5) == "");
}

TEST_CASE("global test on exactly parallel noiseless curves") {
  const auto f = [](double x) { return 3.0 + 0.2 * x - 0.004 * x * x; };
  const auto t = two_groups(f, [&](double x) { return f(x) + 25.0; }, 0.0, 1);
  const auto r = global_parallel_test(t, DesignSpec::from_table(t), 2);
  CHECK(r.exact_fit);
  CHECK(r.df == 2);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.wald == doctest::Approx(0.0));
  REQUIRE(r.coef.size() == 6);
  CHECK(r.coef[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(r.coef[1] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(r.coef[2] == doctest::Approx(-0.004).epsilon(1e-8));
  CHECK(r.coef[3] == doctest::Approx(25.0).epsilon(1e-8));
  CHECK(std::abs(r.coef[4]) < 1e-8);
  CHECK(std::abs(r.coef[5]) < 1e-8);
  CHECK(r.names[4] == "1{C=h} x X");
}

TEST_CASE("global test with noise") {
  const auto f = [](double x) { return 0.01 * x * x; };
  SUBCASE("parallel: covariance is symmetric PSD and the test does not reject") {
    const auto t = two_groups(f, [&](double x) { return f(x) + 5; }, 1.0, 2);
    const auto r = global_parallel_test(t, DesignSpec::from_table(t), 2);
    CHECK_FALSE(r.exact_fit);
    CHECK(r.wald >= 0.0);
    CHECK(r.p_value > 0.001);
    const auto k = static_cast<Eigen::Index>(r.coef.size());
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> v(
        r.covariance.data(), k, k);
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12 * eig.eigenvalues().maxCoeff());
    for (std::size_t j = 0; j < r.coef.size(); ++j) CHECK(r.std_error[j] >= 0.0);
  }
  SUBCASE("strong violation rejects") {
    const auto t = two_groups(f, [](double x) { return 2.0 * x; }, 1.0, 3);
    const auto r = global_parallel_test(t, DesignSpec::from_table(t), 2);
    CHECK(r.p_value < 0.05);
    CHECK(significance_stars(r.p_values[4]) == "***");
  }
  SUBCASE("affine rescaling of x leaves the Wald statistic unchanged") {
    const auto g = [](double x) { return 0.01 * x * x + 0.1 * x; };
    const auto a = two_groups(f, g, 2.0, 4);
    const auto b = two_groups(f, g, 2.0, 4, 4000, 2.0, 3.0);
    const auto ra = global_parallel_test(a, DesignSpec::from_table(a), 2);
    const auto rb = global_parallel_test(b, DesignSpec::from_table(b), 2);
    CHECK(rb.wald == doctest::Approx(ra.wald).epsilon(1e-8));
    CHECK(rb.p_value == doctest::Approx(ra.p_value).epsilon(1e-8));
    CHECK(rb.r2 == doctest::Approx(ra.r2).epsilon(1e-10));
  }
}

TEST_CASE("global test preconditions") {
  const ObservationTable single({1, 2, 3, 4}, {1, 2, 3, 4}, {2, 2, 2, 2});
  CHECK_THROWS_AS(global_parallel_test(single, DesignSpec::from_table(single), 2), PreconditionError);
  const auto t = two_groups([](double) { return 0.0; }, [](double) { return 0.0; }, 1.0, 5, 20);
  CHECK_THROWS_AS(global_parallel_test(t, DesignSpec::from_table(t), 6), InsufficientDataError);
}

TEST_CASE("local derivative test") {
  SUBCASE("translated noiseless quadratics have equal slopes at their cutoffs") {
    const auto t = two_groups([](double x) { return 1 + 0.5 * (x - 40) + 0.02 * (x - 40) * (x - 40); },
                              [](double x) { return 9 + 0.5 * (x - 70) + 0.02 * (x - 70) * (x - 70); },
                              0.0, 6);
    const auto r = local_derivative_test(t, DesignSpec::from_table(t));
    CHECK(r.low.estimate == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(std::abs(r.difference) < 1e-6);
    CHECK(r.p_value == doctest::Approx(1.0));
    CHECK(r.ci_lo <= r.difference);
    CHECK(r.difference <= r.ci_hi);
  }
  SUBCASE("a slope gap of 50 is detected") {
    const auto t = two_groups([](double x) { return 50.0 * x; }, [](double x) { return 0.0 * x; }, 1.0, 7,
                              50000);
    const auto r = local_derivative_test(t, DesignSpec::from_table(t));
    CHECK(r.difference == doctest::Approx(50.0).epsilon(0.01));
    CHECK(r.p_value < 0.05);
    CHECK(r.low.std_error >= 0.0);
    CHECK(r.ci_lo <= r.difference);
    CHECK(r.difference <= r.ci_hi);
  }
}

TEST_CASE("reports") {
  const auto t = sim::generate({2000, 7});
  const auto d = DesignSpec::from_table(t);
  const auto g = global_parallel_test(t, d, 2);
  const auto j = to_json(g);
  CHECK(j["coefficients"].size() == 6);
  CHECK(j["df"] == 2);
  const auto text = render_table(g);
  CHECK(text.find("global polynomial") != std::string::npos);
  CHECK(text.find("***p<0.001; **p<0.01; *p<0.05") != std::string::npos);
  const auto l = local_derivative_test(t, d);
  CHECK(to_json(l)["ci95"].size() == 2);
  CHECK(render_table(l).find("Difference") != std::string::npos);
}
