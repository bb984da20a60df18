#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdx/data.hpp"
#include "rdx/regress.hpp"

namespace rdx {

/// OLS of Y on 1, 1{C = high}, x..x^p and their interactions, fit on rows below the low
/// cutoff. Coefficients are reported on raw powers of x in the order
/// (Intercept), X..X^p, 1{C=h}, 1{C=h} x X .. 1{C=h} x X^p.
struct GlobalTestResult {
  std::size_t order = 0;
  std::size_t n = 0;
  std::vector<std::string> names;
  std::vector<double> coef;
  std::vector<double> std_error;    // HC1
  std::vector<double> p_values;     // two-sided, normal reference
  std::vector<double> covariance;   // HC1, row-major k x k
  double wald = 0.0;                // joint test of the interaction slopes
  std::size_t df = 0;
  double p_value = 1.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  bool exact_fit = false;           // residuals vanish; Wald decided deterministically
};

struct LocalTestResult {
  LocalDerivEstimate low;   // low subpopulation, untreated side, at the low cutoff
  LocalDerivEstimate high;  // high subpopulation, untreated side, at the high cutoff
  double low_p = 1.0;
  double high_p = 1.0;
  double difference = 0.0;
  double difference_se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Default polynomial order of the global test.
inline constexpr std::size_t kDefaultGlobalOrder = 2;

GlobalTestResult global_parallel_test(const ObservationTable& table, const DesignSpec& design,
                                      std::size_t order = kDefaultGlobalOrder);

LocalTestResult local_derivative_test(const ObservationTable& table, const DesignSpec& design);

/// "***" for p < 0.001, "**" for p < 0.01, "*" for p < 0.05.
std::string significance_stars(double p);

nlohmann::json to_json(const GlobalTestResult& r);
nlohmann::json to_json(const LocalTestResult& r);
std::string render_table(const GlobalTestResult& r);
std::string render_table(const LocalTestResult& r);

}  // namespace rdx
