#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rdx/data.hpp"
#include "rdx/interval.hpp"
#include "rdx/multicut.hpp"
#include "rdx/regress.hpp"
#include "rdx/singlecut.hpp"

namespace rdx {

inline constexpr int kSchemaVersion = 1;

enum class Restriction { Bam, Brm, Sd, Bpe, Ib, Lip, Sd1, Ks };

std::string to_string(Restriction r);
/// Accepts the lower-case names used on the command line; throws PreconditionError otherwise.
Restriction parse_restriction(std::string_view name);

struct BoundsRequest {
  Restriction restriction = Restriction::Brm;
  std::vector<Restriction> members;       // ib only
  std::vector<double> bpe_weights{1.0, 1.0, 1.0};  // kappa_s = kappa * weight_s
  TargetSpec target = TargetSpec::point(0.0);
  std::size_t j_max = kDefaultMaxOrder;
  std::size_t grid_size = 1000;           // bias and Lipschitz scan grids
  std::map<std::size_t, double> bbar_override;
  std::optional<Range> support;           // ks only
  std::vector<std::string> covariates;    // ks cell columns (already loaded into the table)
  std::size_t average_grid = 101;         // pointwise evaluations for an averaged target
};

struct BoundsDiagnostics {
  std::map<std::string, std::size_t> j_star;
  std::vector<double> bbar;             // in use, after overrides
  std::vector<double> bbar_scanned;
  std::vector<bool> bbar_overridden;
  std::vector<double> bias_anchor;      // B^(s)(low)
  std::optional<double> bias_linear_r2;
  std::optional<double> bias_grid_lo;
  std::size_t bias_grid_size = 0;
  std::size_t averaging_grid_size = 0;
};

struct BoundsReport {
  DesignSpec design;
  TargetSpec target;
  IdentifiedInterval interval;
  std::optional<double> gamma;                          // multi, point target
  std::optional<double> point_estimate_constant_bias;   // multi, point target
  BoundsDiagnostics diagnostics;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const BoundsReport& report);
BoundsReport bounds_report_from_json(const nlohmann::json& j);

/// Fits everything that does not depend on kappa once; evaluate() is then a pure
/// function of kappa and safe to call from several threads.
class BoundsEngine {
 public:
  BoundsEngine(const ObservationTable& table, BoundsRequest request);

  IdentifiedInterval evaluate(double kappa) const;
  BoundsReport report(double kappa) const;

  const BoundsRequest& request() const noexcept { return request_; }
  const SeriesFitSet& fits() const noexcept { return fits_; }
  const std::optional<BiasModel>& bias() const noexcept { return bias_; }
  const std::vector<double>& points() const noexcept { return points_; }

 private:
  IdentifiedInterval pointwise(Restriction r, std::size_t i, double kappa) const;

  BoundsRequest request_;
  DesignSpec design_;
  SeriesFitSet fits_;
  std::optional<BiasModel> bias_;
  std::vector<double> points_;
  std::vector<KsModel> ks_;
  std::optional<DensityEstimate> density_;
  std::vector<std::string> warnings_;
};

/// Parses "start:end:step" (inclusive of end within 1e-12); values must be >= 0 and
/// strictly increasing.
std::vector<double> parse_kappa_grid(std::string_view spec);

struct SweepRow {
  double kappa = 0.0;
  IdentifiedInterval interval;
};

/// Evaluates the grid with up to `threads` workers; rows come back in grid order.
std::vector<SweepRow> sweep(const BoundsEngine& engine, const std::vector<double>& kappas,
                            std::size_t threads);

/// Header kappa,lower,upper,empty; lower and upper are blank on empty rows.
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

/// Shortest representation that reads back to the same double.
std::string format_double(double v);

}  // namespace rdx
