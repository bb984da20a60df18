#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rdx {

/// Observational sharp-RD data: outcome y, running variable x, cutoff c and
/// optional discrete covariates. Immutable after construction; the treatment
/// indicator is always derived as 1{x >= c}.
class ObservationTable {
 public:
  ObservationTable() = default;

  /// Validates finiteness, equal column lengths and at most two distinct cutoffs.
  ObservationTable(std::vector<double> y, std::vector<double> x, std::vector<double> c,
                   std::vector<std::string> covariate_names = {},
                   std::vector<std::vector<std::string>> covariates = {});

  std::size_t size() const noexcept { return y_.size(); }
  bool empty() const noexcept { return y_.empty(); }

  std::span<const double> y() const noexcept { return y_; }
  std::span<const double> x() const noexcept { return x_; }
  std::span<const double> c() const noexcept { return c_; }

  int treated(std::size_t row) const noexcept { return x_[row] >= c_[row] ? 1 : 0; }
  std::vector<int> treatment() const;

  const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
  const std::string& covariate(std::size_t column, std::size_t row) const {
    return covariates_.at(column).at(row);
  }
  /// All covariate values of a row joined with '|'; empty when there are no covariates.
  std::string covariate_key(std::size_t row) const;

  /// Sorted distinct cutoff values (one or two entries).
  const std::vector<double>& cutoffs() const noexcept { return cutoffs_; }

 private:
  std::vector<double> y_, x_, c_;
  std::vector<std::string> covariate_names_;
  std::vector<std::vector<std::string>> covariates_;  // column-major
  std::vector<double> cutoffs_;
};

enum class DesignKind { Single, Multi };

/// Single cutoff c0 (stored as low == high) or two non-cumulative cutoffs low < high.
struct DesignSpec {
  DesignKind kind = DesignKind::Single;
  double low = 0.0;
  double high = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;

  double c0() const noexcept { return low; }
  bool multi() const noexcept { return kind == DesignKind::Multi; }

  static DesignSpec from_table(const ObservationTable& table);
  void validate() const;
};

/// Treatment effect at a point x* or averaged over [a, b] with the conditional density.
struct TargetSpec {
  enum class Kind { Point, Average };
  Kind kind = Kind::Point;
  double a = 0.0;
  double b = 0.0;

  static TargetSpec point(double x_star) { return {Kind::Point, x_star, x_star}; }
  static TargetSpec average(double a, double b) { return {Kind::Average, a, b}; }

  /// The target must lie strictly inside (c0, x_max] (single) or (low, high) (multi).
  void validate(const DesignSpec& design) const;
};

ObservationTable load_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& covariate_columns = {});
ObservationTable read_csv(std::istream& in, const std::vector<std::string>& covariate_columns = {},
                          const std::string& source = "<stream>");
void write_csv(const ObservationTable& table, std::ostream& out);
void write_csv(const ObservationTable& table, const std::filesystem::path& path);

/// subpop 0 is the single-design population or the low-cutoff subpopulation, 1 the high one.
struct CellKey {
  int subpop = 0;
  int treated = 0;
  auto operator<=>(const CellKey&) const = default;
};

inline constexpr CellKey kLowUntreated{0, 0};
inline constexpr CellKey kLowTreated{0, 1};
inline constexpr CellKey kHighUntreated{1, 0};
inline constexpr CellKey kHighTreated{1, 1};

std::string cell_label(const CellKey& key, DesignKind kind);

struct Cell {
  CellKey key;
  double cutoff = 0.0;
  std::string label;
  std::vector<std::size_t> rows;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const noexcept { return rows.size(); }
};

struct Partition {
  DesignSpec design;
  std::vector<Cell> cells;
  std::vector<std::string> warnings;

  const Cell& cell(const CellKey& key) const;
};

/// Cells with fewer rows than this are kept but flagged as too small to fit.
inline constexpr std::size_t kMinCellForFit = 5;

/// Splits the table into the design's cells. Empty cells raise InsufficientDataError.
Partition partition(const ObservationTable& table, const DesignSpec& design);

/// Density of the running variable on an even grid, normalized to integrate to one.
class DensityEstimate {
 public:
  DensityEstimate(std::vector<double> grid, std::vector<double> density, double bandwidth = 0.0);

  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return density_; }
  double bandwidth() const noexcept { return bandwidth_; }
  /// Integral of the raw estimate before normalization.
  double normalization() const noexcept { return normalization_; }

  /// Linear interpolation; zero outside the grid.
  double operator()(double x) const;

  /// Restriction to [a, b], renormalized. Requires a < b inside the grid.
  DensityEstimate conditional(double a, double b, std::size_t grid_size = 201) const;

 private:
  std::vector<double> grid_;
  std::vector<double> density_;
  double bandwidth_ = 0.0;
  double normalization_ = 1.0;
};

inline constexpr std::size_t kMinDensityGrid = 50;

/// Gaussian kernel density with Silverman's rule-of-thumb bandwidth on [min x, max x].
DensityEstimate estimate_density(std::span<const double> x, std::size_t grid_size = 512);
DensityEstimate estimate_density(const ObservationTable& table, std::size_t grid_size = 512);

double silverman_bandwidth(std::span<const double> x);
double trapezoid(std::span<const double> x, std::span<const double> f);

}  // namespace rdx
