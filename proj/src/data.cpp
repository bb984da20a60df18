#include "rdx/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "rdx/errors.hpp"

namespace rdx {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string where(const std::string& source, std::size_t line_no) {
  return source + ":" + std::to_string(line_no);
}

double parse_number(std::string_view field, const std::string& column, const std::string& source,
                    std::size_t line_no) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw DataError(where(source, line_no) + ": column '" + column + "' is not a number: '" +
                    std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw DataError(where(source, line_no) + ": column '" + column + "' is not finite");
  }
  return value;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

ObservationTable::ObservationTable(std::vector<double> y, std::vector<double> x,
                                   std::vector<double> c,
                                   std::vector<std::string> covariate_names,
                                   std::vector<std::vector<std::string>> covariates)
    : y_(std::move(y)),
      x_(std::move(x)),
      c_(std::move(c)),
      covariate_names_(std::move(covariate_names)),
      covariates_(std::move(covariates)) {
  if (y_.size() != x_.size() || y_.size() != c_.size()) {
    throw DataError("y, x and c columns differ in length");
  }
  if (covariate_names_.size() != covariates_.size()) {
    throw DataError("covariate names and covariate columns differ in count");
  }
  for (std::size_t k = 0; k < covariates_.size(); ++k) {
    if (covariates_[k].size() != y_.size()) {
      throw DataError("covariate column '" + covariate_names_[k] + "' has the wrong length");
    }
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (covariates_[k][i].empty()) {
        throw DataError("row " + std::to_string(i) + ": missing value for covariate '" +
                        covariate_names_[k] + "'");
      }
    }
  }
  std::set<double> distinct;
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (!std::isfinite(y_[i]) || !std::isfinite(x_[i]) || !std::isfinite(c_[i])) {
      throw DataError("row " + std::to_string(i) + ": non-finite value");
    }
    distinct.insert(c_[i]);
  }
  if (distinct.size() > 2) {
    throw DataError("design error: " + std::to_string(distinct.size()) +
                    " distinct cutoffs; only single (1) or two-cutoff (2) designs are supported");
  }
  cutoffs_.assign(distinct.begin(), distinct.end());
}

std::vector<int> ObservationTable::treatment() const {
  std::vector<int> d(size());
  for (std::size_t i = 0; i < size(); ++i) d[i] = treated(i);
  return d;
}

std::string ObservationTable::covariate_key(std::size_t row) const {
  std::string key;
  for (std::size_t k = 0; k < covariates_.size(); ++k) {
    if (k) key += '|';
    key += covariates_[k][row];
  }
  return key;
}

DesignSpec DesignSpec::from_table(const ObservationTable& table) {
  if (table.empty()) throw DataError("design error: table is empty");
  DesignSpec d;
  const auto& cuts = table.cutoffs();
  d.kind = cuts.size() == 1 ? DesignKind::Single : DesignKind::Multi;
  d.low = cuts.front();
  d.high = cuts.back();
  const auto [mn, mx] = std::minmax_element(table.x().begin(), table.x().end());
  d.x_min = *mn;
  d.x_max = *mx;
  d.validate();
  return d;
}

void DesignSpec::validate() const {
  if (multi() && !(low < high)) throw DataError("design error: low cutoff must be below high cutoff");
  if (!multi() && low != high) throw DataError("design error: single design needs one cutoff");
  if (low < x_min || low > x_max || high < x_min || high > x_max) {
    throw DataError("design error: cutoff outside the observed support of x");
  }
}

void TargetSpec::validate(const DesignSpec& design) const {
  if (kind == Kind::Average && !(a <= b)) throw PreconditionError("target range needs a <= b");
  const auto inside = [&](double v) {
    return design.multi() ? (v > design.low && v < design.high)
                          : (v > design.c0() && v <= design.x_max);
  };
  if (!inside(a) || !inside(b)) {
    std::ostringstream msg;
    msg << "target must lie strictly inside the extrapolation region ";
    if (design.multi()) {
      msg << "(" << design.low << ", " << design.high << ")";
    } else {
      msg << "(" << design.c0() << ", " << design.x_max << "]";
    }
    throw PreconditionError(msg.str());
  }
}

ObservationTable read_csv(std::istream& in, const std::vector<std::string>& covariate_columns,
                          const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    for (auto f : split_fields(t)) header.emplace_back(f);
    break;
  }
  if (header.empty()) throw DataError(source + ": missing header");

  const auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(source + ": header lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t iy = column("y"), ix = column("x"), ic = column("c");
  std::vector<std::size_t> iw;
  for (const auto& name : covariate_columns) iw.push_back(column(name));

  std::vector<double> y, x, c;
  std::vector<std::vector<std::string>> w(covariate_columns.size());
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_fields(t);
    if (fields.size() != header.size()) {
      throw DataError(where(source, line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    y.push_back(parse_number(fields[iy], "y", source, line_no));
    x.push_back(parse_number(fields[ix], "x", source, line_no));
    c.push_back(parse_number(fields[ic], "c", source, line_no));
    for (std::size_t k = 0; k < iw.size(); ++k) {
      if (fields[iw[k]].empty()) {
        throw DataError(where(source, line_no) + ": missing covariate '" + covariate_columns[k] + "'");
      }
      w[k].emplace_back(fields[iw[k]]);
    }
  }
  return ObservationTable(std::move(y), std::move(x), std::move(c), covariate_columns, std::move(w));
}

ObservationTable load_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& covariate_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, covariate_columns, path.string());
}

void write_csv(const ObservationTable& table, std::ostream& out) {
  std::string buf = "y,x,c";
  for (const auto& name : table.covariate_names()) buf += "," + name;
  buf += '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    append_number(buf, table.y()[i]);
    buf += ',';
    append_number(buf, table.x()[i]);
    buf += ',';
    append_number(buf, table.c()[i]);
    for (std::size_t k = 0; k < table.covariate_names().size(); ++k) {
      buf += ',';
      buf += table.covariate(k, i);
    }
    buf += '\n';
  }
  out << buf;
}

void write_csv(const ObservationTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(table, out);
  if (!out) throw DataError("write failed for " + path.string());
}

std::string cell_label(const CellKey& key, DesignKind kind) {
  const std::string side = key.treated ? "treated" : "untreated";
  if (kind == DesignKind::Single) return side;
  return (key.subpop == 0 ? "low:" : "high:") + side;
}

const Cell& Partition::cell(const CellKey& key) const {
  for (const auto& c : cells) {
    if (c.key == key) return c;
  }
  throw PreconditionError("partition has no cell " + cell_label(key, design.kind));
}

Partition partition(const ObservationTable& table, const DesignSpec& design) {
  Partition p;
  p.design = design;
  const int subpops = design.multi() ? 2 : 1;
  for (int s = 0; s < subpops; ++s) {
    for (int d = 0; d < 2; ++d) {
      Cell cell;
      cell.key = {s, d};
      cell.cutoff = s == 0 ? design.low : design.high;
      cell.label = cell_label(cell.key, design.kind);
      p.cells.push_back(std::move(cell));
    }
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double c = table.c()[i];
    int s = 0;
    if (design.multi()) {
      if (c == design.high) {
        s = 1;
      } else if (c != design.low) {
        throw DataError("row " + std::to_string(i) + ": cutoff not part of the design");
      }
    } else if (c != design.c0()) {
      throw DataError("row " + std::to_string(i) + ": cutoff not part of the design");
    }
    auto& cell = p.cells[static_cast<std::size_t>(2 * s + table.treated(i))];
    cell.rows.push_back(i);
    cell.x.push_back(table.x()[i]);
    cell.y.push_back(table.y()[i]);
  }

  std::string empty;
  for (const auto& cell : p.cells) {
    if (cell.rows.empty()) empty += (empty.empty() ? "" : ", ") + cell.label;
  }
  if (!empty.empty()) throw InsufficientDataError(empty, "empty partition cell(s): " + empty);

  for (const auto& cell : p.cells) {
    if (cell.size() < kMinCellForFit) {
      p.warnings.push_back("cell " + cell.label + " has only " + std::to_string(cell.size()) +
                           " observation(s); insufficient for a series fit");
    }
  }
  if (design.multi()) {
    const auto& hu = p.cell(kHighUntreated);
    const bool covers = std::any_of(hu.x.begin(), hu.x.end(),
                                    [&](double v) { return v >= design.low; });
    if (!covers) {
      p.warnings.push_back("cell high:untreated has no observations in [low, high); "
                           "its fit extrapolates over the whole target region");
    }
  }
  return p;
}

}  // namespace rdx
