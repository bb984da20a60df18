#include "rdx/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include "rdx/errors.hpp"

namespace rdx {

namespace {

struct Name {
  Restriction r;
  std::string_view name;
};

constexpr Name kNames[] = {{Restriction::Bam, "bam"}, {Restriction::Brm, "brm"},
                           {Restriction::Sd, "sd"},   {Restriction::Bpe, "bpe"},
                           {Restriction::Ib, "ib"},   {Restriction::Lip, "lip"},
                           {Restriction::Sd1, "sd1"}, {Restriction::Ks, "ks"}};

// Highest bias derivative order a restriction reads; nullopt when it needs no bias model.
std::optional<std::size_t> bias_order(Restriction r, std::size_t bpe_p) {
  switch (r) {
    case Restriction::Bam: return 0;
    case Restriction::Brm: return 1;
    case Restriction::Sd: return 2;
    case Restriction::Bpe: return bpe_p;
    default: return std::nullopt;
  }
}

nlohmann::json number_or_null(double v, bool null) {
  return null ? nlohmann::json(nullptr) : nlohmann::json(v);
}

nlohmann::json design_json(const DesignSpec& d) {
  return {{"type", d.multi() ? "multi" : "single"},
          {"low", d.low},
          {"high", d.high},
          {"x_min", d.x_min},
          {"x_max", d.x_max}};
}

DesignSpec design_from(const nlohmann::json& j) {
  DesignSpec d;
  d.kind = j.at("type").get<std::string>() == "multi" ? DesignKind::Multi : DesignKind::Single;
  d.low = j.at("low").get<double>();
  d.high = j.at("high").get<double>();
  d.x_min = j.at("x_min").get<double>();
  d.x_max = j.at("x_max").get<double>();
  return d;
}

template <class T>
std::optional<T> optional_at(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

std::string to_string(Restriction r) {
  for (const auto& n : kNames) {
    if (n.r == r) return std::string(n.name);
  }
  return "?";
}

Restriction parse_restriction(std::string_view name) {
  for (const auto& n : kNames) {
    if (n.name == name) return n.r;
  }
  throw PreconditionError("unknown restriction '" + std::string(name) +
                          "' (expected bam, brm, sd, bpe, ib, lip, sd1 or ks)");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json to_json(const BoundsReport& r) {
  const auto& iv = r.interval;
  nlohmann::json target;
  if (r.target.kind == TargetSpec::Kind::Point) {
    target = {{"type", "point"}, {"x_star", r.target.a}};
  } else {
    target = {{"type", "average"}, {"a", r.target.a}, {"b", r.target.b}};
  }
  const auto& d = r.diagnostics;
  nlohmann::json diag = {{"j_star", d.j_star},
                         {"bbar", d.bbar},
                         {"bbar_scanned", d.bbar_scanned},
                         {"bbar_overridden", d.bbar_overridden},
                         {"bias_anchor", d.bias_anchor},
                         {"bias_linear_r2", d.bias_linear_r2 ? nlohmann::json(*d.bias_linear_r2) : nullptr},
                         {"bias_grid_lo", d.bias_grid_lo ? nlohmann::json(*d.bias_grid_lo) : nullptr},
                         {"bias_grid_size", d.bias_grid_size},
                         {"averaging_grid_size", d.averaging_grid_size},
                         {"outer", iv.outer}};
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"kind", "bounds"},
                      {"design", design_json(r.design)},
                      {"target", target},
                      {"x_star", iv.x_star ? nlohmann::json(*iv.x_star) : nullptr},
                      {"restriction", iv.restriction},
                      {"kappa", iv.kappa},
                      {"lower", number_or_null(iv.lower, iv.empty)},
                      {"upper", number_or_null(iv.upper, iv.empty)},
                      {"empty", iv.empty},
                      {"outer", iv.outer},
                      {"gamma", r.gamma ? nlohmann::json(*r.gamma) : nullptr},
                      {"point_estimate_constant_bias",
                       r.point_estimate_constant_bias ? nlohmann::json(*r.point_estimate_constant_bias)
                                                      : nullptr},
                      {"notes", iv.notes},
                      {"warnings", r.warnings},
                      {"diagnostics", diag}};
  return j;
}

BoundsReport bounds_report_from_json(const nlohmann::json& j) {
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw DataError("unsupported schema_version " + std::to_string(version));
  }
  if (j.at("kind").get<std::string>() != "bounds") throw DataError("not a bounds report");
  BoundsReport r;
  r.design = design_from(j.at("design"));
  const auto& t = j.at("target");
  if (t.at("type").get<std::string>() == "point") {
    r.target = TargetSpec::point(t.at("x_star").get<double>());
  } else {
    r.target = TargetSpec::average(t.at("a").get<double>(), t.at("b").get<double>());
  }
  auto& iv = r.interval;
  iv.x_star = optional_at<double>(j, "x_star");
  iv.restriction = j.at("restriction").get<std::string>();
  iv.kappa = j.at("kappa").get<std::vector<double>>();
  iv.empty = j.at("empty").get<bool>();
  iv.lower = optional_at<double>(j, "lower").value_or(0.0);
  iv.upper = optional_at<double>(j, "upper").value_or(0.0);
  iv.outer = j.at("outer").get<bool>();
  if (r.target.kind == TargetSpec::Kind::Average) iv.range = std::make_pair(r.target.a, r.target.b);
  iv.notes = j.at("notes").get<std::vector<std::string>>();
  r.gamma = optional_at<double>(j, "gamma");
  r.point_estimate_constant_bias = optional_at<double>(j, "point_estimate_constant_bias");
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  const auto& d = j.at("diagnostics");
  auto& out = r.diagnostics;
  out.j_star = d.at("j_star").get<std::map<std::string, std::size_t>>();
  out.bbar = d.at("bbar").get<std::vector<double>>();
  out.bbar_scanned = d.at("bbar_scanned").get<std::vector<double>>();
  out.bbar_overridden = d.at("bbar_overridden").get<std::vector<bool>>();
  out.bias_anchor = d.at("bias_anchor").get<std::vector<double>>();
  out.bias_linear_r2 = optional_at<double>(d, "bias_linear_r2");
  out.bias_grid_lo = optional_at<double>(d, "bias_grid_lo");
  out.bias_grid_size = d.at("bias_grid_size").get<std::size_t>();
  out.averaging_grid_size = d.at("averaging_grid_size").get<std::size_t>();
  return r;
}

BoundsEngine::BoundsEngine(const ObservationTable& table, BoundsRequest request)
    : request_(std::move(request)), design_(DesignSpec::from_table(table)) {
  auto& req = request_;
  req.target.validate(design_);
  if (req.restriction == Restriction::Ib) {
    if (req.members.empty()) throw PreconditionError("ib needs at least one member restriction");
    for (auto m : req.members) {
      if (m == Restriction::Ib) throw PreconditionError("ib members cannot include ib");
    }
  } else {
    req.members = {req.restriction};
  }
  if (req.bpe_weights.empty()) throw PreconditionError("bpe needs at least one order weight");
  for (double w : req.bpe_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw PreconditionError("bpe kappas must be >= 0");
  }
  if (req.average_grid < 2) throw PreconditionError("averaging grid needs at least 2 points");

  const auto part = partition(table, design_);
  warnings_ = part.warnings;
  fits_ = fit_cells(part, req.j_max);
  warnings_.insert(warnings_.end(), fits_.warnings.begin(), fits_.warnings.end());

  std::optional<std::size_t> p;
  bool needs_ks = false;
  for (auto m : req.members) {
    if (auto s = bias_order(m, req.bpe_weights.size() - 1)) p = std::max(p.value_or(0), *s);
    needs_ks = needs_ks || m == Restriction::Ks;
  }
  if (p) {
    BiasOptions opts;
    opts.max_order = *p;
    opts.grid_size = req.grid_size;
    opts.sup_override = req.bbar_override;
    bias_ = build_bias_model(fits_, opts);
  } else if (!req.bbar_override.empty()) {
    throw PreconditionError("--bbar-override only applies to bam, brm, sd and bpe");
  }

  if (req.target.kind == TargetSpec::Kind::Point || req.target.a == req.target.b) {
    points_ = {req.target.a};
  } else {
    points_.resize(req.average_grid);
    const double step = (req.target.b - req.target.a) / static_cast<double>(req.average_grid - 1);
    for (std::size_t i = 0; i < req.average_grid; ++i) {
      points_[i] = req.target.a + step * static_cast<double>(i);
    }
    points_.back() = req.target.b;
    // The target is the low subpopulation's effect, so weight by its running variable.
    const auto& lu = part.cell(kLowUntreated);
    const auto& lt = part.cell(kLowTreated);
    std::vector<double> xs(lu.x);
    xs.insert(xs.end(), lt.x.begin(), lt.x.end());
    density_ = estimate_density(xs).conditional(req.target.a, req.target.b);
  }

  if (needs_ks) {
    if (!req.support) throw PreconditionError("ks needs the outcome support (--support lo,hi)");
    for (double x : points_) {
      ks_.push_back(KsModel::build(table, design_.low, *req.support, x, req.j_max));
    }
  }
}

IdentifiedInterval BoundsEngine::pointwise(Restriction r, std::size_t i, double kappa) const {
  const double x = points_[i];
  switch (r) {
    case Restriction::Bam: return bounds_bam(fits_, *bias_, x, kappa);
    case Restriction::Brm: return bounds_brm(fits_, *bias_, x, kappa);
    case Restriction::Sd: return bounds_sd(fits_, *bias_, x, kappa);
    case Restriction::Bpe: {
      std::vector<double> k(request_.bpe_weights);
      for (double& v : k) v *= kappa;
      return bounds_bpe(fits_, *bias_, x, k);
    }
    case Restriction::Lip: return bounds_lipschitz(fits_, x, kappa, request_.grid_size);
    case Restriction::Sd1: return bounds_smoothness_single(fits_, x, kappa);
    case Restriction::Ks: return ks_tau_bounds(ks_[i], kappa);
    case Restriction::Ib: break;
  }
  std::vector<IdentifiedInterval> members;
  for (auto m : request_.members) members.push_back(pointwise(m, i, kappa));
  return bounds_intersect(members);
}

IdentifiedInterval BoundsEngine::evaluate(double kappa) const {
  std::vector<IdentifiedInterval> pw;
  pw.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) pw.push_back(pointwise(request_.restriction, i, kappa));
  if (!density_) return pw.front();
  auto out = aggregate_bounds(points_, pw, *density_);
  out.range = std::make_pair(request_.target.a, request_.target.b);
  return out;
}

BoundsReport BoundsEngine::report(double kappa) const {
  BoundsReport r;
  r.design = design_;
  r.target = request_.target;
  r.interval = evaluate(kappa);
  r.warnings = warnings_;
  auto& d = r.diagnostics;
  for (const auto& [key, sel] : fits_.selection) d.j_star[cell_label(key, design_.kind)] = sel.order;
  if (bias_) {
    for (std::size_t s = 0; s <= bias_->max_order(); ++s) {
      d.bbar.push_back(bias_->sup(s));
      d.bbar_scanned.push_back(bias_->scanned_sup(s));
      d.bbar_overridden.push_back(bias_->overridden(s));
      d.bias_anchor.push_back(bias_->anchor(s));
    }
    d.bias_linear_r2 = bias_->linear_r2();
    d.bias_grid_lo = bias_->grid_lo();
    d.bias_grid_size = bias_->grid_size();
  }
  d.averaging_grid_size = density_ ? points_.size() : 0;
  if (design_.multi() && !density_) {
    r.gamma = estimate_gamma(fits_, points_.front());
    if (bias_) r.point_estimate_constant_bias = point_estimate_constant_bias(fits_, *bias_, points_.front());
  }
  return r;
}

std::vector<double> parse_kappa_grid(std::string_view spec) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = spec.find(':', start);
    const auto piece = spec.substr(start, colon == std::string_view::npos ? spec.npos : colon - start);
    double v = 0.0;
    const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (piece.empty() || res.ec != std::errc() || res.ptr != piece.data() + piece.size()) {
      throw PreconditionError("kappa grid must look like start:end:step (got '" + std::string(spec) + "')");
    }
    parts.push_back(v);
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  if (parts.size() == 1) parts = {parts[0], parts[0], 1.0};
  if (parts.size() != 3) throw PreconditionError("kappa grid must look like start:end:step");
  const double a = parts[0], b = parts[1], step = parts[2];
  if (!(a >= 0.0) || !std::isfinite(b)) throw PreconditionError("kappa grid values must be >= 0");
  if (!(b >= a)) throw PreconditionError("kappa grid end must be >= start");
  if (!(step > 0.0)) throw PreconditionError("kappa grid step must be > 0");
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double v = a + step * static_cast<double>(i);
    if (v > b + 1e-12) break;
    grid.push_back(std::min(v, b));
    if (grid.size() > 1'000'000) throw PreconditionError("kappa grid has more than 1e6 points");
  }
  return grid;
}

std::vector<SweepRow> sweep(const BoundsEngine& engine, const std::vector<double>& kappas,
                            std::size_t threads) {
  std::vector<SweepRow> rows(kappas.size());
  std::vector<std::exception_ptr> errors(kappas.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < kappas.size(); i = next++) {
      try {
        rows[i] = {kappas[i], engine.evaluate(kappas[i])};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(kappas.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  pool.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "kappa,lower,upper,empty\n";
  for (const auto& r : rows) {
    out << format_double(r.kappa) << ',';
    if (r.interval.empty) {
      out << ",,1\n";
    } else {
      out << format_double(r.interval.lower) << ',' << format_double(r.interval.upper) << ",0\n";
    }
  }
}

}  // namespace rdx
