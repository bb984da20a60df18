#include "rdx/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "rdx/errors.hpp"
#include "rdx/falsify.hpp"
#include "rdx/report.hpp"
#include "rdx/simgen.hpp"

namespace rdx::cli {

namespace {

struct DataArgs {
  std::string data;
  std::vector<std::string> covariates;
};

struct BoundsArgs {
  DataArgs data;
  std::string restriction = "brm";
  double kappa = 1.0;
  std::vector<double> kappas;
  std::vector<std::string> members;
  std::optional<double> x_star;
  std::vector<double> range;
  std::size_t j_max = kDefaultMaxOrder;
  std::size_t grid_size = 1000;
  std::size_t average_grid = 101;
  std::vector<std::string> bbar_override;
  std::vector<double> support;
  std::string out;
  std::string format = "json";
  std::string grid;
};

void add_data_options(CLI::App& cmd, DataArgs& a) {
  cmd.add_option("--data", a.data, "input CSV with header y,x,c[,covariates...]")->required();
  cmd.add_option("--covariates", a.covariates, "discrete covariate columns")->delimiter(',');
}

void add_bounds_options(CLI::App& cmd, BoundsArgs& a) {
  add_data_options(cmd, a.data);
  cmd.add_option("--restriction", a.restriction, "bam, brm, sd, bpe, ib, lip, sd1 or ks")
      ->check(CLI::IsMember({"bam", "brm", "sd", "bpe", "ib", "lip", "sd1", "ks"}))
      ->capture_default_str();
  cmd.add_option("--kappas", a.kappas, "bpe: kappa_0..kappa_p (scaled by the sweep kappa)")
      ->delimiter(',');
  cmd.add_option("--members", a.members, "ib: member restrictions")->delimiter(',');
  auto* xs = cmd.add_option("--x-star", a.x_star, "evaluation point");
  auto* rg = cmd.add_option("--range", a.range, "average over [a,b]")->delimiter(',')->expected(2);
  xs->excludes(rg);
  rg->excludes(xs);
  cmd.add_option("--j-max", a.j_max, "largest series order for LOOCV")->capture_default_str();
  cmd.add_option("--grid-size", a.grid_size, "bias and Lipschitz scan grid")->capture_default_str();
  cmd.add_option("--average-grid", a.average_grid, "pointwise evaluations for --range")
      ->capture_default_str();
  cmd.add_option("--bbar-override", a.bbar_override, "fix B-bar^(s), given as s=value");
  cmd.add_option("--support", a.support, "ks: outcome support lo,hi")->delimiter(',')->expected(2);
  cmd.add_option("--out", a.out, "output file (default stdout)");
}

std::size_t thread_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RDX_THREADS")) {
    std::size_t cap = 0;
    const std::string_view s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), cap);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || cap == 0) {
      throw PreconditionError("RDX_THREADS must be a positive integer");
    }
    n = std::min(n, cap);
  }
  return n;
}

void emit(const std::string& content, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << content;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << content;
  if (!f) throw DataError("write failed for " + path);
}

BoundsRequest make_request(const BoundsArgs& a) {
  BoundsRequest req;
  req.restriction = parse_restriction(a.restriction);
  if (req.restriction == Restriction::Ib) {
    if (a.members.empty()) throw PreconditionError("--restriction ib needs --members");
    for (const auto& m : a.members) req.members.push_back(parse_restriction(m));
  } else if (!a.members.empty()) {
    throw PreconditionError("--members only applies to --restriction ib");
  }
  if (!a.kappas.empty()) req.bpe_weights = a.kappas;
  if (a.x_star) {
    req.target = TargetSpec::point(*a.x_star);
  } else if (a.range.size() == 2) {
    req.target = TargetSpec::average(a.range[0], a.range[1]);
  } else {
    throw PreconditionError("one of --x-star or --range is required");
  }
  req.j_max = a.j_max;
  req.grid_size = a.grid_size;
  req.average_grid = a.average_grid;
  for (const auto& item : a.bbar_override) {
    const auto eq = item.find('=');
    std::size_t s = 0;
    double v = 0.0;
    const char* end = item.data() + item.size();
    if (eq == std::string::npos ||
        std::from_chars(item.data(), item.data() + eq, s).ptr != item.data() + eq ||
        std::from_chars(item.data() + eq + 1, end, v).ptr != end) {
      throw PreconditionError("--bbar-override expects s=value (got '" + item + "')");
    }
    req.bbar_override[s] = v;
  }
  if (a.support.size() == 2) req.support = Range{a.support[0], a.support[1]};
  req.covariates = a.data.covariates;
  return req;
}

int cmd_simulate(std::size_t n, std::uint64_t seed, const std::string& path, std::ostream& out) {
  if (n == 0) throw PreconditionError("--n must be positive");
  const auto table = sim::generate({n, seed});
  write_csv(table, std::filesystem::path(path));
  std::size_t low = 0;
  for (double c : table.c()) low += c == sim::kLow ? 1 : 0;
  const auto [ymin, ymax] = std::minmax_element(table.y().begin(), table.y().end());
  out << "wrote " << table.size() << " rows to " << path << '\n'
      << "  c=" << sim::kLow << ": " << low << " rows\n"
      << "  c=" << sim::kHigh << ": " << table.size() - low << " rows\n"
      << "  y range: [" << *ymin << ", " << *ymax << "]\n";
  return kExitOk;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "rdx: warning: " << w << '\n';
}

int cmd_bounds(const BoundsArgs& a, std::ostream& out, std::ostream& err) {
  const auto table = load_csv(a.data.data, a.data.covariates);
  const BoundsEngine engine(table, make_request(a));
  const auto report = engine.report(a.kappa);
  print_warnings(report.warnings, err);
  std::ostringstream body;
  if (a.format == "csv") {
    write_sweep_csv({{a.kappa, report.interval}}, body);
  } else {
    body << to_json(report).dump(2) << '\n';
  }
  emit(body.str(), a.out, out);
  if (report.interval.empty) {
    err << "rdx: identified set is empty";
    for (const auto& n : report.interval.notes) err << "; " << n;
    err << '\n';
    return kExitEmpty;
  }
  return kExitOk;
}

int cmd_sweep(const BoundsArgs& a, std::ostream& out, std::ostream& err) {
  const auto kappas = parse_kappa_grid(a.grid);
  const auto table = load_csv(a.data.data, a.data.covariates);
  const BoundsEngine engine(table, make_request(a));
  const auto rows = sweep(engine, kappas, thread_count());
  print_warnings(engine.report(kappas.front()).warnings, err);
  std::ostringstream body;
  if (a.format == "json") {
    auto arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(to_json(engine.report(r.kappa)));
    body << nlohmann::json{{"schema_version", kSchemaVersion}, {"kind", "sweep"}, {"rows", arr}}.dump(2)
         << '\n';
  } else {
    write_sweep_csv(rows, body);
  }
  emit(body.str(), a.out, out);
  const bool all_empty = std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.interval.empty; });
  if (all_empty) {
    err << "rdx: every identified set on the grid is empty\n";
    return kExitEmpty;
  }
  return kExitOk;
}

int cmd_falsify(const DataArgs& d, const std::string& test, std::size_t order,
                const std::string& format, const std::string& path, std::ostream& out) {
  const auto table = load_csv(d.data, d.covariates);
  const auto design = DesignSpec::from_table(table);
  if (!design.multi()) throw PreconditionError("falsification tests need a two-cutoff design");
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"kind", "falsify"},
                      {"design", {{"low", design.low}, {"high", design.high}}}};
  std::string text;
  if (test == "global" || test == "both") {
    const auto g = global_parallel_test(table, design, order);
    j["global"] = to_json(g);
    text += render_table(g);
  }
  if (test == "local" || test == "both") {
    const auto l = local_derivative_test(table, design);
    j["local"] = to_json(l);
    if (!text.empty()) text += '\n';
    text += render_table(l);
  }
  const std::string json = j.dump(2) + "\n";
  if (format == "json") {
    out << json;
  } else {
    out << text;
  }
  if (!path.empty()) emit(json, path, out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"rdx: bounds on RD treatment effects away from the cutoff"};
  app.require_subcommand(1);

  std::size_t sim_n = 2000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "write a simulated two-cutoff dataset");
  simulate->add_option("--n", sim_n, "number of rows")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "RNG seed (mt19937_64)")->capture_default_str();
  simulate->add_option("--out", sim_out, "output CSV")->required();

  BoundsArgs bounds_args;
  auto* bounds = app.add_subcommand("bounds", "identified set for one kappa");
  add_bounds_options(*bounds, bounds_args);
  bounds->add_option("--kappa", bounds_args.kappa, "sensitivity parameter")->capture_default_str();
  bounds->add_option("--format", bounds_args.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  BoundsArgs sweep_args;
  sweep_args.format = "csv";
  auto* sweep_cmd = app.add_subcommand("sweep", "identified sets over a kappa grid");
  add_bounds_options(*sweep_cmd, sweep_args);
  sweep_cmd->add_option("--grid", sweep_args.grid, "kappa grid start:end:step")->required();
  sweep_cmd->add_option("--format", sweep_args.format, "csv or json")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  DataArgs falsify_data;
  std::string test = "both", falsify_format = "text", falsify_out;
  std::size_t order = kDefaultGlobalOrder;
  auto* falsify = app.add_subcommand("falsify", "parallel-trend diagnostics for two-cutoff data");
  add_data_options(*falsify, falsify_data);
  falsify->add_option("--test", test, "global, local or both")
      ->check(CLI::IsMember({"global", "local", "both"}))
      ->capture_default_str();
  falsify->add_option("--order", order, "global test polynomial order")->capture_default_str();
  falsify->add_option("--format", falsify_format, "text or json")
      ->check(CLI::IsMember({"text", "json"}))
      ->capture_default_str();
  falsify->add_option("--out", falsify_out, "also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_n, sim_seed, sim_out, out);
    if (*bounds) return cmd_bounds(bounds_args, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep_args, out, err);
    return cmd_falsify(falsify_data, test, order, falsify_format, falsify_out, out);
  } catch (const InsufficientDataError& e) {
    err << "rdx: insufficient data in cell '" << e.cell() << "': " << e.what() << '\n';
    return kExitInsufficient;
  } catch (const DataError& e) {
    err << "rdx: data error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "rdx: error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "rdx: error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace rdx::cli
