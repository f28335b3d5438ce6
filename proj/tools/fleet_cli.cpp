// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

// fleet: simulate, serve, query, export, report.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or I/O error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fleet/config.hpp"
#include "fleet/fleet.hpp"
#include "fleet/http.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Anything the user could fix by changing their input.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct Globals {
  std::string store = "store";
  std::string config;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

struct Range {
  std::optional<std::int64_t> from;
  std::optional<std::int64_t> to;

  // The CLI covers the whole history unless told otherwise; the HTTP query
  // endpoint keeps its 7-day default.
  fleet::TimeRange resolve() const {
    fleet::TimeRange r{from.value_or(0), to.value_or(std::numeric_limits<std::int64_t>::max() / 2)};
    if (r.from > r.to) throw fleet::QueryError("--from must be <= --to");
    return r;
  }
};

void add_range(CLI::App* cmd, Range& r) {
  cmd->add_option("--from", r.from, "Start, Unix seconds (inclusive)");
  cmd->add_option("--to", r.to, "End, Unix seconds (inclusive)");
}

std::string store_path(const Globals& g) {
  if (!g.config.empty() && g.store == "store") return fleet::load_service_config(g.config).store_path;
  return g.store;
}

fleet::DepotZone parse_depot(const std::string& text) {
  fleet::DepotZone z;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf,%lf,%lf%c", &z.center.lat, &z.center.lon, &z.radius_m, &tail) != 3 ||
      !(z.radius_m > 0.0))
    throw UsageError("--depot expects LAT,LON,RADIUS_M, got '" + text + "'");
  return z;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::string url;
  bool json = false;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
  auto sc = fleet::load_scenario(a.scenario);
  if (g.seed) {
    sc.seed = *g.seed;
    sc.finalize(a.scenario);
  }
  fleet::RunSummary summary;
  if (a.url.empty()) {
    fleet::TelemetryStore store(store_path(g));
    summary = fleet::run_in_process(sc, store);
  } else {
    fleet::HttpSink sink(a.url);
    fleet::Simulation sim(sc, sink);
    summary = sim.run();
  }
  if (a.json) {
    std::cout << fleet::to_json(summary).dump(2) << "\n";
  } else {
    std::printf("scenario %s (seed %llu)\n", sc.name.c_str(), static_cast<unsigned long long>(sc.seed));
    std::printf("  generated:               %llu\n", static_cast<unsigned long long>(summary.generated));
    std::printf("  delivered:               %llu\n", static_cast<unsigned long long>(summary.delivered));
    std::printf("  buffered then delivered: %llu\n", static_cast<unsigned long long>(summary.delivered_after_buffering));
    std::printf("  dropped:                 %llu\n", static_cast<unsigned long long>(summary.dropped));
    std::printf("  still buffered:          %llu\n", static_cast<unsigned long long>(summary.still_buffered));
    if (g.verbose) {
      for (const auto& t : summary.trucks)
        std::printf("  %-20s generated %llu delivered %llu dropped %llu posts %llu failed %llu\n", t.device_id.c_str(),
                    static_cast<unsigned long long>(t.counters.generated),
                    static_cast<unsigned long long>(t.counters.delivered),
                    static_cast<unsigned long long>(t.counters.dropped),
                    static_cast<unsigned long long>(t.counters.posts),
                    static_cast<unsigned long long>(t.counters.failed_posts));
    }
  }
  return kExitOk;
}

struct ServeArgs {
  std::string bind;
  std::optional<int> port;
};

int run_serve(const Globals& g, const ServeArgs& a) {
  if (g.config.empty()) throw UsageError("serve needs --config");
  auto cfg = fleet::load_service_config(g.config);
  if (!a.bind.empty()) cfg.bind_address = a.bind;
  if (a.port) cfg.port = *a.port;
  if (g.store != "store") cfg.store_path = g.store;

  fleet::TelemetryStore store(cfg.store_path);
  fleet::IngestService service(fleet::TokenTable(cfg.tokens), store);
  fleet::HttpServer server(service, cfg.display_offset_minutes);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int port = server.start(cfg.bind_address, cfg.port);
  std::printf("listening on %s:%d\n", cfg.bind_address.c_str(), port);
  if (g.verbose) std::printf("store %s, %zu tokens\n", cfg.store_path.c_str(), cfg.tokens.size());
  std::fflush(stdout);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  store.flush();
  std::printf("stopped\n");
  return kExitOk;
}

struct QueryArgs {
  std::string device;
  Range range;
  std::int64_t page = 1;
  std::int64_t page_size = fleet::kDefaultPageSize;
  bool json = false;
};

int run_query(const Globals& g, const QueryArgs& a) {
  fleet::TelemetryStore store(store_path(g));
  const auto r = a.range.resolve();
  const auto page = store.query({a.device, r.from, r.to, a.page, a.page_size}, 0);
  if (a.json) {
    std::cout << fleet::to_json(page).dump(2) << "\n";
    return kExitOk;
  }
  std::cout << fleet::kCsvHeader << "\n";
  for (const auto& row : page.rows) std::cout << fleet::to_csv_row(row) << "\n";
  std::cout << page.footer() << "\n";
  return kExitOk;
}

struct ExportArgs {
  std::string device;
  Range range;
  std::string out;
  int offset_minutes = fleet::kDefaultDisplayOffsetMinutes;
};

void write_csv(const fleet::TelemetryStore& store, const std::string& device, fleet::TimeRange r,
               const std::string& out, int offset) {
  const fleet::QueryRequest q{device, r.from, r.to};
  if (out.empty() || out == "-") {
    store.export_csv(q, 0, std::cout, offset);
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw fleet::StoreError("cannot write " + out);
  store.export_csv(q, 0, f, offset);
}

int run_export(const Globals& g, const ExportArgs& a) {
  fleet::TelemetryStore store(store_path(g));
  write_csv(store, a.device, a.range.resolve(), a.out, a.offset_minutes);
  return kExitOk;
}

struct ReportArgs {
  std::string device;
  Range range;
  double weight_threshold = fleet::kDefaultWeightThresholdTons;
  double gap_factor = fleet::kDefaultGapFactor;
  std::optional<double> period_min;
  std::string scenario;
  std::string route;
  std::optional<double> corridor_m;
  std::vector<std::string> depots;
  bool json = false;
  std::string csv;
};

int run_report(const Globals& g, const ReportArgs& a) {
  fleet::ReportOptions opt;
  opt.weight_threshold_tons = a.weight_threshold;
  opt.gap_factor = a.gap_factor;
  double period_min = 5.0;
  if (!a.scenario.empty()) {
    const auto sc = fleet::load_scenario(a.scenario);
    std::string route = a.route;
    for (const auto& t : sc.trucks) {
      if (t.node.device_id != a.device) continue;
      if (route.empty()) route = t.route;
      period_min = t.node.period_minutes;
    }
    if (route.empty() && sc.routes.size() == 1) route = sc.routes[0].name;
    if (route.empty()) throw UsageError("--route is required: device not in scenario");
    const auto* r = sc.find_route(route);
    if (!r) throw UsageError("route '" + route + "' not in scenario");
    opt.plan = r->plan;
  } else if (!a.route.empty()) {
    throw UsageError("--route needs --scenario");
  }
  if (a.corridor_m) {
    if (!opt.plan) throw UsageError("--corridor needs --scenario");
    opt.plan->corridor_m = *a.corridor_m;
  }
  if (a.period_min) period_min = *a.period_min;
  if (!(period_min > 0.0)) throw UsageError("--period must be > 0");
  opt.expected_period_s = period_min * 60.0;
  for (const auto& d : a.depots) opt.depots.push_back(parse_depot(d));

  fleet::TelemetryStore store(store_path(g));
  const auto range = a.range.resolve();
  const auto rep = fleet::report(store, a.device, range, opt);
  if (a.json) {
    std::cout << fleet::to_json(rep).dump(2) << "\n";
  } else {
    std::cout << fleet::to_text(rep);
  }
  if (!a.csv.empty()) write_csv(store, a.device, range, a.csv, fleet::kDefaultDisplayOffsetMinutes);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Freight telemetry: simulate trucks, serve ingest, query and analyse records"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--store", g.store, "Store directory")->capture_default_str();
  app.add_option("--config", g.config, "Service config file (YAML)");
  app.add_option("--seed", g.seed, "Override the scenario seed");
  app.add_flag("-v,--verbose", g.verbose, "More output");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a scenario in-process or against a live service");
  c_sim->add_option("scenario", sim.scenario, "Scenario file")->required();
  c_sim->add_option("--url", sim.url, "Live service base URL, e.g. http://127.0.0.1:8080");
  c_sim->add_flag("--json", sim.json, "Print the summary as JSON");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the ingest and query service until interrupted");
  c_serve->add_option("--bind", serve.bind, "Bind address (overrides config)");
  c_serve->add_option("--port", serve.port, "Port, 0 picks a free one (overrides config)");

  QueryArgs query;
  auto* c_query = app.add_subcommand("query", "List a device's records, newest first");
  c_query->add_option("--device", query.device, "Device id")->required();
  add_range(c_query, query.range);
  c_query->add_option("--page", query.page, "Page number, from 1")->capture_default_str();
  c_query->add_option("--page-size", query.page_size, "Rows per page")->capture_default_str();
  c_query->add_flag("--json", query.json, "Print the page as JSON");

  ExportArgs exp;
  auto* c_export = app.add_subcommand("export", "Write a device's records as dashboard CSV");
  c_export->add_option("--device", exp.device, "Device id")->required();
  add_range(c_export, exp.range);
  c_export->add_option("--out", exp.out, "Output file (default stdout)");
  c_export->add_option("--offset-minutes", exp.offset_minutes, "Display time zone offset")->capture_default_str();

  ReportArgs rep;
  auto* c_report = app.add_subcommand("report", "Distance and anomaly report for one device");
  c_report->add_option("--device", rep.device, "Device id")->required();
  add_range(c_report, rep.range);
  c_report->add_option("--weight-threshold", rep.weight_threshold, "Tons")->capture_default_str();
  c_report->add_option("--gap-factor", rep.gap_factor, "Gap = factor x reporting period")->capture_default_str();
  c_report->add_option("--period", rep.period_min, "Expected reporting period, minutes (default 5)");
  c_report->add_option("--scenario", rep.scenario, "Scenario file holding the planned route");
  c_report->add_option("--route", rep.route, "Route name in --scenario");
  c_report->add_option("--corridor", rep.corridor_m, "Corridor half-width, meters");
  c_report->add_option("--depot", rep.depots, "Depot zone LAT,LON,RADIUS_M (repeatable)");
  c_report->add_flag("--json", rep.json, "Print the report as JSON");
  c_report->add_option("--csv", rep.csv, "Also write the records as CSV to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*c_sim) return run_simulate(g, sim);
    if (*c_serve) return run_serve(g, serve);
    if (*c_query) return run_query(g, query);
    if (*c_export) return run_export(g, exp);
    if (*c_report) return run_report(g, rep);
  } catch (const fleet::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fleet::TelemetryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {  // config, query, telemetry and usage errors
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
