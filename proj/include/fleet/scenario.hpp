// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "fleet/analytics.hpp"
#include "fleet/geo.hpp"
#include "fleet/link.hpp"
#include "fleet/node.hpp"

namespace fleet {

/// Validation failure in a scenario or config document. `line` is 1-based,
/// 0 when the problem is not tied to one location.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string source, int line, const std::string& msg)
      : std::runtime_error(format(source, line, msg)), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& source, int line, const std::string& msg) {
    std::string out = source.empty() ? "<scenario>" : source;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + msg;
  }
  int line_;
};

struct LoadStep {
  double time_s = 0.0;
  double tons = 0.0;
};

struct Route {
  std::string name;
  RoutePlan plan;
  std::vector<double> speeds_kmh;  // one per segment
  CoverageMap coverage;
};

struct TruckSpec {
  NodeConfig node;
  std::string route;
  std::string token;
  double departure_s = 0.0;
  std::vector<LoadStep> load;
  bool explicit_seed = false;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration_s = 7200.0;
  std::int64_t start_unix = 1652716000;
  LinkParams link;
  std::vector<Route> routes;
  std::vector<TruckSpec> trucks;

  const Route* find_route(const std::string& name) const {
    for (const auto& r : routes) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }

  /// Validates cross-references and derives per-truck seeds from `seed`
  /// for trucks without an explicit one.
  void finalize(const std::string& source = {});
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(base ^ (stream * 0xD1B54A32D192ED03ULL)) + index);
}

inline void Scenario::finalize(const std::string& source) {
  auto fail = [&](const std::string& msg) { throw ScenarioError(source, 0, msg); };
  if (!(duration_s > 0.0)) fail("duration must be > 0");
  if (start_unix <= 0) fail("start_unix must be > 0");
  try {
    link.validate();
  } catch (const LinkConfigError& e) {
    fail(std::string("link: ") + e.what());
  }
  if (routes.empty()) fail("at least one route is required");
  std::set<std::string> names;
  for (const auto& r : routes) {
    if (!names.insert(r.name).second) fail("duplicate route name '" + r.name + "'");
    try {
      r.plan.validate();
    } catch (const AnalyticsConfigError& e) {
      fail("route " + r.name + ": " + e.what());
    }
    if (r.speeds_kmh.size() != r.plan.waypoints.size() - 1)
      fail("route " + r.name + ": need one speed per segment");
    for (double v : r.speeds_kmh) {
      if (!(v > 0.0)) fail("route " + r.name + ": speeds must be > 0");
    }
  }
  std::set<std::string> devices;
  for (std::size_t i = 0; i < trucks.size(); ++i) {
    auto& t = trucks[i];
    const std::string where = "trucks[" + std::to_string(i) + "]";
    if (!find_route(t.route)) fail(where + ": unknown route '" + t.route + "'");
    if (!devices.insert(t.node.device_id).second) fail(where + ": duplicate device_id '" + t.node.device_id + "'");
    try {
      t.node.validate();
    } catch (const NodeConfigError& e) {
      fail(where + ": " + e.what());
    }
    if (t.departure_s < 0.0) fail(where + ": departure must be >= 0");
    for (const auto& step : t.load) {
      if (step.time_s < 0.0 || step.time_s > duration_s) fail(where + ": load step time outside duration");
      if (step.tons < 0.0) fail(where + ": load must be >= 0");
    }
    std::stable_sort(t.load.begin(), t.load.end(), [](const LoadStep& a, const LoadStep& b) { return a.time_s < b.time_s; });
    if (t.token.empty()) t.token = "tok-" + t.node.device_id;
    if (!t.explicit_seed) t.node.rng_seed = derive_seed(seed, 1, i);
  }
  for (const auto& r : routes) {
    double length = 0.0;
    for (std::size_t k = 0; k + 1 < r.plan.waypoints.size(); ++k)
      length += geo::haversine_m(r.plan.waypoints[k], r.plan.waypoints[k + 1]);
    try {
      r.coverage.validate(length);
    } catch (const LinkConfigError& e) {
      fail("route " + r.name + ": " + e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Truck motion over a route
// ---------------------------------------------------------------------------

/// Constant speed per segment, linear interpolation between waypoints,
/// parked at the start before departure and at the end after arrival.
class RouteKinematics {
 public:
  RouteKinematics(const Route& route, double departure_s) : route_(&route), departure_(departure_s) {
    const auto& wps = route.plan.waypoints;
    cum_dist_.push_back(0.0);
    cum_time_.push_back(0.0);
    for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
      const double len = geo::haversine_m(wps[i], wps[i + 1]);
      cum_dist_.push_back(cum_dist_.back() + len);
      cum_time_.push_back(cum_time_.back() + len / (route.speeds_kmh[i] / 3.6));
    }
  }

  double length_m() const { return cum_dist_.back(); }

  double distance_at(double sim_s) const {
    const double t = std::clamp(sim_s - departure_, 0.0, cum_time_.back());
    auto it = std::upper_bound(cum_time_.begin(), cum_time_.end(), t);
    const std::size_t seg = std::min<std::size_t>(static_cast<std::size_t>(it - cum_time_.begin()), cum_time_.size() - 1) - 1;
    const double span = cum_time_[seg + 1] - cum_time_[seg];
    const double f = span > 0.0 ? (t - cum_time_[seg]) / span : 0.0;
    return std::min(cum_dist_[seg] + f * (cum_dist_[seg + 1] - cum_dist_[seg]), length_m());
  }

  LatLon position_at(double sim_s) const {
    const double d = distance_at(sim_s);
    const auto& wps = route_->plan.waypoints;
    auto it = std::upper_bound(cum_dist_.begin(), cum_dist_.end(), d);
    std::size_t seg = static_cast<std::size_t>(it - cum_dist_.begin());
    seg = std::clamp<std::size_t>(seg, 1, cum_dist_.size() - 1) - 1;
    const double span = cum_dist_[seg + 1] - cum_dist_[seg];
    const double f = span > 0.0 ? (d - cum_dist_[seg]) / span : 0.0;
    return geo::interpolate(wps[seg], wps[seg + 1], std::clamp(f, 0.0, 1.0));
  }

 private:
  const Route* route_;
  double departure_;
  std::vector<double> cum_dist_;
  std::vector<double> cum_time_;
};

class ScenarioEnvironment : public TruckEnvironment {
 public:
  ScenarioEnvironment(const Scenario& scenario, const TruckSpec& truck)
      : route_(scenario.find_route(truck.route)),
        motion_(*route_, truck.departure_s),
        load_(truck.load),
        start_unix_(scenario.start_unix) {}

  LatLon position_at(double sim_s) const override { return motion_.position_at(sim_s); }

  double true_load_at(double sim_s) const override {
    double tons = 0.0;
    for (const auto& s : load_) {
      if (s.time_s > sim_s) break;
      tons = s.tons;
    }
    return tons;
  }

  Coverage coverage_at(double sim_s) const override {
    return fleet::coverage_at(route_->coverage, motion_.distance_at(sim_s), motion_.length_m());
  }

  std::int64_t unix_time(double sim_s) const override {
    return start_unix_ + static_cast<std::int64_t>(std::floor(sim_s));
  }

  const RouteKinematics& motion() const { return motion_; }

 private:
  const Route* route_;
  RouteKinematics motion_;
  std::vector<LoadStep> load_;
  std::int64_t start_unix_;
};

// ---------------------------------------------------------------------------
// YAML loading
// ---------------------------------------------------------------------------

namespace detail {

class YamlReader {
 public:
  explicit YamlReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    throw ScenarioError(source_, n.IsDefined() ? n.Mark().line + 1 : 0, msg);
  }

  void expect_map(const YAML::Node& n, const std::string& what) const {
    if (!n.IsMap()) fail(n, what + ": expected a mapping");
  }

  void expect_seq(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + ": expected a list");
  }

  /// Rejects keys outside `allowed`.
  void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& what) const {
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, what + ": unknown key '" + key + "'");
    }
  }

  template <typename T>
  T scalar(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + ": expected a scalar value");
    try {
      return n.as<T>();
    } catch (const YAML::Exception&) {
      fail(n, what + ": invalid value '" + n.Scalar() + "'");
    }
  }

  template <typename T>
  std::optional<T> optional(const YAML::Node& parent, const char* key, const std::string& what) const {
    const YAML::Node n = parent[key];
    if (!n.IsDefined() || n.IsNull()) return std::nullopt;
    return scalar<T>(n, what + "." + key);
  }

  template <typename T>
  T required(const YAML::Node& parent, const char* key, const std::string& what) const {
    const YAML::Node n = parent[key];
    if (!n.IsDefined() || n.IsNull()) fail(parent, what + ": missing required key '" + key + "'");
    return scalar<T>(n, what + "." + key);
  }

  LatLon latlon(const YAML::Node& n, const std::string& what) const {
    expect_seq(n, what);
    if (n.size() != 2) fail(n, what + ": expected [lat, lon]");
    LatLon p{scalar<double>(n[0], what), scalar<double>(n[1], what)};
    if (p.lat < -90 || p.lat > 90 || p.lon < -180 || p.lon > 180) fail(n, what + ": coordinate out of range");
    return p;
  }

  std::vector<Gap> gaps(const YAML::Node& n, const std::string& what) const {
    std::vector<Gap> out;
    if (!n.IsDefined() || n.IsNull()) return out;
    expect_seq(n, what);
    for (std::size_t i = 0; i < n.size(); ++i) {
      const auto& g = n[i];
      const std::string w = what + "[" + std::to_string(i) + "]";
      expect_seq(g, w);
      if (g.size() != 2) fail(g, w + ": expected [start_m, end_m]");
      Gap gap{scalar<double>(g[0], w), scalar<double>(g[1], w)};
      if (!(gap.start_m < gap.end_m)) fail(g, w + ": start must be < end");
      out.push_back(gap);
    }
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

inline SensorKind parse_sensor_kind(const YamlReader& rd, const YAML::Node& n, const std::string& what) {
  const auto s = rd.scalar<std::string>(n, what);
  if (s == "DP") return SensorKind::DP;
  if (s == "DDE") return SensorKind::DDE;
  rd.fail(n, what + ": sensor must be DP or DDE");
}

inline Route parse_route(const YamlReader& rd, const YAML::Node& n, const std::string& what) {
  rd.expect_map(n, what);
  rd.check_keys(n, {"name", "corridor_m", "waypoints", "speed_kmh", "speeds_kmh", "coverage"}, what);
  Route r;
  r.name = rd.required<std::string>(n, "name", what);
  r.plan.corridor_m = rd.optional<double>(n, "corridor_m", what).value_or(kDefaultCorridorM);
  if (!(r.plan.corridor_m > 0.0)) rd.fail(n["corridor_m"], what + ": corridor_m must be > 0");
  const auto wps = n["waypoints"];
  if (!wps.IsDefined()) rd.fail(n, what + ": missing required key 'waypoints'");
  rd.expect_seq(wps, what + ".waypoints");
  for (std::size_t i = 0; i < wps.size(); ++i)
    r.plan.waypoints.push_back(rd.latlon(wps[i], what + ".waypoints[" + std::to_string(i) + "]"));
  if (r.plan.waypoints.size() < 2) rd.fail(wps, what + ".waypoints: need at least 2 waypoints");
  const std::size_t segments = r.plan.waypoints.size() - 1;
  if (const auto speeds = n["speeds_kmh"]; speeds.IsDefined()) {
    rd.expect_seq(speeds, what + ".speeds_kmh");
    if (speeds.size() != segments) rd.fail(speeds, what + ".speeds_kmh: need one speed per segment");
    for (std::size_t i = 0; i < speeds.size(); ++i) r.speeds_kmh.push_back(rd.scalar<double>(speeds[i], what + ".speeds_kmh"));
  } else {
    r.speeds_kmh.assign(segments, rd.optional<double>(n, "speed_kmh", what).value_or(60.0));
  }
  for (std::size_t i = 0; i < r.speeds_kmh.size(); ++i) {
    if (!(r.speeds_kmh[i] > 0.0)) rd.fail(n, what + ": speeds must be > 0");
  }
  if (const auto cov = n["coverage"]; cov.IsDefined() && !cov.IsNull()) {
    rd.expect_map(cov, what + ".coverage");
    rd.check_keys(cov, {"gsm_gaps", "gps_gaps"}, what + ".coverage");
    r.coverage.gsm_gaps = rd.gaps(cov["gsm_gaps"], what + ".coverage.gsm_gaps");
    r.coverage.gps_gaps = rd.gaps(cov["gps_gaps"], what + ".coverage.gps_gaps");
  }
  return r;
}

inline TruckSpec parse_truck(const YamlReader& rd, const YAML::Node& n, const std::string& what) {
  rd.expect_map(n, what);
  rd.check_keys(n,
                {"device_id", "license_plate", "token", "route", "axle_location", "period_min", "sensor",
                 "buffer_capacity", "gps_cep_m", "weight_noise_volts", "calibration", "departure_s", "rng_seed",
                 "load"},
                what);
  TruckSpec t;
  auto& c = t.node;
  c.device_id = rd.required<std::string>(n, "device_id", what);
  c.license_plate = rd.required<std::string>(n, "license_plate", what);
  t.route = rd.required<std::string>(n, "route", what);
  t.token = rd.optional<std::string>(n, "token", what).value_or("");
  c.axle_location = rd.optional<int>(n, "axle_location", what).value_or(c.axle_location);
  c.period_minutes = rd.optional<double>(n, "period_min", what).value_or(c.period_minutes);
  if (const auto s = n["sensor"]; s.IsDefined()) c.sensor_kind = parse_sensor_kind(rd, s, what + ".sensor");
  if (auto cap = rd.optional<long long>(n, "buffer_capacity", what)) {
    if (*cap < 1) rd.fail(n["buffer_capacity"], what + ".buffer_capacity: must be >= 1");
    c.buffer_capacity = static_cast<std::size_t>(*cap);
  }
  c.gps_cep_m = rd.optional<double>(n, "gps_cep_m", what).value_or(c.gps_cep_m);
  c.weight_noise_volts = rd.optional<double>(n, "weight_noise_volts", what);
  if (const auto cal = n["calibration"]; cal.IsDefined()) {
    const std::string w = what + ".calibration";
    rd.expect_map(cal, w);
    rd.check_keys(cal, {"v_tare", "v_full", "full_scale_tons"}, w);
    c.calibration.v_tare = rd.optional<double>(cal, "v_tare", w).value_or(c.calibration.v_tare);
    c.calibration.v_full = rd.optional<double>(cal, "v_full", w).value_or(c.calibration.v_full);
    c.calibration.full_scale_tons = rd.optional<double>(cal, "full_scale_tons", w).value_or(c.calibration.full_scale_tons);
  }
  t.departure_s = rd.optional<double>(n, "departure_s", what).value_or(0.0);
  if (auto seed = rd.optional<std::uint64_t>(n, "rng_seed", what)) {
    c.rng_seed = *seed;
    t.explicit_seed = true;
  }
  if (const auto load = n["load"]; load.IsDefined() && !load.IsNull()) {
    rd.expect_seq(load, what + ".load");
    for (std::size_t i = 0; i < load.size(); ++i) {
      const std::string w = what + ".load[" + std::to_string(i) + "]";
      rd.expect_seq(load[i], w);
      if (load[i].size() != 2) rd.fail(load[i], w + ": expected [time_s, tons]");
      t.load.push_back({rd.scalar<double>(load[i][0], w), rd.scalar<double>(load[i][1], w)});
    }
  }
  try {
    c.validate();
  } catch (const NodeConfigError& e) {
    rd.fail(n, what + ": " + e.what());
  }
  return t;
}

}  // namespace detail

/// Parses a scenario document. See docs/scenario-format.md for the grammar.
inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  detail::YamlReader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(source, e.mark.line + 1, e.msg);
  }
  rd.expect_map(root, "scenario");
  rd.check_keys(root, {"name", "seed", "duration_min", "duration_s", "start_unix", "link", "routes", "trucks"},
                "scenario");
  Scenario sc;
  sc.name = rd.optional<std::string>(root, "name", "scenario").value_or(sc.name);
  sc.seed = rd.optional<std::uint64_t>(root, "seed", "scenario").value_or(sc.seed);
  if (auto m = rd.optional<double>(root, "duration_min", "scenario")) sc.duration_s = *m * 60.0;
  if (auto s = rd.optional<double>(root, "duration_s", "scenario")) sc.duration_s = *s;
  if (!(sc.duration_s > 0.0)) rd.fail(root, "scenario: duration must be > 0");
  sc.start_unix = rd.optional<std::int64_t>(root, "start_unix", "scenario").value_or(sc.start_unix);

  if (const auto link = root["link"]; link.IsDefined() && !link.IsNull()) {
    rd.expect_map(link, "link");
    rd.check_keys(link, {"bandwidth_bps", "register_delay_s", "rtt_s", "loss_prob", "response_loss_share"}, "link");
    auto& p = sc.link;
    p.bandwidth_bps = rd.optional<double>(link, "bandwidth_bps", "link").value_or(p.bandwidth_bps);
    p.register_delay_s = rd.optional<double>(link, "register_delay_s", "link").value_or(p.register_delay_s);
    p.rtt_s = rd.optional<double>(link, "rtt_s", "link").value_or(p.rtt_s);
    p.loss_prob = rd.optional<double>(link, "loss_prob", "link").value_or(p.loss_prob);
    p.response_loss_share = rd.optional<double>(link, "response_loss_share", "link").value_or(p.response_loss_share);
    try {
      p.validate();
    } catch (const LinkConfigError& e) {
      rd.fail(link, std::string("link: ") + e.what());
    }
  }

  const auto routes = root["routes"];
  if (!routes.IsDefined()) rd.fail(root, "scenario: missing required key 'routes'");
  rd.expect_seq(routes, "routes");
  for (std::size_t i = 0; i < routes.size(); ++i)
    sc.routes.push_back(detail::parse_route(rd, routes[i], "routes[" + std::to_string(i) + "]"));

  const auto trucks = root["trucks"];
  if (!trucks.IsDefined()) rd.fail(root, "scenario: missing required key 'trucks'");
  rd.expect_seq(trucks, "trucks");
  for (std::size_t i = 0; i < trucks.size(); ++i) {
    auto t = detail::parse_truck(rd, trucks[i], "trucks[" + std::to_string(i) + "]");
    if (!sc.find_route(t.route)) rd.fail(trucks[i]["route"], "trucks[" + std::to_string(i) + "]: unknown route '" + t.route + "'");
    sc.trucks.push_back(std::move(t));
  }
  sc.finalize(source);
  return sc;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path), path.string());
}

}  // namespace fleet
