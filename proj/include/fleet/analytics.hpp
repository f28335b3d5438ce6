// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fleet/geo.hpp"
#include "fleet/store.hpp"
#include "fleet/telemetry.hpp"

namespace fleet {

class AnalyticsConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kDefaultCorridorM = 250.0;
inline constexpr double kDefaultWeightThresholdTons = 0.5;
inline constexpr double kDefaultGapFactor = 3.0;

struct RoutePlan {
  std::vector<LatLon> waypoints;
  double corridor_m = kDefaultCorridorM;

  void validate() const {
    if (waypoints.size() < 2) throw AnalyticsConfigError("route plan needs at least 2 waypoints");
    if (!(corridor_m > 0.0)) throw AnalyticsConfigError("corridor_m must be > 0");
  }

  /// Minimum cross-track distance from `p` over all plan segments.
  double distance_to_route_m(LatLon p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
      if (waypoints[i] == waypoints[i + 1]) {
        best = std::min(best, geo::haversine_m(p, waypoints[i]));
      } else {
        best = std::min(best, geo::cross_track_distance_m(p, waypoints[i], waypoints[i + 1]));
      }
    }
    return best;
  }
};

struct DepotZone {
  LatLon center;
  double radius_m = 0.0;
  bool contains(LatLon p) const { return geo::haversine_m(center, p) <= radius_m; }
};

enum class AnomalyKind { RouteDeviation, WeightChange, LinkGap };

inline std::string_view to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::RouteDeviation: return "route_deviation";
    case AnomalyKind::WeightChange: return "weight_change";
    case AnomalyKind::LinkGap: return "link_gap";
  }
  return "?";
}

struct AnomalyEvent {
  AnomalyKind kind = AnomalyKind::LinkGap;
  std::int64_t start = 0;  // device timestamps
  std::int64_t end = 0;
  double magnitude = 0.0;  // meters off route, net delta tons, or gap seconds
  std::vector<std::size_t> records;  // indices into the analysed sequence

  bool operator==(const AnomalyEvent&) const = default;
};

using RecordSpan = std::span<const StoredRecord>;

inline double haversine_m(LatLon a, LatLon b) { return geo::haversine_m(a, b); }

inline double cross_track_distance_m(LatLon p, LatLon a, LatLon b) {
  if (a == b) throw AnalyticsConfigError("segment endpoints must differ");
  return geo::cross_track_distance_m(p, a, b);
}

/// Sum of great-circle hops between consecutive valid fixes.
inline double track_distance_km(RecordSpan records) {
  double meters = 0.0;
  const StoredRecord* prev = nullptr;
  for (const auto& s : records) {
    if (!s.record.fix.fix_valid) continue;
    if (prev) meters += geo::haversine_m(prev->record.fix.position(), s.record.fix.position());
    prev = &s;
  }
  return meters / 1000.0;
}

/// Maximal runs of consecutive valid fixes lying farther than the corridor
/// from every segment of the plan.
inline std::vector<AnomalyEvent> route_deviation_events(RecordSpan records, const RoutePlan& plan) {
  plan.validate();
  std::vector<AnomalyEvent> events;
  std::optional<AnomalyEvent> open;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i].record;
    if (!r.fix.fix_valid) continue;
    const double d = plan.distance_to_route_m(r.fix.position());
    if (d > plan.corridor_m) {
      if (!open) open = AnomalyEvent{AnomalyKind::RouteDeviation, r.device_timestamp, r.device_timestamp, d, {}};
      open->end = r.device_timestamp;
      open->magnitude = std::max(open->magnitude, d);
      open->records.push_back(i);
    } else if (open) {
      events.push_back(std::move(*open));
      open.reset();
    }
  }
  if (open) events.push_back(std::move(*open));
  return events;
}

namespace detail {

inline std::int64_t centitons(double tons) { return std::llround(tons * 100.0); }

inline bool in_any_zone(LatLon p, std::span<const DepotZone> zones) {
  return std::any_of(zones.begin(), zones.end(), [p](const DepotZone& z) { return z.contains(p); });
}

}  // namespace detail

/// Weight-change anomalies.
///
/// Consecutive pairs are grouped into maximal runs that move in one
/// direction (every step strictly up or strictly down). A run is an event
/// when at least one of its steps exceeds `threshold_tons`; its magnitude is
/// the net change across the run. Pairs touching a depot zone are legitimate
/// load changes and break a run.
inline std::vector<AnomalyEvent> weight_change_events(RecordSpan records, double threshold_tons,
                                                      std::span<const DepotZone> depots = {}) {
  if (!(threshold_tons >= 0.0)) throw AnalyticsConfigError("weight threshold must be >= 0");
  std::vector<AnomalyEvent> events;
  const double threshold_c = threshold_tons * 100.0;

  std::size_t run_start = 0;
  int run_sign = 0;
  bool run_triggers = false;
  auto close_run = [&](std::size_t end_index) {
    if (run_sign != 0 && run_triggers) {
      AnomalyEvent e;
      e.kind = AnomalyKind::WeightChange;
      e.start = records[run_start].record.device_timestamp;
      e.end = records[end_index].record.device_timestamp;
      e.magnitude = static_cast<double>(detail::centitons(records[end_index].record.weight_tons) -
                                        detail::centitons(records[run_start].record.weight_tons)) /
                    100.0;
      for (std::size_t k = run_start; k <= end_index; ++k) e.records.push_back(k);
      events.push_back(std::move(e));
    }
    run_sign = 0;
    run_triggers = false;
  };

  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const auto& a = records[i].record;
    const auto& b = records[i + 1].record;
    const std::int64_t delta = detail::centitons(b.weight_tons) - detail::centitons(a.weight_tons);
    const int sign = (delta > 0) - (delta < 0);
    const bool excluded = detail::in_any_zone(a.fix.position(), depots) || detail::in_any_zone(b.fix.position(), depots);
    if (excluded || sign == 0) {
      close_run(i);
      continue;
    }
    if (sign != run_sign) {
      close_run(i);
      run_start = i;
      run_sign = sign;
    }
    if (static_cast<double>(std::llabs(delta)) > threshold_c) run_triggers = true;
  }
  if (!records.empty()) close_run(records.size() - 1);
  return events;
}

/// One event per consecutive pair further apart than factor * expected period.
inline std::vector<AnomalyEvent> link_gap_events(RecordSpan records, double expected_t_s,
                                                 double factor = kDefaultGapFactor) {
  if (!(factor > 1.0)) throw AnalyticsConfigError("gap factor must be > 1");
  if (!(expected_t_s > 0.0)) throw AnalyticsConfigError("expected period must be > 0");
  std::vector<AnomalyEvent> events;
  for (std::size_t i = 0; i + 1 < records.size(); ++i) {
    const auto t0 = records[i].record.device_timestamp;
    const auto t1 = records[i + 1].record.device_timestamp;
    const double gap = static_cast<double>(t1 - t0);
    if (gap > factor * expected_t_s) events.push_back({AnomalyKind::LinkGap, t0, t1, gap, {i, i + 1}});
  }
  return events;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportOptions {
  std::optional<RoutePlan> plan;
  double weight_threshold_tons = kDefaultWeightThresholdTons;
  std::vector<DepotZone> depots;
  double expected_period_s = 300.0;
  double gap_factor = kDefaultGapFactor;
};

struct Report {
  std::string device_id;
  std::size_t record_count = 0;
  double distance_km = 0.0;
  std::optional<std::int64_t> first_timestamp;
  std::optional<std::int64_t> last_timestamp;
  std::vector<AnomalyEvent> deviations;
  std::vector<AnomalyEvent> weight_changes;
  std::vector<AnomalyEvent> link_gaps;
};

/// `records` ascending by device timestamp.
inline Report summarize(std::string device_id, RecordSpan records, const ReportOptions& opt = {}) {
  Report rep;
  rep.device_id = std::move(device_id);
  rep.record_count = records.size();
  if (records.empty()) return rep;
  rep.first_timestamp = records.front().record.device_timestamp;
  rep.last_timestamp = records.back().record.device_timestamp;
  rep.distance_km = track_distance_km(records);
  if (opt.plan) rep.deviations = route_deviation_events(records, *opt.plan);
  rep.weight_changes = weight_change_events(records, opt.weight_threshold_tons, opt.depots);
  rep.link_gaps = link_gap_events(records, opt.expected_period_s, opt.gap_factor);
  return rep;
}

inline Report report(const TelemetryStore& store, const std::string& device_id, TimeRange range,
                     const ReportOptions& opt = {}) {
  const auto records = store.range(device_id, range);
  return summarize(device_id, records, opt);
}

inline nlohmann::json to_json(const AnomalyEvent& e) {
  return {{"kind", std::string(to_string(e.kind))},
          {"start", e.start},
          {"end", e.end},
          {"magnitude", e.magnitude},
          {"records", e.records}};
}

inline nlohmann::json to_json(const Report& r) {
  auto list = [](const std::vector<AnomalyEvent>& events) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& e : events) a.push_back(to_json(e));
    return a;
  };
  nlohmann::json j{{"device_id", r.device_id},
                   {"record_count", r.record_count},
                   {"distance_km", r.distance_km},
                   {"first_timestamp", nullptr},
                   {"last_timestamp", nullptr},
                   {"deviation_events", list(r.deviations)},
                   {"weight_events", list(r.weight_changes)},
                   {"link_gaps", list(r.link_gaps)}};
  if (r.first_timestamp) j["first_timestamp"] = *r.first_timestamp;
  if (r.last_timestamp) j["last_timestamp"] = *r.last_timestamp;
  return j;
}

inline std::string to_text(const Report& r) {
  char buf[160];
  std::string out = "device " + r.device_id + "\n";
  out += "  records:      " + std::to_string(r.record_count) + "\n";
  std::snprintf(buf, sizeof buf, "  distance:     %.3f km\n", r.distance_km);
  out += buf;
  if (r.first_timestamp) {
    out += "  first:        " + std::to_string(*r.first_timestamp) + "\n";
    out += "  last:         " + std::to_string(*r.last_timestamp) + "\n";
  }
  auto section = [&](const char* title, const std::vector<AnomalyEvent>& events, const char* unit) {
    out += std::string("  ") + title + std::to_string(events.size()) + "\n";
    for (const auto& e : events) {
      std::snprintf(buf, sizeof buf, "    %lld .. %lld  %+.2f %s\n", static_cast<long long>(e.start),
                    static_cast<long long>(e.end), e.magnitude, unit);
      out += buf;
    }
  };
  section("route deviations: ", r.deviations, "m");
  section("weight changes:   ", r.weight_changes, "t");
  section("link gaps:        ", r.link_gaps, "s");
  return out;
}

}  // namespace fleet
