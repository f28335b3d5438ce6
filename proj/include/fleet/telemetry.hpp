// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fleet {

inline constexpr double kMaxWeightTons = 10.0;
inline constexpr int kMinAxle = 1;
inline constexpr int kMaxAxle = 16;
inline constexpr int kDefaultDisplayOffsetMinutes = -6 * 60;

// ---------------------------------------------------------------------------
// Errors. Every error carries the name of the offending field (or a short
// reason when no single field is at fault).
// ---------------------------------------------------------------------------

class TelemetryError : public std::runtime_error {
 public:
  TelemetryError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ParseError : public TelemetryError {
 public:
  using TelemetryError::TelemetryError;
};

class SchemaError : public TelemetryError {
 public:
  using TelemetryError::TelemetryError;
};

class ValidationError : public TelemetryError {
 public:
  using TelemetryError::TelemetryError;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

struct GeoFix {
  double latitude = 0.0;
  double longitude = 0.0;
  std::int64_t timestamp = 0;
  bool fix_valid = true;

  LatLon position() const { return {latitude, longitude}; }
  bool operator==(const GeoFix&) const = default;
};

struct WeightSample {
  double raw_value = 0.0;  // volts
  double weight_tons = 0.0;
  bool operator==(const WeightSample&) const = default;
};

struct TelemetryRecord {
  std::string device_id;
  std::string license_plate;
  int axle_location = kMinAxle;
  GeoFix fix;
  double weight_tons = 0.0;
  std::int64_t device_timestamp = 0;

  bool operator==(const TelemetryRecord&) const = default;
};

struct StoredRecord {
  TelemetryRecord record;
  std::int64_t receipt_unix = 0;  // server wall clock, Unix seconds UTC
  std::uint64_t seq = 0;

  bool operator==(const StoredRecord&) const = default;
};

struct AuthToken {
  std::string token;
  std::string device_id;
};

// ---------------------------------------------------------------------------
// Fixed-decimal helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed(double v, int decimals) {
  std::array<char, 64> buf{};
  int n = std::snprintf(buf.data(), buf.size(), "%.*f", decimals, v);
  std::string out(buf.data(), static_cast<std::size_t>(n));
  // "-0.00" and friends render as their positive form.
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

inline std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

inline bool has_unsafe_chars(std::string_view s) {
  for (unsigned char c : s) {
    if (c < 0x20 || c == 0x7f || c == ',' || c == '"') return true;
  }
  return false;
}

}  // namespace detail

/// Rounds to the value the wire format can represent at `decimals` places.
inline double canonical(double v, int decimals) {
  return std::strtod(detail::fixed(v, decimals).c_str(), nullptr);
}

inline double canonical_coordinate(double deg) { return canonical(deg, 6); }
inline double canonical_weight(double tons) { return canonical(tons, 2); }

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate(const GeoFix& fix) {
  if (!std::isfinite(fix.latitude) || fix.latitude < -90.0 || fix.latitude > 90.0)
    throw ValidationError("latitude", "latitude out of range [-90, 90]");
  if (!std::isfinite(fix.longitude) || fix.longitude < -180.0 || fix.longitude > 180.0)
    throw ValidationError("longitude", "longitude out of range [-180, 180]");
  if (fix.timestamp <= 0) throw ValidationError("timestamp", "fix timestamp must be positive");
}

inline void validate(const TelemetryRecord& r) {
  if (r.device_id.empty()) throw ValidationError("device_id", "device_id must be non-empty");
  if (detail::has_unsafe_chars(r.device_id))
    throw ValidationError("device_id", "device_id contains control, comma or quote characters");
  if (r.license_plate.empty())
    throw ValidationError("license_plates", "license plate must be non-empty");
  if (detail::has_unsafe_chars(r.license_plate))
    throw ValidationError("license_plates", "license plate contains control, comma or quote characters");
  if (r.axle_location < kMinAxle || r.axle_location > kMaxAxle)
    throw ValidationError("axel_ubicacion", "axle location out of range [1, 16]");
  validate(r.fix);
  if (!std::isfinite(r.weight_tons) || r.weight_tons < 0.0 || r.weight_tons > kMaxWeightTons)
    throw ValidationError("weight_tons", "weight out of range [0, 10] t");
  if (r.device_timestamp <= 0) throw ValidationError("timestamp", "device timestamp must be positive");
  if (r.fix.fix_valid && r.fix.timestamp != r.device_timestamp)
    throw ValidationError("timestamp", "device timestamp must equal the GPS fix time of a valid fix");
}

// ---------------------------------------------------------------------------
// Wire payload
//
// {"device_id":..,"license_plates":..,"axel_ubicacion":..,"timestamp":..,
//  "latitude":..,"longitude":..,"weight_tons":..}
//
// A stale fix appends "fix_valid":false and "fix_timestamp" (the time of the
// reused fix); a valid fix omits both.
// ---------------------------------------------------------------------------

inline std::string encode_payload(const TelemetryRecord& r) {
  validate(r);
  std::string out;
  out.reserve(192);
  out += "{\"device_id\":";
  out += detail::json_string(r.device_id);
  out += ",\"license_plates\":";
  out += detail::json_string(r.license_plate);
  out += ",\"axel_ubicacion\":";
  out += std::to_string(r.axle_location);
  out += ",\"timestamp\":";
  out += std::to_string(r.device_timestamp);
  out += ",\"latitude\":";
  out += detail::fixed(r.fix.latitude, 6);
  out += ",\"longitude\":";
  out += detail::fixed(r.fix.longitude, 6);
  out += ",\"weight_tons\":";
  out += detail::fixed(r.weight_tons, 2);
  if (!r.fix.fix_valid) {
    out += ",\"fix_valid\":false,\"fix_timestamp\":";
    out += std::to_string(r.fix.timestamp);
  }
  out += '}';
  return out;
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(key, std::string("missing field '") + key + "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) throw SchemaError(key, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

inline std::int64_t require_integer(const nlohmann::json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX))
      throw ValidationError(key, std::string("field '") + key + "' out of range");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer())
    throw SchemaError(key, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline double require_number(const nlohmann::json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_number()) throw SchemaError(key, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline TelemetryRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("payload", "payload must be a JSON object");
  TelemetryRecord r;
  r.device_id = require_string(j, "device_id");
  r.license_plate = require_string(j, "license_plates");
  auto axle = require_integer(j, "axel_ubicacion");
  if (axle < kMinAxle || axle > kMaxAxle)
    throw ValidationError("axel_ubicacion", "axle location out of range [1, 16]");
  r.axle_location = static_cast<int>(axle);
  r.device_timestamp = require_integer(j, "timestamp");
  r.fix.latitude = canonical_coordinate(require_number(j, "latitude"));
  r.fix.longitude = canonical_coordinate(require_number(j, "longitude"));
  r.weight_tons = canonical_weight(require_number(j, "weight_tons"));
  r.fix.fix_valid = true;
  r.fix.timestamp = r.device_timestamp;
  if (auto it = j.find("fix_valid"); it != j.end()) {
    if (!it->is_boolean()) throw SchemaError("fix_valid", "field 'fix_valid' must be a boolean");
    r.fix.fix_valid = it->get<bool>();
  }
  if (!r.fix.fix_valid) r.fix.timestamp = require_integer(j, "fix_timestamp");
  validate(r);
  return r;
}

}  // namespace detail

inline TelemetryRecord decode_payload(std::string_view bytes) {
  if (bytes.empty()) throw ParseError("payload", "empty payload");
  nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw ParseError("payload", "malformed JSON");
  return detail::record_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV (dashboard table layout)
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "stamp,timestamp,axel_ubicacion,latitude,longitude,device_id,license_plates,sensorDDE_";

/// "MM-DD HH:MM:SS" of `unix_seconds` shifted by `offset_minutes`.
inline std::string format_stamp(std::int64_t unix_seconds, int offset_minutes) {
  std::time_t shifted = static_cast<std::time_t>(unix_seconds + std::int64_t{offset_minutes} * 60);
  std::tm tm{};
  gmtime_r(&shifted, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%m-%d %H:%M:%S", &tm);
  return buf.data();
}

inline std::string to_csv_row(const StoredRecord& s, int offset_minutes = kDefaultDisplayOffsetMinutes) {
  const auto& r = s.record;
  std::string out = format_stamp(s.receipt_unix, offset_minutes);
  out += ',';
  out += std::to_string(r.device_timestamp);
  out += ',';
  out += std::to_string(r.axle_location);
  out += ',';
  out += detail::fixed(r.fix.latitude, 6);
  out += ',';
  out += detail::fixed(r.fix.longitude, 6);
  out += ',';
  out += r.device_id;
  out += ',';
  out += r.license_plate;
  out += ',';
  out += detail::fixed(r.weight_tons, 2);
  return out;
}

struct CsvRow {
  std::string stamp;
  TelemetryRecord record;
};

/// Parses one data line in the dashboard column order. Numeric fields may
/// carry fewer decimals than the export writes. The CSV has no fix-validity
/// column, so parsed fixes are valid.
inline CsvRow parse_csv_row(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (cells.size() != 8) throw ParseError("csv", "expected 8 columns, got " + std::to_string(cells.size()));

  auto to_int = [](const std::string& cell, const char* field) -> std::int64_t {
    char* end = nullptr;
    errno = 0;
    long long v = std::strtoll(cell.c_str(), &end, 10);
    if (cell.empty() || *end != '\0' || errno == ERANGE)
      throw ParseError(field, std::string("bad integer in column ") + field);
    return v;
  };
  auto to_double = [](const std::string& cell, const char* field) {
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw ParseError(field, std::string("bad number in column ") + field);
    return v;
  };

  CsvRow row;
  row.stamp = cells[0];
  auto& r = row.record;
  r.device_timestamp = to_int(cells[1], "timestamp");
  r.axle_location = static_cast<int>(to_int(cells[2], "axel_ubicacion"));
  r.fix.latitude = canonical_coordinate(to_double(cells[3], "latitude"));
  r.fix.longitude = canonical_coordinate(to_double(cells[4], "longitude"));
  r.fix.timestamp = r.device_timestamp;
  r.fix.fix_valid = true;
  r.device_id = cells[5];
  r.license_plate = cells[6];
  r.weight_tons = canonical_weight(to_double(cells[7], "sensorDDE_"));
  validate(r);
  return row;
}

}  // namespace fleet
