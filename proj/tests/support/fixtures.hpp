// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

// Shared test fixtures: the 2022-05-16 dashboard capture and helpers to
// build records from it.

#pragma once

#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fleet/telemetry.hpp"

#ifndef FLEET_TEST_DATA_DIR
#error "FLEET_TEST_DATA_DIR must be defined"
#endif

namespace fleet::testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(FLEET_TEST_DATA_DIR) / name;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

/// "MM-DD HH:MM:SS" local (UTC-6) stamp of the 2022 capture to Unix seconds.
inline std::int64_t capture_stamp_to_unix(const std::string& stamp) {
  std::tm tm{};
  tm.tm_year = 2022 - 1900;
  std::sscanf(stamp.c_str(), "%d-%d %d:%d:%d", &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec);
  tm.tm_mon -= 1;
  return static_cast<std::int64_t>(timegm(&tm)) + 6 * 3600;
}

struct CaptureRow {
  std::string stamp;
  std::int64_t receipt_unix = 0;
  TelemetryRecord record;
};

/// Capture rows in file order (newest first).
inline std::vector<CaptureRow> capture_rows() {
  const auto lines = lines_of(read_file(data_path("dashboard_2022-05-16.csv")));
  std::vector<CaptureRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto parsed = parse_csv_row(lines[i]);
    rows.push_back({parsed.stamp, capture_stamp_to_unix(parsed.stamp), parsed.record});
  }
  return rows;
}

/// Capture as stored records, oldest first, seq 1..13.
inline std::vector<StoredRecord> capture_ascending() {
  auto rows = capture_rows();
  std::vector<StoredRecord> out;
  std::uint64_t seq = 0;
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) out.push_back({it->record, it->receipt_unix, ++seq});
  return out;
}

inline const std::string kCaptureToken = "tok-205";

inline TelemetryRecord sample_record() {
  TelemetryRecord r;
  r.device_id = "CI-205-DDE";
  r.license_plate = "C65892";
  r.axle_location = 2;
  r.device_timestamp = 1652719541;
  r.fix = {13.705933, -89.170845, 1652719541, true};
  r.weight_tons = 0.62;
  return r;
}

/// Random valid record already on the wire grid (6-decimal coordinates,
/// 2-decimal weight).
inline TelemetryRecord random_record(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> lat_u(-90'000'000, 90'000'000);
  std::uniform_int_distribution<std::int64_t> lon_u(-180'000'000, 180'000'000);
  std::uniform_int_distribution<std::int64_t> w_u(0, 1000);
  std::uniform_int_distribution<std::int64_t> ts_u(1, 4'000'000'000);
  std::uniform_int_distribution<int> axle_u(kMinAxle, kMaxAxle);
  std::uniform_int_distribution<int> len_u(1, 24);
  std::uniform_int_distribution<int> ch_u(0, 61);
  std::bernoulli_distribution stale(0.2);
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  auto word = [&] {
    std::string s;
    const int n = len_u(rng);
    for (int i = 0; i < n; ++i) s += kAlphabet[ch_u(rng)];
    if (n > 3) s[static_cast<std::size_t>(n / 2)] = '-';
    return s;
  };
  TelemetryRecord r;
  r.device_id = word();
  r.license_plate = word();
  r.axle_location = axle_u(rng);
  r.device_timestamp = ts_u(rng);
  r.fix.latitude = static_cast<double>(lat_u(rng)) / 1e6;
  r.fix.longitude = static_cast<double>(lon_u(rng)) / 1e6;
  r.fix.fix_valid = !stale(rng);
  r.fix.timestamp = r.fix.fix_valid ? r.device_timestamp : std::max<std::int64_t>(1, r.device_timestamp - 600);
  r.weight_tons = static_cast<double>(w_u(rng)) / 100.0;
  return r;
}

}  // namespace fleet::testing
