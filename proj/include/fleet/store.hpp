// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fleet/telemetry.hpp"

namespace fleet {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QueryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::int64_t kDefaultQueryWindowS = 7 * 24 * 3600;
inline constexpr std::int64_t kDefaultPageSize = 15;

struct TimeRange {
  std::int64_t from = 0;
  std::int64_t to = 0;
  bool contains(std::int64_t t) const { return t >= from && t <= to; }
};

/// Filter plus pagination. Unset bounds default to the 7 days ending `now`.
struct QueryRequest {
  std::string device_id;
  std::optional<std::int64_t> from;
  std::optional<std::int64_t> to;
  std::int64_t page = 1;
  std::int64_t page_size = kDefaultPageSize;

  TimeRange resolve(std::int64_t now) const {
    TimeRange r;
    r.to = to.value_or(from ? std::max(now, *from) : now);
    r.from = from.value_or(r.to - kDefaultQueryWindowS);
    if (r.from > r.to) throw QueryError("from must be <= to");
    if (page < 1) throw QueryError("page must be >= 1");
    if (page_size < 1) throw QueryError("page_size must be >= 1");
    return r;
  }
};

struct QueryPage {
  std::vector<StoredRecord> rows;
  std::size_t total = 0;
  std::int64_t page = 1;
  std::int64_t page_size = kDefaultPageSize;

  /// Dashboard footer, e.g. "1 - 15 of 1525".
  std::string footer() const {
    if (rows.empty()) return "0 - 0 of " + std::to_string(total);
    const auto first = static_cast<std::size_t>((page - 1) * page_size) + 1;
    return std::to_string(first) + " - " + std::to_string(first + rows.size() - 1) + " of " + std::to_string(total);
  }
};

/// Dashboard order: newest device timestamp first, later appends first on ties.
inline bool newest_first(const StoredRecord& a, const StoredRecord& b) {
  if (a.record.device_timestamp != b.record.device_timestamp)
    return a.record.device_timestamp > b.record.device_timestamp;
  return a.seq > b.seq;
}

inline std::string encode_stored(const StoredRecord& s) {
  std::string line = "{\"seq\":" + std::to_string(s.seq) + ",\"receipt_unix\":" + std::to_string(s.receipt_unix) +
                     ",\"record\":" + encode_payload(s.record) + "}";
  return line;
}

inline StoredRecord decode_stored(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("stored", "malformed stored record");
  StoredRecord s;
  s.seq = static_cast<std::uint64_t>(detail::require_integer(j, "seq"));
  s.receipt_unix = detail::require_integer(j, "receipt_unix");
  s.record = detail::record_from_json(detail::require(j, "record"));
  return s;
}

inline nlohmann::json to_json(const StoredRecord& s) {
  return nlohmann::json::parse(encode_stored(s));
}

inline nlohmann::json to_json(const QueryPage& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : p.rows) rows.push_back(to_json(r));
  return {{"rows", std::move(rows)}, {"total", p.total}, {"page", p.page}, {"page_size", p.page_size}};
}

inline QueryPage query_page_from_json(const nlohmann::json& j) {
  QueryPage p;
  for (const auto& row : j.at("rows")) p.rows.push_back(decode_stored(row.dump()));
  p.total = j.at("total").get<std::size_t>();
  p.page = j.at("page").get<std::int64_t>();
  p.page_size = j.at("page_size").get<std::int64_t>();
  return p;
}

/// Append-only per-device telemetry log.
///
/// Each device is one NDJSON file `<dir>/<device>.ndjson`; the in-memory index
/// is rebuilt from those files on construction. An empty directory path keeps
/// everything in memory. Appends to one device are serialized; readers see a
/// consistent prefix of each log.
class TelemetryStore {
 public:
  struct AppendResult {
    std::uint64_t seq = 0;
    bool inserted = false;  // false: (device_id, device_timestamp) already present
  };

  TelemetryStore() = default;

  explicit TelemetryStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw StoreError("cannot create store directory " + dir_.string() + ": " + ec.message());
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.is_regular_file() && entry.path().extension() == ".ndjson") load_file(entry.path());
    }
  }

  TelemetryStore(const TelemetryStore&) = delete;
  TelemetryStore& operator=(const TelemetryStore&) = delete;

  const std::filesystem::path& directory() const { return dir_; }
  bool persistent() const { return !dir_.empty(); }

  /// Appends with the next per-device sequence number (the caller's seq is
  /// ignored). Returns the assigned seq.
  std::uint64_t append(StoredRecord stored) {
    auto& log = log_for(stored.record.device_id);
    std::lock_guard lock(log.write_mutex);
    return write(log, std::move(stored));
  }

  /// Append unless the log already holds the same device timestamp.
  AppendResult append_unique(const TelemetryRecord& record, std::int64_t receipt_unix) {
    auto& log = log_for(record.device_id);
    std::lock_guard lock(log.write_mutex);
    {
      std::shared_lock read(log.read_mutex);
      for (const auto& s : log.records) {
        if (s.record.device_timestamp == record.device_timestamp) return {s.seq, false};
      }
    }
    return {write(log, StoredRecord{record, receipt_unix, 0}), true};
  }

  QueryPage query(const QueryRequest& req, std::int64_t now) const {
    const TimeRange range = req.resolve(now);
    auto matches = select(req.device_id, range);
    std::sort(matches.begin(), matches.end(), newest_first);
    QueryPage page;
    page.total = matches.size();
    page.page = req.page;
    page.page_size = req.page_size;
    const auto offset = static_cast<std::size_t>((req.page - 1) * req.page_size);
    if (offset < matches.size()) {
      const auto end = std::min(matches.size(), offset + static_cast<std::size_t>(req.page_size));
      page.rows.assign(matches.begin() + static_cast<std::ptrdiff_t>(offset),
                       matches.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return page;
  }

  /// All matches in ascending device-time order (analytics order).
  std::vector<StoredRecord> range(const std::string& device_id, TimeRange r) const {
    auto matches = select(device_id, r);
    std::sort(matches.begin(), matches.end(), [](const StoredRecord& a, const StoredRecord& b) {
      return newest_first(b, a);
    });
    return matches;
  }

  std::optional<StoredRecord> latest(const std::string& device_id) const {
    const DeviceLog* log = find(device_id);
    if (!log) return std::nullopt;
    std::shared_lock read(log->read_mutex);
    if (log->records.empty()) return std::nullopt;
    return *std::min_element(log->records.begin(), log->records.end(), newest_first);
  }

  /// Header plus one row per match, newest first. Pagination fields of
  /// `req` are ignored.
  void export_csv(const QueryRequest& req, std::int64_t now, std::ostream& out,
                  int offset_minutes = kDefaultDisplayOffsetMinutes) const {
    auto matches = select(req.device_id, req.resolve(now));
    std::sort(matches.begin(), matches.end(), newest_first);
    out << kCsvHeader << '\n';
    for (const auto& s : matches) out << to_csv_row(s, offset_minutes) << '\n';
    if (!out) throw StoreError("CSV export write failed");
  }

  std::vector<std::string> devices() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : logs_) ids.push_back(id);
    return ids;
  }

  std::size_t size(const std::string& device_id) const {
    const DeviceLog* log = find(device_id);
    if (!log) return 0;
    std::shared_lock read(log->read_mutex);
    return log->records.size();
  }

  /// All records of one device in append order.
  std::vector<StoredRecord> records(const std::string& device_id) const {
    const DeviceLog* log = find(device_id);
    if (!log) return {};
    std::shared_lock read(log->read_mutex);
    return log->records;
  }

  std::filesystem::path file_for(const std::string& device_id) const { return dir_ / (file_stem(device_id) + ".ndjson"); }

  void flush() {
    std::shared_lock lock(map_mutex_);
    for (auto& [_, log] : logs_) {
      std::lock_guard w(log->write_mutex);
      if (log->out.is_open()) log->out.flush();
    }
  }

  /// Filesystem-safe stem: unreserved characters kept, others %XX-escaped.
  static std::string file_stem(const std::string& device_id) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : device_id) {
      if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
        out += static_cast<char>(c);
      } else {
        out += '%';
        out += kHex[c >> 4];
        out += kHex[c & 0xF];
      }
    }
    if (out == "." || out == "..") out = "%2E" + out.substr(1);
    return out;
  }

 private:
  struct DeviceLog {
    mutable std::shared_mutex read_mutex;
    std::mutex write_mutex;
    std::vector<StoredRecord> records;
    std::uint64_t last_seq = 0;
    std::ofstream out;
  };

  const DeviceLog* find(const std::string& device_id) const {
    std::shared_lock lock(map_mutex_);
    auto it = logs_.find(device_id);
    return it == logs_.end() ? nullptr : it->second.get();
  }

  DeviceLog& log_for(const std::string& device_id) {
    {
      std::shared_lock lock(map_mutex_);
      if (auto it = logs_.find(device_id); it != logs_.end()) return *it->second;
    }
    std::unique_lock lock(map_mutex_);
    auto& slot = logs_[device_id];
    if (!slot) slot = std::make_unique<DeviceLog>();
    return *slot;
  }

  std::vector<StoredRecord> select(const std::string& device_id, TimeRange r) const {
    const DeviceLog* log = find(device_id);
    if (!log) return {};
    std::shared_lock read(log->read_mutex);
    std::vector<StoredRecord> out;
    for (const auto& s : log->records) {
      if (r.contains(s.record.device_timestamp)) out.push_back(s);
    }
    return out;
  }

  // Caller holds log.write_mutex.
  std::uint64_t write(DeviceLog& log, StoredRecord stored) {
    validate(stored.record);
    stored.seq = log.last_seq + 1;
    if (persistent()) {
      if (!log.out.is_open()) {
        log.out.open(file_for(stored.record.device_id), std::ios::binary | std::ios::app);
        if (!log.out) throw StoreError("cannot open log for " + stored.record.device_id);
      }
      log.out << encode_stored(stored) << '\n';
      log.out.flush();
      if (!log.out) {
        log.out.close();
        throw StoreError("append failed for " + stored.record.device_id);
      }
    }
    std::unique_lock read(log.read_mutex);
    log.last_seq = stored.seq;
    log.records.push_back(std::move(stored));
    return log.last_seq;
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();

    std::size_t pos = 0;
    std::size_t good_end = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
      const auto nl = content.find('\n', pos);
      if (nl == std::string::npos) break;  // torn final write; truncated below
      ++line_no;
      std::string_view line(content.data() + pos, nl - pos);
      if (!line.empty()) {
        StoredRecord s;
        try {
          s = decode_stored(line);
        } catch (const TelemetryError& e) {
          throw StoreError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        auto& log = log_for(s.record.device_id);
        if (s.seq <= log.last_seq)
          throw StoreError(path.string() + ":" + std::to_string(line_no) + ": non-increasing seq");
        log.last_seq = s.seq;
        log.records.push_back(std::move(s));
      }
      pos = nl + 1;
      good_end = pos;
    }
    in.close();
    if (good_end < content.size()) std::filesystem::resize_file(path, good_end);
  }

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<DeviceLog>> logs_;
};

}  // namespace fleet
