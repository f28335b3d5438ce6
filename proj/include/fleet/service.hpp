// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fleet/store.hpp"
#include "fleet/telemetry.hpp"

namespace fleet {

inline constexpr std::string_view kTelemetryPath = "/v1/telemetry";
inline constexpr std::string_view kQueryPath = "/v1/query";
inline constexpr std::string_view kExportPath = "/v1/export.csv";

struct CaseInsensitiveLess {
  bool operator()(std::string_view a, std::string_view b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](unsigned char x, unsigned char y) {
      return std::tolower(x) < std::tolower(y);
    });
  }
};

using Headers = std::map<std::string, std::string, CaseInsensitiveLess>;

class ServiceConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable token -> device lookup.
class TokenTable {
 public:
  TokenTable() = default;

  explicit TokenTable(const std::vector<AuthToken>& tokens) {
    for (const auto& t : tokens) {
      if (t.token.empty()) throw ServiceConfigError("empty token");
      if (t.device_id.empty()) throw ServiceConfigError("token '" + t.token + "' has no device_id");
      if (!by_token_.emplace(t.token, t.device_id).second)
        throw ServiceConfigError("duplicate token '" + t.token + "'");
    }
  }

  const std::string* find(const std::string& token) const {
    auto it = by_token_.find(token);
    return it == by_token_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return by_token_.size(); }

 private:
  std::unordered_map<std::string, std::string> by_token_;
};

struct ServiceConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::vector<AuthToken> tokens;
  int display_offset_minutes = kDefaultDisplayOffsetMinutes;
  std::string store_path = "store";
};

/// Extracts the Bearer token and maps it to its device.
inline std::string authenticate(const Headers& headers, const TokenTable& table) {
  auto it = headers.find("Authorization");
  if (it == headers.end() || it->second.empty()) throw AuthError("missing Authorization header");
  std::string_view value = it->second;
  constexpr std::string_view kScheme = "Bearer ";
  if (value.size() <= kScheme.size() ||
      !std::equal(kScheme.begin(), kScheme.end(), value.begin(),
                  [](unsigned char a, unsigned char b) { return std::tolower(a) == std::tolower(b); }))
    throw AuthError("expected Bearer token");
  value.remove_prefix(kScheme.size());
  while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.remove_suffix(1);
  const std::string* device = table.find(std::string(value));
  if (!device) throw AuthError("unknown token");
  return *device;
}

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline std::int64_t wall_clock_unix() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Ingest endpoint logic, independent of the HTTP transport.
class IngestService {
 public:
  using Clock = std::function<std::int64_t()>;

  IngestService(TokenTable tokens, TelemetryStore& store, Clock clock = wall_clock_unix)
      : tokens_(std::move(tokens)), store_(store), clock_(std::move(clock)) {}

  TelemetryStore& store() { return store_; }
  const TelemetryStore& store() const { return store_; }

  HttpResponse handle_post(const Headers& headers, std::string_view body) {
    return handle_post(headers, body, clock_());
  }

  /// `receipt_unix` is the server's time of arrival for the request.
  HttpResponse handle_post(const Headers& headers, std::string_view body, std::int64_t receipt_unix) {
    std::string device;
    try {
      device = authenticate(headers, tokens_);
    } catch (const AuthError& e) {
      return error(401, e.what());
    }
    TelemetryRecord record;
    try {
      record = decode_payload(body);
    } catch (const TelemetryError& e) {
      return error(400, e.field());
    }
    if (record.device_id != device) return error(403, "device_id");
    try {
      store_.append_unique(record, receipt_unix);
    } catch (const std::exception&) {
      return error(503, "store");
    }
    return {200, R"({"status":"ok"})"};
  }

  static HttpResponse error(int status, std::string_view reason) {
    return {status, nlohmann::json{{"error", std::string(reason)}}.dump()};
  }

 private:
  TokenTable tokens_;
  TelemetryStore& store_;
  Clock clock_;
};

}  // namespace fleet
