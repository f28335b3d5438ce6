// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fleet/service.hpp"
#include "fleet/simulation.hpp"
#include "fleet/store.hpp"

namespace fleet {

class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Headers to_headers(const httplib::Headers& in) {
  Headers out;
  for (const auto& [k, v] : in) out.emplace(k, v);
  return out;
}

inline QueryRequest query_from_params(const httplib::Request& req) {
  QueryRequest q;
  if (!req.has_param("device_id")) throw QueryError("device_id is required");
  q.device_id = req.get_param_value("device_id");
  auto integer = [&](const char* name) -> std::optional<std::int64_t> {
    if (!req.has_param(name)) return std::nullopt;
    const std::string v = req.get_param_value(name);
    std::size_t used = 0;
    long long parsed = 0;
    try {
      parsed = std::stoll(v, &used);
    } catch (const std::exception&) {
      throw QueryError(std::string(name) + " must be an integer");
    }
    if (used != v.size()) throw QueryError(std::string(name) + " must be an integer");
    return parsed;
  };
  q.from = integer("from");
  q.to = integer("to");
  q.page = integer("page").value_or(1);
  q.page_size = integer("page_size").value_or(kDefaultPageSize);
  return q;
}

}  // namespace detail

/// HTTP/1.1 front end: POST /v1/telemetry, GET /v1/query, GET /v1/export.csv.
/// Receipt stamps come from the service's clock; `clock` only anchors the
/// default query window.
class HttpServer {
 public:
  HttpServer(IngestService& service, int display_offset_minutes = kDefaultDisplayOffsetMinutes,
             IngestService::Clock clock = wall_clock_unix)
      : service_(service), offset_minutes_(display_offset_minutes), clock_(std::move(clock)) {
    server_.Post(std::string(kTelemetryPath), [this](const httplib::Request& req, httplib::Response& res) {
      const auto r = service_.handle_post(detail::to_headers(req.headers), req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    });
    server_.Get(std::string(kQueryPath), [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto page = service_.store().query(detail::query_from_params(req), clock_());
        res.set_content(to_json(page).dump(), "application/json");
      } catch (const QueryError& e) {
        res.status = 400;
        res.set_content(IngestService::error(400, e.what()).body, "application/json");
      }
    });
    server_.Get(std::string(kExportPath), [this](const httplib::Request& req, httplib::Response& res) {
      try {
        std::ostringstream out;
        service_.store().export_csv(detail::query_from_params(req), clock_(), out, offset_minutes_);
        res.set_content(out.str(), "text/csv");
      } catch (const QueryError& e) {
        res.status = 400;
        res.set_content(IngestService::error(400, e.what()).body, "application/json");
      } catch (const StoreError&) {
        res.status = 503;
        res.set_content(IngestService::error(503, "store").body, "application/json");
      }
    });
  }

  ~HttpServer() { stop(); }

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else if (server_.bind_to_port(host, port)) {
      port_ = port;
    } else {
      port_ = -1;
    }
    if (port_ <= 0) throw ConnectionError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  int port() const { return port_; }

 private:
  IngestService& service_;
  int offset_minutes_;
  IngestService::Clock clock_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

/// Client side of the wire contract.
class TelemetryClient {
 public:
  explicit TelemetryClient(const std::string& base_url) : client_(base_url) {
    client_.set_connection_timeout(std::chrono::seconds(5));
    client_.set_read_timeout(std::chrono::seconds(10));
  }

  int post(const std::string& token, const std::string& payload) {
    httplib::Headers h{{"Authorization", "Bearer " + token}};
    auto res = client_.Post(std::string(kTelemetryPath), h, payload, "application/json");
    if (!res) throw ConnectionError("POST failed: " + httplib::to_string(res.error()));
    return res->status;
  }

  QueryPage query(const QueryRequest& q) {
    auto res = client_.Get(std::string(kQueryPath), params(q), httplib::Headers{});
    if (!res) throw ConnectionError("GET failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ConnectionError("query returned HTTP " + std::to_string(res->status));
    return query_page_from_json(nlohmann::json::parse(res->body));
  }

  std::string export_csv(const QueryRequest& q) {
    auto res = client_.Get(std::string(kExportPath), params(q), httplib::Headers{});
    if (!res) throw ConnectionError("GET failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ConnectionError("export returned HTTP " + std::to_string(res->status));
    return res->body;
  }

 private:
  static httplib::Params params(const QueryRequest& q) {
    httplib::Params p{{"device_id", q.device_id},
                      {"page", std::to_string(q.page)},
                      {"page_size", std::to_string(q.page_size)}};
    if (q.from) p.emplace("from", std::to_string(*q.from));
    if (q.to) p.emplace("to", std::to_string(*q.to));
    return p;
  }

  httplib::Client client_;
};

/// Sends simulated POSTs to a live service.
class HttpSink : public PostSink {
 public:
  explicit HttpSink(const std::string& base_url) : client_(base_url) {}

  int deliver(const TruckSpec& truck, const OutboundPost& post, std::int64_t) override {
    return client_.post(truck.token, post.payload);
  }

 private:
  TelemetryClient client_;
};

}  // namespace fleet
