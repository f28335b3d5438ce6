// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fleet {

class LinkConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// GSM/GPRS path parameters.
struct LinkParams {
  double bandwidth_bps = 85600.0;
  double register_delay_s = 4.0;
  double rtt_s = 1.5;
  double loss_prob = 0.01;
  // Fraction of lost exchanges where only the response was lost, so the
  // service did store the POST.
  double response_loss_share = 0.0;

  /// Extra wait before a node gives up on a response.
  static constexpr double kTimeoutSlackS = 10.0;
  double timeout_s() const { return rtt_s + kTimeoutSlackS; }

  void validate() const {
    if (!(bandwidth_bps > 0.0)) throw LinkConfigError("bandwidth_bps must be > 0");
    if (!(register_delay_s >= 0.0)) throw LinkConfigError("register_delay_s must be >= 0");
    if (!(rtt_s >= 0.0)) throw LinkConfigError("rtt_s must be >= 0");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0))
      throw LinkConfigError("loss_prob must lie in [0, 1]");
    if (!(response_loss_share >= 0.0 && response_loss_share <= 1.0))
      throw LinkConfigError("response_loss_share must lie in [0, 1]");
  }
};

/// Half-open interval [start_m, end_m) of distance along a route.
struct Gap {
  double start_m = 0.0;
  double end_m = 0.0;
  bool contains(double pos_m) const { return pos_m >= start_m && pos_m < end_m; }
};

struct Coverage {
  bool gsm = true;
  bool gps = true;
  bool operator==(const Coverage&) const = default;
};

struct CoverageMap {
  std::vector<Gap> gsm_gaps;
  std::vector<Gap> gps_gaps;

  void validate(double route_length_m) const {
    auto check = [route_length_m](const std::vector<Gap>& gaps, const char* name) {
      for (const auto& g : gaps) {
        if (!(g.start_m < g.end_m))
          throw LinkConfigError(std::string(name) + ": gap start must be < end");
        if (g.start_m < 0.0 || g.end_m > route_length_m)
          throw LinkConfigError(std::string(name) + ": gap outside route length");
      }
    };
    check(gsm_gaps, "gsm_gaps");
    check(gps_gaps, "gps_gaps");
  }
};

inline Coverage coverage_at(const CoverageMap& map, double route_position_m, double route_length_m) {
  if (!(route_position_m >= 0.0 && route_position_m <= route_length_m))
    throw std::out_of_range("route position " + std::to_string(route_position_m) + " m outside route");
  Coverage c;
  for (const auto& g : map.gsm_gaps) c.gsm = c.gsm && !g.contains(route_position_m);
  for (const auto& g : map.gps_gaps) c.gps = c.gps && !g.contains(route_position_m);
  return c;
}

/// Seconds spent serialising `payload_bytes` onto the uplink.
inline double transmission_delay_s(std::size_t payload_bytes, const LinkParams& p) {
  return static_cast<double>(payload_bytes) * 8.0 / p.bandwidth_bps;
}

inline double delivery_delay_s(std::size_t payload_bytes, const LinkParams& p) {
  return p.register_delay_s + transmission_delay_s(payload_bytes, p) + p.rtt_s;
}

struct TransmitOutcome {
  bool delivered = false;
  double delay_s = 0.0;  // response arrival (delivered) or timeout (lost)
  // A lost exchange may have dropped the request or only the response; in
  // the latter case the service still processed the POST.
  bool reached_server = false;
};

using LinkRng = std::mt19937_64;

inline TransmitOutcome transmit(std::size_t payload_bytes, const LinkParams& p, LinkRng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double loss_draw = u(rng);
  const double stage_draw = u(rng);
  TransmitOutcome out;
  if (loss_draw < p.loss_prob) {
    out.delivered = false;
    out.reached_server = stage_draw < p.response_loss_share;
    out.delay_s = p.timeout_s();
  } else {
    out.delivered = true;
    out.reached_server = true;
    out.delay_s = delivery_delay_s(payload_bytes, p);
  }
  return out;
}

/// One node's view of the cellular link: parameters plus its own seeded
/// random stream, so per-node outcomes do not depend on event interleaving.
class LinkSimulator {
 public:
  LinkSimulator(LinkParams params, std::uint64_t seed) : params_(params), rng_(seed) { params_.validate(); }

  const LinkParams& params() const { return params_; }
  TransmitOutcome transmit(std::size_t payload_bytes) { return fleet::transmit(payload_bytes, params_, rng_); }

  /// Time from send until the service sees the request.
  double arrival_offset_s(std::size_t payload_bytes) const {
    return params_.register_delay_s + transmission_delay_s(payload_bytes, params_) + params_.rtt_s / 2.0;
  }

 private:
  LinkParams params_;
  LinkRng rng_;
};

}  // namespace fleet
