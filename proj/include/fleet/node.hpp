// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fleet/geo.hpp"
#include "fleet/link.hpp"
#include "fleet/telemetry.hpp"

namespace fleet {

class NodeConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Median of a Rayleigh(sigma) radial error is sigma * sqrt(2 ln 2).
inline constexpr double kCepToSigma = 1.17741;

enum class SensorKind { DP, DDE };

inline std::string_view to_string(SensorKind k) { return k == SensorKind::DP ? "DP" : "DDE"; }

/// Default per-kind analog noise. The hose-pressure sensor couples road
/// vibration into its reading.
inline double default_weight_noise_volts(SensorKind k) { return k == SensorKind::DP ? 0.0 : 0.02; }

struct WeightCalibration {
  double v_tare = 0.5;
  double v_full = 4.5;
  double full_scale_tons = kMaxWeightTons;

  void validate() const {
    if (!(v_full > v_tare)) throw NodeConfigError("calibration: v_full must exceed v_tare");
    if (!(full_scale_tons > 0.0)) throw NodeConfigError("calibration: full_scale_tons must be > 0");
  }
};

/// Inverse of the linear sensor model, clamped to [0, full_scale_tons].
inline double calibrate(double volts, const WeightCalibration& cal) {
  const double tons = (volts - cal.v_tare) / (cal.v_full - cal.v_tare) * cal.full_scale_tons;
  return std::clamp(tons, 0.0, cal.full_scale_tons);
}

/// Sensor output for a given payload (noise-free forward model).
inline double load_to_volts(double tons, const WeightCalibration& cal) {
  return cal.v_tare + tons / cal.full_scale_tons * (cal.v_full - cal.v_tare);
}

struct NodeConfig {
  std::string device_id;
  std::string license_plate;
  int axle_location = 2;
  double period_minutes = 5.0;
  WeightCalibration calibration;
  SensorKind sensor_kind = SensorKind::DDE;
  std::size_t buffer_capacity = 128;
  double gps_cep_m = 2.5;
  std::optional<double> weight_noise_volts;  // unset: per-kind default
  std::uint64_t rng_seed = 1;

  double period_s() const { return period_minutes * 60.0; }
  double noise_volts() const { return weight_noise_volts.value_or(default_weight_noise_volts(sensor_kind)); }

  void validate() const {
    if (device_id.empty()) throw NodeConfigError("device_id must be non-empty");
    if (license_plate.empty()) throw NodeConfigError("license_plate must be non-empty");
    if (detail::has_unsafe_chars(device_id)) throw NodeConfigError("device_id contains a reserved character");
    if (detail::has_unsafe_chars(license_plate)) throw NodeConfigError("license_plate contains a reserved character");
    if (axle_location < kMinAxle || axle_location > kMaxAxle)
      throw NodeConfigError("axle_location out of range [1, 16]");
    if (!(period_minutes > 0.0)) throw NodeConfigError("reporting period t must be > 0");
    if (buffer_capacity < 1) throw NodeConfigError("buffer_capacity must be >= 1");
    if (!(gps_cep_m >= 0.0)) throw NodeConfigError("gps_cep_m must be >= 0");
    if (weight_noise_volts && !(*weight_noise_volts >= 0.0))
      throw NodeConfigError("weight_noise_volts must be >= 0");
    calibration.validate();
  }
};

enum class NodePhase {
  Boot,
  ConfigGsm,
  ConfigGps,
  ReadSensors,
  FormatPacket,
  ConnectGsm,
  GprsOn,
  PostAndAwait,
  SleepUntilNext,
  RetryWait,
};

inline std::string_view to_string(NodePhase p) {
  switch (p) {
    case NodePhase::Boot: return "Boot";
    case NodePhase::ConfigGsm: return "ConfigGsm";
    case NodePhase::ConfigGps: return "ConfigGps";
    case NodePhase::ReadSensors: return "ReadSensors";
    case NodePhase::FormatPacket: return "FormatPacket";
    case NodePhase::ConnectGsm: return "ConnectGsm";
    case NodePhase::GprsOn: return "GprsOn";
    case NodePhase::PostAndAwait: return "PostAndAwait";
    case NodePhase::SleepUntilNext: return "SleepUntilNext";
    case NodePhase::RetryWait: return "RetryWait";
  }
  return "?";
}

/// The physical world a node measures.
class TruckEnvironment {
 public:
  virtual ~TruckEnvironment() = default;
  virtual LatLon position_at(double sim_s) const = 0;
  virtual double true_load_at(double sim_s) const = 0;
  virtual Coverage coverage_at(double sim_s) const = 0;
  /// Unix seconds corresponding to simulation time (GPS time source).
  virtual std::int64_t unix_time(double sim_s) const = 0;
};

struct BufferedRecord {
  TelemetryRecord record;
  bool deferred = false;  // missed at least one send opportunity
};

struct NodeState {
  NodePhase phase = NodePhase::Boot;
  std::deque<BufferedRecord> buffer;
  std::optional<GeoFix> last_fix;
  double last_fix_sim_s = 0.0;
  double next_action_time = 0.0;
  bool awaiting_response = false;
  std::string pending_payload;
};

struct NodeCounters {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t delivered_after_buffering = 0;
  std::uint64_t dropped = 0;
  std::uint64_t skipped_cycles = 0;
  std::uint64_t posts = 0;
  std::uint64_t failed_posts = 0;
};

struct OutboundPost {
  std::string payload;
  TelemetryRecord record;
  double sent_at = 0.0;
};

/// One simulated truck station running the periodic read/format/post loop.
///
/// Driven by an external scheduler: call step() whenever
/// `now >= state().next_action_time`; a PostAndAwait step returns the
/// request, whose outcome is fed back through handle_response(). Readings are
/// taken on a fixed grid `boot_time + k * t` (k >= 1); sleep and retry both
/// wait for the next grid slot.
class SensorNode {
 public:
  static constexpr int kOk = 200;

  SensorNode(NodeConfig config, double boot_time_s)
      : config_((config.validate(), std::move(config))), boot_time_(boot_time_s), rng_(config_.rng_seed) {
    state_.next_action_time = boot_time_s;
  }

  const NodeConfig& config() const { return config_; }
  const NodeState& state() const { return state_; }
  const NodeCounters& counters() const { return counters_; }

  void enable_trace(bool on = true) { tracing_ = on; }
  const std::vector<NodePhase>& trace() const { return trace_; }

  std::optional<OutboundPost> step(const TruckEnvironment& env, double now) {
    if (state_.awaiting_response) throw std::logic_error("step() while awaiting a response");
    if (now < state_.next_action_time) throw std::logic_error("step() before next_action_time");

    switch (state_.phase) {
      case NodePhase::Boot:
        enter(NodePhase::ConfigGsm, now);
        break;
      case NodePhase::ConfigGsm:
        enter(NodePhase::ConfigGps, now);
        break;
      case NodePhase::ConfigGps:
        enter(NodePhase::ReadSensors, boot_time_ + config_.period_s());
        break;
      case NodePhase::ReadSensors:
        read_sensors(env, now);
        break;
      case NodePhase::FormatPacket:
        if (state_.buffer.empty()) {
          enter(NodePhase::SleepUntilNext, now);
        } else {
          state_.pending_payload = encode_payload(state_.buffer.front().record);
          enter(NodePhase::ConnectGsm, now);
        }
        break;
      case NodePhase::ConnectGsm:
      case NodePhase::GprsOn: {
        const bool gsm = env.coverage_at(now).gsm;
        if (!gsm) {
          enter(NodePhase::RetryWait, now);
        } else {
          enter(state_.phase == NodePhase::ConnectGsm ? NodePhase::GprsOn : NodePhase::PostAndAwait, now);
        }
        break;
      }
      case NodePhase::PostAndAwait: {
        state_.awaiting_response = true;
        state_.next_action_time = std::numeric_limits<double>::infinity();
        ++counters_.posts;
        return OutboundPost{state_.pending_payload, state_.buffer.front().record, now};
      }
      case NodePhase::SleepUntilNext:
        enter(NodePhase::ReadSensors, next_slot_after(now));
        break;
      case NodePhase::RetryWait:
        for (auto& b : state_.buffer) b.deferred = true;
        enter(NodePhase::ReadSensors, next_slot_after(now));
        break;
    }
    return std::nullopt;
  }

  /// Feeds back the HTTP status of the outstanding POST (any non-200,
  /// including a timeout, keeps the record for a retry).
  void handle_response(int status, double now) {
    if (!state_.awaiting_response || state_.phase != NodePhase::PostAndAwait)
      throw std::logic_error("handle_response() without an outstanding POST");
    state_.awaiting_response = false;
    state_.pending_payload.clear();
    if (status == kOk) {
      if (state_.buffer.front().deferred) ++counters_.delivered_after_buffering;
      state_.buffer.pop_front();
      ++counters_.delivered;
      enter(state_.buffer.empty() ? NodePhase::SleepUntilNext : NodePhase::FormatPacket, now);
    } else {
      ++counters_.failed_posts;
      enter(NodePhase::RetryWait, now);
    }
  }

  /// GPS read: truth plus isotropic Gaussian noise when in coverage; the last
  /// fix flagged stale otherwise (none if no fix was ever obtained).
  std::optional<GeoFix> read_gps(const TruckEnvironment& env, double now) {
    if (env.coverage_at(now).gps) {
      const LatLon truth = env.position_at(now);
      LatLon p = truth;
      if (config_.gps_cep_m > 0.0) {
        std::normal_distribution<double> axis(0.0, config_.gps_cep_m / kCepToSigma);
        const double east = axis(rng_);
        const double north = axis(rng_);
        p = geo::LocalFrame(truth).unproject({east, north});
      }
      GeoFix fix{p.lat, p.lon, env.unix_time(now), true};
      state_.last_fix = fix;
      state_.last_fix_sim_s = now;
      return fix;
    }
    if (!state_.last_fix) return std::nullopt;
    GeoFix stale = *state_.last_fix;
    stale.fix_valid = false;
    return stale;
  }

  WeightSample read_weight(const TruckEnvironment& env, double now) {
    const auto& cal = config_.calibration;
    double volts = load_to_volts(env.true_load_at(now), cal);
    if (const double sigma = config_.noise_volts(); sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, sigma);
      volts += noise(rng_);
    }
    volts = std::max(volts, 0.0);
    const double tons = std::min(calibrate(volts, cal), kMaxWeightTons);
    return {volts, canonical_weight(tons)};
  }

 private:
  void enter(NodePhase next, double at) {
    state_.phase = next;
    state_.next_action_time = at;
    if (tracing_) trace_.push_back(next);
  }

  double next_slot_after(double now) const {
    const double k = std::floor((now - boot_time_) / config_.period_s()) + 1.0;
    return boot_time_ + std::max(k, 1.0) * config_.period_s();
  }

  std::int64_t device_clock(const TruckEnvironment& env, double now) const {
    // Free-running clock anchored at the last valid fix.
    if (!state_.last_fix) return env.unix_time(now);
    return state_.last_fix->timestamp + static_cast<std::int64_t>(std::llround(now - state_.last_fix_sim_s));
  }

  void read_sensors(const TruckEnvironment& env, double now) {
    auto fix = read_gps(env, now);
    const WeightSample w = read_weight(env, now);
    if (fix) {
      TelemetryRecord r;
      r.device_id = config_.device_id;
      r.license_plate = config_.license_plate;
      r.axle_location = config_.axle_location;
      r.fix = *fix;
      r.fix.latitude = canonical_coordinate(fix->latitude);
      r.fix.longitude = canonical_coordinate(fix->longitude);
      if (fix->fix_valid) state_.last_fix = r.fix;
      r.device_timestamp = fix->fix_valid ? fix->timestamp : device_clock(env, now);
      r.weight_tons = w.weight_tons;
      if (state_.buffer.size() >= config_.buffer_capacity) {
        state_.buffer.pop_front();
        ++counters_.dropped;
      }
      state_.buffer.push_back({std::move(r), false});
      ++counters_.generated;
    } else {
      ++counters_.skipped_cycles;
    }
    enter(state_.buffer.empty() ? NodePhase::SleepUntilNext : NodePhase::FormatPacket, now);
  }

  NodeConfig config_;
  double boot_time_;
  LinkRng rng_;
  NodeState state_;
  NodeCounters counters_;
  bool tracing_ = false;
  std::vector<NodePhase> trace_;
};

}  // namespace fleet
