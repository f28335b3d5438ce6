// Copyright 2026 The fleetwatch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "fleet/link.hpp"
#include "fleet/node.hpp"
#include "fleet/scenario.hpp"
#include "fleet/service.hpp"

namespace fleet {

/// Where simulated POSTs go. Returns the HTTP status the service answered.
class PostSink {
 public:
  virtual ~PostSink() = default;
  virtual int deliver(const TruckSpec& truck, const OutboundPost& post, std::int64_t arrival_unix) = 0;
};

/// Feeds an in-process IngestService; the receipt stamp is the simulated
/// arrival time, so stores are a pure function of the scenario.
class InProcessSink : public PostSink {
 public:
  explicit InProcessSink(IngestService& service) : service_(service) {}

  int deliver(const TruckSpec& truck, const OutboundPost& post, std::int64_t arrival_unix) override {
    Headers h{{"Authorization", "Bearer " + truck.token}, {"Content-Type", "application/json"}};
    return service_.handle_post(h, post.payload, arrival_unix).status;
  }

 private:
  IngestService& service_;
};

inline TokenTable scenario_tokens(const Scenario& sc) {
  std::vector<AuthToken> tokens;
  for (const auto& t : sc.trucks) tokens.push_back({t.token, t.node.device_id});
  return TokenTable(tokens);
}

struct TruckSummary {
  std::string device_id;
  NodeCounters counters;
  std::size_t still_buffered = 0;
};

struct RunSummary {
  std::vector<TruckSummary> trucks;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t delivered_after_buffering = 0;
  std::uint64_t dropped = 0;
  std::uint64_t still_buffered = 0;
  std::uint64_t posts = 0;
  std::uint64_t lost = 0;
  double end_time_s = 0.0;

  bool balanced() const { return generated == delivered + still_buffered + dropped; }
};

inline nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json trucks = nlohmann::json::array();
  for (const auto& t : s.trucks) {
    trucks.push_back({{"device_id", t.device_id},
                      {"generated", t.counters.generated},
                      {"delivered", t.counters.delivered},
                      {"buffered_then_delivered", t.counters.delivered_after_buffering},
                      {"dropped", t.counters.dropped},
                      {"still_buffered", t.still_buffered},
                      {"skipped_cycles", t.counters.skipped_cycles},
                      {"posts", t.counters.posts},
                      {"failed_posts", t.counters.failed_posts}});
  }
  return {{"generated", s.generated},   {"delivered", s.delivered},
          {"buffered_then_delivered", s.delivered_after_buffering},
          {"dropped", s.dropped},       {"still_buffered", s.still_buffered},
          {"posts", s.posts},           {"lost", s.lost},
          {"trucks", std::move(trucks)}};
}

/// Discrete-event run of every truck in a scenario.
///
/// Reading cycles start only at or before `duration_s`; a cycle already in
/// progress at the end (an in-flight POST and the backlog drain that follows
/// it) runs to completion.
class Simulation {
 public:
  Simulation(const Scenario& scenario, PostSink& sink) : scenario_(scenario), sink_(sink) {
    for (std::size_t i = 0; i < scenario_.trucks.size(); ++i) {
      const auto& spec = scenario_.trucks[i];
      auto t = std::make_unique<Truck>(Truck{
          &spec, ScenarioEnvironment(scenario_, spec), SensorNode(spec.node, spec.departure_s),
          LinkSimulator(scenario_.link, derive_seed(scenario_.seed, 2, i))});
      trucks_.push_back(std::move(t));
      schedule(spec.departure_s, i, Event::Kind::Wake, 0);
    }
  }

  void enable_trace() {
    for (auto& t : trucks_) t->node.enable_trace();
  }

  const SensorNode& node(std::size_t i) const { return trucks_.at(i)->node; }

  RunSummary run() {
    while (!queue_.empty()) {
      const Event ev = queue_.top();
      queue_.pop();
      now_ = ev.time;
      auto& truck = *trucks_[ev.truck];
      if (ev.kind == Event::Kind::Response) {
        truck.node.handle_response(ev.status, now_);
      } else if (truck.node.state().next_action_time != ev.time || truck.node.state().awaiting_response) {
        continue;
      }
      advance(ev.truck);
    }
    return summarize();
  }

 private:
  struct Truck {
    const TruckSpec* spec;
    ScenarioEnvironment env;
    SensorNode node;
    LinkSimulator link;
  };

  struct Event {
    enum class Kind { Wake, Response };
    double time;
    std::uint64_t order;
    std::size_t truck;
    Kind kind;
    int status;
  };

  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.order > b.order;
    }
  };

  static constexpr int kTimeoutStatus = 0;

  void schedule(double t, std::size_t truck, Event::Kind kind, int status) {
    queue_.push(Event{t, next_order_++, truck, kind, status});
  }

  bool cycle_allowed(const SensorNode& node) const {
    return node.state().phase != NodePhase::ReadSensors || node.state().next_action_time <= scenario_.duration_s;
  }

  void advance(std::size_t index) {
    auto& truck = *trucks_[index];
    while (true) {
      const auto& st = truck.node.state();
      if (!cycle_allowed(truck.node)) return;
      if (st.next_action_time > now_) {
        schedule(st.next_action_time, index, Event::Kind::Wake, 0);
        return;
      }
      if (auto post = truck.node.step(truck.env, now_)) {
        send(index, *post);
        return;
      }
    }
  }

  void send(std::size_t index, const OutboundPost& post) {
    auto& truck = *trucks_[index];
    const std::size_t bytes = post.payload.size();
    const TransmitOutcome outcome = truck.link.transmit(bytes);
    int status = kTimeoutStatus;
    if (outcome.reached_server) {
      const double arrival = now_ + truck.link.arrival_offset_s(bytes);
      const auto arrival_unix = scenario_.start_unix + static_cast<std::int64_t>(std::ceil(arrival));
      status = sink_.deliver(*truck.spec, post, arrival_unix);
    }
    if (!outcome.delivered) {
      status = kTimeoutStatus;
      ++lost_;
    }
    schedule(now_ + outcome.delay_s, index, Event::Kind::Response, status);
  }

  RunSummary summarize() const {
    RunSummary s;
    s.end_time_s = now_;
    s.lost = lost_;
    for (const auto& t : trucks_) {
      TruckSummary ts{t->spec->node.device_id, t->node.counters(), t->node.state().buffer.size()};
      s.generated += ts.counters.generated;
      s.delivered += ts.counters.delivered;
      s.delivered_after_buffering += ts.counters.delivered_after_buffering;
      s.dropped += ts.counters.dropped;
      s.posts += ts.counters.posts;
      s.still_buffered += ts.still_buffered;
      s.trucks.push_back(std::move(ts));
    }
    return s;
  }

  const Scenario& scenario_;
  PostSink& sink_;
  std::vector<std::unique_ptr<Truck>> trucks_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_order_ = 0;
  std::uint64_t lost_ = 0;
  double now_ = 0.0;
};

/// Runs `scenario` against an in-process service writing to `store`.
inline RunSummary run_in_process(const Scenario& scenario, TelemetryStore& store) {
  IngestService service(scenario_tokens(scenario), store);
  InProcessSink sink(service);
  Simulation sim(scenario, sink);
  auto summary = sim.run();
  store.flush();
  return summary;
}

}  // namespace fleet
