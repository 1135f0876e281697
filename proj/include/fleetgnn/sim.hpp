#pragma once

// Ride-hailing environment on a road network.
//
// One call to step() runs the cycle
//   (i)   move idle drivers forward, flag those reaching the road end
//   (ii)  relocate flagged drivers by sampling the policy row of their road
//   (iii) match open orders to idle drivers road by road
//   (iv)  advance the clock, release drivers whose trip ended
//   (v)   enqueue the calls starting now
//   (vi)  expire stale orders, fit the driver count, load the new speeds
//   (vii) observe
// Every driver idle at the start of the cycle yields one TransitionSample.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fleetgnn/policy.hpp"
#include "fleetgnn/rng.hpp"
#include "fleetgnn/roadnet.hpp"
#include "fleetgnn/scenario.hpp"

namespace fleetgnn {

struct SimConfig {
  long order_expiry = 10;
};

enum class DriverStatus : std::uint8_t { Idle, Serving };

struct Driver {
  std::size_t id = 0;
  RoadId road = 0;
  double position = 0.0;  // fraction of the road length, in [0, 1)
  DriverStatus status = DriverStatus::Idle;
  long remaining_steps = 0;
  RoadId dropoff_road = 0;
  bool controllable = false;  // only meaningful between advance and assignment

  bool idle() const { return status == DriverStatus::Idle; }
};

struct Order {
  std::size_t id = 0;
  RoadId start_road = 0;
  RoadId end_road = 0;
  long start_time = 0;
  long duration = 1;
  double price = 0.0;
  long expiry = 10;
};

struct Counters {
  std::uint64_t orders_generated = 0;
  std::uint64_t orders_served = 0;

  bool operator==(const Counters&) const = default;
};

/// served / generated, or nullopt when nothing was generated.
inline std::optional<double> order_response_rate(const Counters& c) {
  if (c.orders_generated == 0) return std::nullopt;
  return static_cast<double>(c.orders_served) / static_cast<double>(c.orders_generated);
}

struct Observation {
  std::vector<long> idle;
  std::vector<long> calls;
  std::vector<double> speed;

  std::size_t road_count() const { return idle.size(); }
  bool operator==(const Observation&) const = default;
};

struct TransitionSample {
  std::size_t driver_id = 0;
  RoadId road_after_move = 0;
  bool was_controllable = false;       // relocated during this step
  bool was_controllable_next = false;  // will be controllable at the next decision
  int reward = 0;
  bool terminated = false;

  bool operator==(const TransitionSample&) const = default;
};

struct StepOutcome {
  std::vector<TransitionSample> samples;
  std::uint64_t served = 0;
  std::uint64_t generated = 0;

  bool operator==(const StepOutcome&) const = default;
};

/// Immutable inputs shared by every world built from the same scenario.
struct SimContext {
  std::shared_ptr<const RoadNetwork> network;
  std::shared_ptr<const DualGraph> graph;
  std::shared_ptr<const Scenario> scenario;
  std::vector<std::vector<std::size_t>> calls_by_time;  // indices into scenario->calls
  SimConfig config;
};

inline std::shared_ptr<const SimContext> make_context(RoadNetwork network, Scenario scenario,
                                                      SimConfig config = {}) {
  auto ctx = std::make_shared<SimContext>();
  auto problems = check_scenario(scenario, network.road_count());
  if (!problems.empty()) throw std::invalid_argument("scenario/network mismatch: " + problems.front());
  if (config.order_expiry < 0) throw std::invalid_argument("order expiry must be non-negative");
  ctx->graph = std::make_shared<const DualGraph>(build_dual_graph(network));
  for (std::size_t i = 0; i < scenario.calls.size(); ++i) {
    auto t = static_cast<std::size_t>(scenario.calls[i].start_time);
    if (ctx->calls_by_time.size() <= t) ctx->calls_by_time.resize(t + 1);
    ctx->calls_by_time[t].push_back(i);
  }
  ctx->network = std::make_shared<const RoadNetwork>(std::move(network));
  ctx->scenario = std::make_shared<const Scenario>(std::move(scenario));
  ctx->config = config;
  return ctx;
}

struct WorldState {
  std::shared_ptr<const SimContext> ctx;
  long time = 0;
  std::vector<Driver> drivers;  // ascending id
  std::vector<std::deque<Order>> open_orders;
  std::vector<double> speeds;
  Rng rng;
  Counters counters;
  std::size_t next_driver_id = 0;
  std::size_t next_order_id = 0;
  // Driver removals skipped because the target fell below the serving count.
  std::uint64_t rebalance_shortfall = 0;

  const RoadNetwork& network() const { return *ctx->network; }
  const DualGraph& graph() const { return *ctx->graph; }
  const Scenario& scenario() const { return *ctx->scenario; }
  std::size_t road_count() const { return ctx->network->road_count(); }
};

namespace detail {

inline void add_idle_driver(WorldState& w, RoadId road) {
  Driver d;
  d.id = w.next_driver_id++;
  d.road = road;
  d.position = uniform01(w.rng);
  w.drivers.push_back(d);
}

inline void load_speeds(WorldState& w) {
  for (RoadId j = 0; j < w.road_count(); ++j) {
    w.speeds[j] = w.scenario().speeds.at(w.time, j);
    if (!(w.speeds[j] > 0.0)) throw std::runtime_error("non-positive speed on road " + std::to_string(j));
  }
}

inline Driver& find_driver(WorldState& w, std::size_t id) {
  auto it = std::lower_bound(w.drivers.begin(), w.drivers.end(), id,
                             [](const Driver& d, std::size_t v) { return d.id < v; });
  if (it == w.drivers.end() || it->id != id) {
    throw std::logic_error("unknown driver id " + std::to_string(id));
  }
  return *it;
}

inline std::size_t spawn_orders(WorldState& w) {
  const auto t = static_cast<std::size_t>(w.time);
  if (t >= w.ctx->calls_by_time.size()) return 0;
  const auto& calls = w.scenario().calls;
  for (std::size_t idx : w.ctx->calls_by_time[t]) {
    const CallRecord& c = calls[idx];
    if (c.start_road >= w.road_count() || c.end_road >= w.road_count()) {
      throw std::out_of_range("call references road outside the network");
    }
    w.open_orders[c.start_road].push_back(
        Order{w.next_order_id++, c.start_road, c.end_road, c.start_time, c.duration, c.price,
              w.ctx->config.order_expiry});
  }
  const auto n = w.ctx->calls_by_time[t].size();
  w.counters.orders_generated += n;
  return n;
}

inline void expire_orders(WorldState& w) {
  for (auto& queue : w.open_orders) {
    std::erase_if(queue, [&](const Order& o) { return w.time - o.start_time > o.expiry; });
  }
}

inline void complete_services(WorldState& w) {
  for (Driver& d : w.drivers) {
    if (d.idle()) continue;
    if (--d.remaining_steps <= 0) {
      d.status = DriverStatus::Idle;
      d.road = d.dropoff_road;
      d.position = uniform01(w.rng);
    }
  }
}

}  // namespace detail

inline WorldState init_world(std::shared_ptr<const SimContext> ctx, std::uint64_t seed) {
  WorldState w;
  w.ctx = std::move(ctx);
  w.rng.seed(seed);
  const std::size_t n = w.road_count();
  w.open_orders.resize(n);
  w.speeds.resize(n);
  detail::load_speeds(w);
  const auto& initial = w.scenario().initial_idle_per_road;
  for (RoadId j = 0; j < n; ++j) {
    for (long k = 0; k < initial[j]; ++k) detail::add_idle_driver(w, j);
  }
  detail::spawn_orders(w);
  return w;
}

inline WorldState init_world(const RoadNetwork& network, const Scenario& scenario,
                             std::uint64_t seed, SimConfig config = {}) {
  return init_world(make_context(network, scenario, config), seed);
}

/// Phase (i). Returns the ids of idle drivers that reach the end of their road.
inline std::vector<std::size_t> advance_drivers(WorldState& w) {
  std::vector<std::size_t> controllable;
  for (Driver& d : w.drivers) {
    if (!d.idle()) continue;
    const double length = w.network().roads[d.road].length_m;
    const double distance = w.speeds[d.road];
    if (d.position * length + distance >= length) {
      d.controllable = true;
      controllable.push_back(d.id);
    } else {
      d.controllable = false;
      d.position = std::min(d.position + distance / length, std::nextafter(1.0, 0.0));
    }
  }
  return controllable;
}

struct Relocation {
  std::size_t driver_id;
  RoadId from;
  RoadId to;
};

/// Phase (ii). Moves each listed driver to a road sampled from its policy row.
inline std::vector<Relocation> relocate(WorldState& w, const Policy& policy,
                                        const std::vector<std::size_t>& controllable_ids) {
  std::vector<Relocation> moves;
  moves.reserve(controllable_ids.size());
  for (std::size_t id : controllable_ids) {
    Driver& d = detail::find_driver(w, id);
    if (d.road >= policy.road_count()) {
      throw std::logic_error("policy has no row for road " + std::to_string(d.road));
    }
    const auto actions = w.graph().action_list(d.road);
    const auto& row = policy.probs[d.road];
    if (row.size() != actions.size()) {
      throw std::logic_error("policy row for road " + std::to_string(d.road) +
                             " does not match its action list");
    }
    const RoadId from = d.road;
    d.road = actions[sample_discrete(w.rng, row)];
    d.position = uniform01(w.rng);
    moves.push_back({id, from, d.road});
  }
  return moves;
}

struct DriverReward {
  std::size_t driver_id;
  RoadId road;
  double position;
  bool was_controllable;
  int reward;
};

/// Phase (iii). Each road matches min(idle, open) pairs, picking drivers
/// uniformly without replacement and orders oldest first. Returns one entry
/// per driver that was idle before matching, in driver order.
inline std::vector<DriverReward> assign_orders(WorldState& w) {
  const std::size_t n = w.road_count();
  std::vector<std::vector<std::size_t>> idle_on_road(n);
  std::vector<DriverReward> out;
  for (std::size_t i = 0; i < w.drivers.size(); ++i) {
    const Driver& d = w.drivers[i];
    if (!d.idle()) continue;
    idle_on_road[d.road].push_back(i);
  }
  std::vector<char> matched(w.drivers.size(), 0);
  for (RoadId j = 0; j < n; ++j) {
    auto& pool = idle_on_road[j];
    auto& queue = w.open_orders[j];
    const std::size_t m = std::min(pool.size(), queue.size());
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t pick = k + uniform_index(w.rng, pool.size() - k);
      std::swap(pool[k], pool[pick]);
      Driver& d = w.drivers[pool[k]];
      const Order order = queue.front();
      queue.pop_front();
      matched[pool[k]] = 1;
      d.status = DriverStatus::Serving;
      d.remaining_steps = order.duration;
      d.dropoff_road = order.end_road;
    }
    w.counters.orders_served += m;
  }
  for (std::size_t i = 0; i < w.drivers.size(); ++i) {
    const Driver& d = w.drivers[i];
    if (!d.idle() && !matched[i]) continue;
    out.push_back({d.id, d.road, d.position, d.controllable, matched[i] ? 1 : 0});
  }
  return out;
}

/// Phases (v) and the expiry half of (vi): enqueue calls starting at the
/// current time, then drop orders older than their expiry.
inline std::size_t spawn_and_expire_orders(WorldState& w) {
  const std::size_t generated = detail::spawn_orders(w);
  detail::expire_orders(w);
  return generated;
}

/// Adds idle drivers at random roads, or removes random idle drivers, until
/// the fleet has exactly `target_total` drivers. Returns the net change.
inline long rebalance_drivers(WorldState& w, long target_total) {
  const long serving = static_cast<long>(
      std::count_if(w.drivers.begin(), w.drivers.end(), [](const Driver& d) { return !d.idle(); }));
  if (target_total < serving) {
    throw std::invalid_argument("target driver count " + std::to_string(target_total) +
                                " is below the " + std::to_string(serving) + " serving drivers");
  }
  const long current = static_cast<long>(w.drivers.size());
  if (current < target_total) {
    for (long k = current; k < target_total; ++k) {
      detail::add_idle_driver(w, uniform_index(w.rng, w.road_count()));
    }
  } else if (current > target_total) {
    std::vector<std::size_t> idle;
    for (std::size_t i = 0; i < w.drivers.size(); ++i) {
      if (w.drivers[i].idle()) idle.push_back(i);
    }
    const auto remove = static_cast<std::size_t>(current - target_total);
    std::vector<char> drop(w.drivers.size(), 0);
    for (std::size_t k = 0; k < remove; ++k) {
      const std::size_t pick = k + uniform_index(w.rng, idle.size() - k);
      std::swap(idle[k], idle[pick]);
      drop[idle[k]] = 1;
    }
    std::size_t i = 0;
    std::erase_if(w.drivers, [&](const Driver&) { return drop[i++] != 0; });
  }
  return target_total - current;
}

inline Observation observe(const WorldState& w) {
  const std::size_t n = w.road_count();
  Observation obs{std::vector<long>(n, 0), std::vector<long>(n, 0), w.speeds};
  for (const Driver& d : w.drivers) {
    if (d.idle()) ++obs.idle[d.road];
  }
  for (RoadId j = 0; j < n; ++j) obs.calls[j] = static_cast<long>(w.open_orders[j].size());
  return obs;
}

inline std::pair<Observation, StepOutcome> step(WorldState& w, const Policy& policy) {
  StepOutcome out;

  auto controllable = advance_drivers(w);                    // (i)
  relocate(w, policy, controllable);                         // (ii)
  const auto rewards = assign_orders(w);                     // (iii)

  std::vector<double> positions;
  positions.reserve(rewards.size());
  out.samples.reserve(rewards.size());
  for (const DriverReward& r : rewards) {
    TransitionSample s;
    s.driver_id = r.driver_id;
    s.road_after_move = r.road;
    s.was_controllable = r.was_controllable;
    s.reward = r.reward;
    s.terminated = r.reward == 1;
    out.served += static_cast<std::uint64_t>(r.reward);
    out.samples.push_back(s);
    positions.push_back(r.position);
  }
  for (Driver& d : w.drivers) d.controllable = false;

  w.time += 1;                                               // (iv)
  detail::complete_services(w);

  out.generated = detail::spawn_orders(w);                   // (v)

  detail::expire_orders(w);                                  // (vi)
  if (!w.scenario().total_drivers_series.empty()) {
    const long serving = static_cast<long>(std::count_if(
        w.drivers.begin(), w.drivers.end(), [](const Driver& d) { return !d.idle(); }));
    const long target = w.scenario().target_drivers(w.time);
    if (target < serving) w.rebalance_shortfall += static_cast<std::uint64_t>(serving - target);
    rebalance_drivers(w, std::max(target, serving));
  }
  detail::load_speeds(w);

  // Next-step controllability follows from the post-move position and the
  // speed that applies at the next advance.
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    auto& s = out.samples[i];
    if (s.terminated) continue;
    const double length = w.network().roads[s.road_after_move].length_m;
    s.was_controllable_next = positions[i] * length + w.speeds[s.road_after_move] >= length;
  }

  return {observe(w), std::move(out)};                       // (vii)
}

}  // namespace fleetgnn
