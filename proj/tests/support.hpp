#pragma once

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "fleetgnn/rng.hpp"
#include "fleetgnn/roadnet.hpp"
#include "fleetgnn/scenario.hpp"

namespace fleetgnn::testing {

// Random directed multigraph with `roads` roads over `nodes` intersections.
// Parallel roads are allowed; loop roads too unless `loops` is false (which
// needs at least two nodes).
inline RoadNetwork random_network(Rng& rng, std::size_t roads, std::size_t nodes, bool loops = true) {
  RoadNetwork net;
  for (std::size_t i = 0; i < nodes; ++i) net.intersections.push_back(static_cast<NodeId>(i * 7 + 3));
  for (std::size_t r = 0; r < roads; ++r) {
    const NodeId a = net.intersections[uniform_index(rng, nodes)];
    NodeId b = net.intersections[uniform_index(rng, nodes)];
    while (!loops && b == a) b = net.intersections[uniform_index(rng, nodes)];
    net.roads.push_back({r, a, b, 100.0 + 900.0 * uniform01(rng)});
  }
  return net;
}

// Ordered pairs (a, b) with road b leaving the node road a enters, found by
// scanning every pair of roads.
inline std::set<std::pair<RoadId, RoadId>> two_paths(const RoadNetwork& net) {
  std::set<std::pair<RoadId, RoadId>> out;
  for (const Road& a : net.roads)
    for (const Road& b : net.roads)
      if (a.to == b.from) out.insert({a.id, b.id});
  return out;
}

inline RoadNetwork chain(std::size_t roads, double length = 1000.0) {
  RoadNetwork net;
  for (std::size_t i = 0; i <= roads; ++i) net.intersections.push_back(static_cast<NodeId>(i));
  for (std::size_t r = 0; r < roads; ++r) {
    net.roads.push_back({r, static_cast<NodeId>(r), static_cast<NodeId>(r + 1), length});
  }
  return net;
}

// Two-way ring: roads 2i = i -> i+1, 2i+1 = i+1 -> i.
inline RoadNetwork ring(std::size_t nodes, double length = 1000.0) {
  RoadNetwork net;
  for (std::size_t i = 0; i < nodes; ++i) net.intersections.push_back(static_cast<NodeId>(i));
  for (std::size_t i = 0; i < nodes; ++i) {
    const auto a = static_cast<NodeId>(i), b = static_cast<NodeId>((i + 1) % nodes);
    net.roads.push_back({2 * i, a, b, length});
    net.roads.push_back({2 * i + 1, b, a, length});
  }
  return net;
}

inline Scenario empty_scenario(std::size_t roads, double speed = 500.0) {
  Scenario s;
  s.initial_idle_per_road.assign(roads, 0);
  s.speeds = SpeedTable(1, roads, speed);
  return s;
}

// Random calls (at most 3 per step, durations up to 6) and a random fleet
// series that always exceeds the drivers that can be serving at once.
inline Scenario random_scenario(Rng& rng, std::size_t roads, long horizon) {
  Scenario s;
  s.initial_idle_per_road.resize(roads);
  for (auto& n : s.initial_idle_per_road) n = uniform_int(rng, 0, 4);
  for (long t = 0; t < horizon; ++t) {
    const long n = uniform_int(rng, 0, 3);
    for (long k = 0; k < n; ++k) {
      s.calls.push_back({uniform_index(rng, roads), uniform_index(rng, roads), t, uniform_int(rng, 1, 6),
                         1.0});
    }
    s.total_drivers_series.push_back(uniform_int(rng, 20, 40));  // above any possible serving count
  }
  s.speeds = SpeedTable(static_cast<std::size_t>(horizon), roads, 400.0);
  for (long t = 0; t < horizon; ++t)
    for (RoadId r = 0; r < roads; ++r) s.speeds.set(t, r, 200.0 + 600.0 * uniform01(rng));
  return s;
}

}  // namespace fleetgnn::testing
