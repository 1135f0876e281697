#pragma once

// Directed road network and the reversed line graph the Q-network runs on.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fleetgnn {

using RoadId = std::size_t;
using NodeId = std::int64_t;

struct Road {
  RoadId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length_m = 0.0;
};

struct RoadNetwork {
  std::vector<NodeId> intersections;
  std::vector<Road> roads;

  std::size_t road_count() const { return roads.size(); }
};

enum class ViolationKind {
  NoRoads,
  NonDenseRoadId,
  DanglingNode,
  NonPositiveLength,
  DuplicateIntersection,
};

struct Violation {
  ViolationKind kind;
  std::optional<RoadId> road;
  std::string message;
};

inline std::vector<Violation> validate(const RoadNetwork& network) {
  std::vector<Violation> out;
  if (network.roads.empty()) {
    out.push_back({ViolationKind::NoRoads, std::nullopt, "network has no roads"});
  }
  std::set<NodeId> nodes;
  for (NodeId n : network.intersections) {
    if (!nodes.insert(n).second) {
      out.push_back({ViolationKind::DuplicateIntersection, std::nullopt,
                     "intersection " + std::to_string(n) + " listed twice"});
    }
  }
  for (std::size_t i = 0; i < network.roads.size(); ++i) {
    const Road& r = network.roads[i];
    if (r.id != i) {
      out.push_back({ViolationKind::NonDenseRoadId, i,
                     "road at position " + std::to_string(i) + " has id " + std::to_string(r.id)});
    }
    for (NodeId end : {r.from, r.to}) {
      if (!nodes.contains(end)) {
        out.push_back({ViolationKind::DanglingNode, i,
                       "road " + std::to_string(i) + " references missing node " +
                           std::to_string(end)});
        break;
      }
    }
    if (!(r.length_m > 0.0)) {
      out.push_back({ViolationKind::NonPositiveLength, i,
                     "road " + std::to_string(i) + " has non-positive length"});
    }
  }
  return out;
}

inline void require_valid(const RoadNetwork& network) {
  auto violations = validate(network);
  if (!violations.empty()) {
    throw std::invalid_argument("invalid road network: " + violations.front().message);
  }
}

/// Roads leaving the end node of `road`, ascending by id.
inline std::vector<RoadId> successors(const RoadNetwork& network, RoadId road) {
  if (road >= network.road_count()) {
    throw std::out_of_range("successors: road index " + std::to_string(road) + " out of range");
  }
  std::vector<RoadId> out;
  const NodeId end = network.roads[road].to;
  for (const Road& r : network.roads) {
    if (r.from == end) out.push_back(r.id);
  }
  return out;
}

/// Line graph of the road network with every edge reversed plus one self-loop
/// per road. Aggregating over a node's in-edges therefore visits the road
/// itself and all of its successors.
struct DualGraph {
  std::size_t node_count = 0;
  // (src, dst) pairs, grouped by dst in ascending order; the self-loop comes
  // first within each group.
  std::vector<std::pair<RoadId, RoadId>> edges;
  // Successors in the original orientation.
  std::vector<std::vector<RoadId>> successor_index;
  // Dual predecessors of each node: the self-loop source followed by the
  // successors (dedup'd against the self-loop). Mirrors `edges`.
  std::vector<std::vector<RoadId>> predecessors;
  // Per-road action list, see action_list().
  std::vector<std::vector<RoadId>> actions;

  /// Roads a controllable driver on `road` may move to: the successors, or the
  /// road itself when it is a dead end.
  std::span<const RoadId> action_list(RoadId road) const {
    return actions.at(road);
  }

  bool is_dead_end(RoadId road) const { return successor_index.at(road).empty(); }
};

inline DualGraph build_dual_graph(const RoadNetwork& network) {
  require_valid(network);
  const std::size_t n = network.road_count();

  std::map<NodeId, std::vector<RoadId>> outgoing;
  for (const Road& r : network.roads) outgoing[r.from].push_back(r.id);

  DualGraph g;
  g.node_count = n;
  g.successor_index.resize(n);
  g.predecessors.resize(n);
  g.actions.resize(n);
  for (RoadId a = 0; a < n; ++a) {
    auto it = outgoing.find(network.roads[a].to);
    if (it != outgoing.end()) g.successor_index[a] = it->second;  // already ascending

    g.edges.emplace_back(a, a);
    g.predecessors[a].push_back(a);
    for (RoadId b : g.successor_index[a]) {
      if (b == a) continue;  // loop road: coincides with the self-loop
      g.edges.emplace_back(b, a);
      g.predecessors[a].push_back(b);
    }
    g.actions[a] = g.successor_index[a].empty() ? std::vector<RoadId>{a} : g.successor_index[a];
  }
  return g;
}

}  // namespace fleetgnn
