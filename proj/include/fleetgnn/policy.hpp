#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fleetgnn/roadnet.hpp"

namespace fleetgnn {

/// Road-level relocation policy: probs[j][a] is the probability that a
/// controllable driver on road j moves to graph.action_list(j)[a].
struct Policy {
  std::vector<std::vector<double>> probs;

  std::size_t road_count() const { return probs.size(); }
};

inline Policy uniform_policy(const DualGraph& graph) {
  Policy p;
  p.probs.reserve(graph.node_count);
  for (RoadId j = 0; j < graph.node_count; ++j) {
    auto n = graph.action_list(j).size();
    p.probs.emplace_back(n, 1.0 / static_cast<double>(n));
  }
  return p;
}

/// Returns an empty string when every row is a distribution over the matching
/// action list, otherwise a description of the first bad row.
inline std::string check_policy(const Policy& policy, const DualGraph& graph, double tol = 1e-9) {
  if (policy.road_count() != graph.node_count) {
    return "policy has " + std::to_string(policy.road_count()) + " rows for " +
           std::to_string(graph.node_count) + " roads";
  }
  for (RoadId j = 0; j < graph.node_count; ++j) {
    const auto& row = policy.probs[j];
    if (row.size() != graph.action_list(j).size()) {
      return "row " + std::to_string(j) + " does not match its action list";
    }
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) return "row " + std::to_string(j) + " has a negative entry";
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return "row " + std::to_string(j) + " does not sum to 1";
  }
  return {};
}

/// (1 - epsilon) * policy + epsilon * uniform, row by row.
inline Policy mix_with_uniform(const Policy& policy, double epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must lie in [0, 1]");
  Policy out = policy;
  for (auto& row : out.probs) {
    const double u = 1.0 / static_cast<double>(row.size());
    for (double& p : row) p = (1.0 - epsilon) * p + epsilon * u;
  }
  return out;
}

}  // namespace fleetgnn
