#pragma once

// Scenario data consumed by the simulator: calls, driver supply, road speeds.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fleetgnn/roadnet.hpp"

namespace fleetgnn {

struct CallRecord {
  RoadId start_road = 0;
  RoadId end_road = 0;
  long start_time = 0;
  long duration = 1;
  double price = 0.0;

  bool operator==(const CallRecord&) const = default;
};

/// Dense per-step, per-road speeds in meters per step. Lookups past the last
/// step reuse the last step.
class SpeedTable {
 public:
  SpeedTable() = default;
  SpeedTable(std::size_t steps, std::size_t roads, double default_speed)
      : steps_(steps), roads_(roads), default_speed_(default_speed),
        values_(steps * roads, default_speed) {}

  double at(long t, RoadId road) const {
    if (steps_ == 0) return default_speed_;
    auto step = static_cast<std::size_t>(std::clamp<long>(t, 0, static_cast<long>(steps_) - 1));
    return values_.at(step * roads_ + road);
  }
  void set(long t, RoadId road, double speed) {
    values_.at(static_cast<std::size_t>(t) * roads_ + road) = speed;
  }

  std::size_t steps() const { return steps_; }
  std::size_t roads() const { return roads_; }
  double default_speed() const { return default_speed_; }
  double max_speed() const {
    return values_.empty() ? default_speed_ : *std::max_element(values_.begin(), values_.end());
  }

  bool operator==(const SpeedTable&) const = default;

 private:
  std::size_t steps_ = 0;
  std::size_t roads_ = 0;
  double default_speed_ = 500.0;
  std::vector<double> values_;
};

struct Scenario {
  std::vector<long> initial_idle_per_road;
  std::vector<CallRecord> calls;
  // Fleet size N_t^total per step; empty means the fleet is never rebalanced.
  std::vector<long> total_drivers_series;
  SpeedTable speeds;

  long horizon() const { return static_cast<long>(total_drivers_series.size()); }

  long target_drivers(long t) const {
    if (total_drivers_series.empty()) return 0;
    auto i = std::clamp<long>(t, 0, horizon() - 1);
    return total_drivers_series[static_cast<std::size_t>(i)];
  }

  bool operator==(const Scenario&) const = default;
};

/// Problems found by `check_scenario`, in the order encountered.
inline std::vector<std::string> check_scenario(const Scenario& s, std::size_t road_count) {
  std::vector<std::string> problems;
  if (s.initial_idle_per_road.size() != road_count) {
    problems.push_back("initial distribution has " + std::to_string(s.initial_idle_per_road.size()) +
                       " entries for " + std::to_string(road_count) + " roads");
  }
  for (long c : s.initial_idle_per_road) {
    if (c < 0) problems.push_back("negative initial driver count");
  }
  for (std::size_t i = 0; i < s.calls.size(); ++i) {
    const auto& c = s.calls[i];
    if (c.start_road >= road_count || c.end_road >= road_count) {
      problems.push_back("call " + std::to_string(i) + " references a road outside 0.." +
                         std::to_string(road_count - 1));
    }
    if (c.duration < 1) problems.push_back("call " + std::to_string(i) + " has duration < 1");
    if (c.start_time < 0) problems.push_back("call " + std::to_string(i) + " has negative start");
  }
  if (s.speeds.roads() != road_count && s.speeds.steps() > 0) {
    problems.push_back("speed table covers " + std::to_string(s.speeds.roads()) + " roads");
  }
  return problems;
}

/// Multiplies initial and target driver counts by `fraction`, rounding down.
inline Scenario scale_drivers(Scenario s, double fraction) {
  if (fraction < 0.0) throw std::invalid_argument("driver scale must be non-negative");
  auto scale = [fraction](long n) {
    return std::max<long>(0, static_cast<long>(static_cast<double>(n) * fraction + 1e-9));
  };
  for (auto& n : s.initial_idle_per_road) n = scale(n);
  for (auto& n : s.total_drivers_series) n = scale(n);
  return s;
}

}  // namespace fleetgnn
