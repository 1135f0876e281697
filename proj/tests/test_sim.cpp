#include <map>
#include <set>

#include <gtest/gtest.h>

#include "fleetgnn/sim.hpp"
#include "support.hpp"

using namespace fleetgnn;
using fleetgnn::testing::chain;
using fleetgnn::testing::empty_scenario;
using fleetgnn::testing::random_network;
using fleetgnn::testing::random_scenario;
using fleetgnn::testing::ring;

namespace {

// One road of 1000 m feeding a second road, speed 600 m/step.
WorldState single_driver_world(double position) {
  auto s = empty_scenario(2, 600.0);
  s.initial_idle_per_road = {1, 0};
  auto w = init_world(chain(2), s, 1);
  w.drivers[0].position = position;
  return w;
}

Scenario with_calls(Scenario s, std::vector<CallRecord> calls) {
  s.calls = std::move(calls);
  return s;
}

}  // namespace

TEST(InitWorld, PlacesInitialDrivers) {
  auto s = empty_scenario(3);
  s.initial_idle_per_road = {2, 0, 1};
  auto w = init_world(chain(3), s, 7);
  ASSERT_EQ(w.drivers.size(), 3u);
  EXPECT_EQ(w.drivers[0].road, 0u);
  EXPECT_EQ(w.drivers[1].road, 0u);
  EXPECT_EQ(w.drivers[2].road, 2u);
  for (const auto& d : w.drivers) {
    EXPECT_GE(d.position, 0.0);
    EXPECT_LT(d.position, 1.0);
    EXPECT_TRUE(d.idle());
  }
  EXPECT_EQ(w.time, 0);
  EXPECT_EQ(w.counters, Counters{});
}

TEST(InitWorld, EmptyDistribution) {
  auto w = init_world(chain(3), empty_scenario(3), 7);
  EXPECT_TRUE(w.drivers.empty());
}

TEST(InitWorld, SameSeedSamePositions) {
  auto s = empty_scenario(3);
  s.initial_idle_per_road = {5, 5, 5};
  auto a = init_world(chain(3), s, 42), b = init_world(chain(3), s, 42);
  for (std::size_t i = 0; i < a.drivers.size(); ++i) EXPECT_EQ(a.drivers[i].position, b.drivers[i].position);
}

TEST(InitWorld, RoadCountMismatchThrows) {
  EXPECT_THROW(init_world(chain(3), empty_scenario(2), 1), std::invalid_argument);
}

TEST(AdvanceDrivers, ReachingTheEndIsControllable) {
  auto w = single_driver_world(0.5);
  EXPECT_EQ(advance_drivers(w), (std::vector<std::size_t>{0}));
  EXPECT_TRUE(w.drivers[0].controllable);
  EXPECT_EQ(w.drivers[0].position, 0.5);
}

TEST(AdvanceDrivers, ShortOfTheEndMovesForward) {
  auto w = single_driver_world(0.1);
  EXPECT_TRUE(advance_drivers(w).empty());
  EXPECT_NEAR(w.drivers[0].position, 0.7, 1e-12);
  EXPECT_FALSE(w.drivers[0].controllable);
}

TEST(AdvanceDrivers, ExactBoundaryIsControllable) {
  auto w = single_driver_world(0.4);
  EXPECT_EQ(advance_drivers(w).size(), 1u);
}

TEST(AdvanceDrivers, ServingDriversAreSkipped) {
  auto w = single_driver_world(0.9);
  w.drivers[0].status = DriverStatus::Serving;
  w.drivers[0].remaining_steps = 3;
  EXPECT_TRUE(advance_drivers(w).empty());
}

TEST(Relocate, SingleSuccessorTakesEveryone) {
  auto s = empty_scenario(2, 2000.0);
  s.initial_idle_per_road = {20, 0};
  auto w = init_world(chain(2), s, 3);
  auto ids = advance_drivers(w);
  ASSERT_EQ(ids.size(), 20u);
  auto moves = relocate(w, uniform_policy(w.graph()), ids);
  for (const auto& m : moves) EXPECT_EQ(m.to, 1u);
  for (const auto& d : w.drivers) EXPECT_EQ(d.road, 1u);
}

TEST(Relocate, DeadEndStaysAndResamplesPosition) {
  auto s = empty_scenario(2, 2000.0);
  s.initial_idle_per_road = {0, 1};
  auto w = init_world(chain(2), s, 3);
  w.drivers[0].position = 0.999;
  relocate(w, uniform_policy(w.graph()), advance_drivers(w));
  EXPECT_EQ(w.drivers[0].road, 1u);
  EXPECT_NE(w.drivers[0].position, 0.999);
}

TEST(Relocate, EvenSplitOverTwoSuccessors) {
  // road 0 ends at node 1, which has roads 1 and 2 leaving it
  RoadNetwork net{{0, 1, 2, 3}, {{0, 0, 1, 10.0}, {1, 1, 2, 10.0}, {2, 1, 3, 10.0}}};
  auto s = empty_scenario(3, 100.0);
  s.initial_idle_per_road = {10000, 0, 0};
  auto w = init_world(net, s, 99);
  relocate(w, uniform_policy(w.graph()), advance_drivers(w));
  long on1 = 0;
  for (const auto& d : w.drivers) on1 += d.road == 1;
  EXPECT_NEAR(static_cast<double>(on1) / 10000.0, 0.5, 0.02);
}

TEST(Relocate, MissingPolicyRowIsALogicError) {
  auto w = single_driver_world(0.9);
  EXPECT_THROW(relocate(w, Policy{}, advance_drivers(w)), std::logic_error);
}

TEST(AssignOrders, MatchesMinOfDriversAndOrders) {
  auto s = with_calls(empty_scenario(2), {{0, 1, 0, 3, 1.0}, {0, 1, 0, 3, 1.0}});
  s.initial_idle_per_road = {3, 0};
  auto w = init_world(chain(2), s, 5);
  auto r = assign_orders(w);
  int ones = 0;
  for (const auto& x : r) ones += x.reward;
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(ones, 2);
  EXPECT_EQ(w.counters.orders_served, 2u);
}

TEST(AssignOrders, SurplusOrdersStayQueued) {
  auto s = with_calls(empty_scenario(2), {{0, 1, 0, 3, 1.0}, {0, 1, 0, 3, 1.0}, {0, 1, 0, 3, 1.0}});
  s.initial_idle_per_road = {1, 0};
  auto w = init_world(chain(2), s, 5);
  assign_orders(w);
  EXPECT_EQ(w.counters.orders_served, 1u);
  EXPECT_EQ(w.open_orders[0].size(), 2u);
  EXPECT_EQ(w.drivers[0].status, DriverStatus::Serving);
  EXPECT_EQ(w.drivers[0].remaining_steps, 3);
  EXPECT_EQ(w.drivers[0].dropoff_road, 1u);
}

TEST(AssignOrders, NoDriversNoService) {
  auto w = init_world(chain(2), with_calls(empty_scenario(2), {{0, 1, 0, 3, 1.0}}), 5);
  EXPECT_TRUE(assign_orders(w).empty());
  EXPECT_EQ(w.counters.orders_served, 0u);
}

TEST(SpawnAndExpire, CallsArriveAtTheirStep) {
  auto s = with_calls(empty_scenario(4), {{3, 0, 7, 1, 1.0}, {3, 1, 7, 1, 1.0}});
  auto w = init_world(ring(2), s, 1);
  w.time = 6;
  EXPECT_EQ(spawn_and_expire_orders(w), 0u);
  w.time = 7;
  EXPECT_EQ(spawn_and_expire_orders(w), 2u);
  EXPECT_EQ(w.open_orders[3].size(), 2u);
  EXPECT_EQ(w.counters.orders_generated, 2u);
}

TEST(SpawnAndExpire, OrdersOlderThanExpiryAreDropped) {
  auto s = with_calls(empty_scenario(2), {{0, 1, 5, 1, 1.0}});
  auto w = init_world(chain(2), s, 1, SimConfig{2});
  w.time = 5;
  spawn_and_expire_orders(w);
  w.time = 7;
  spawn_and_expire_orders(w);
  EXPECT_EQ(w.open_orders[0].size(), 1u);
  w.time = 8;
  spawn_and_expire_orders(w);
  EXPECT_TRUE(w.open_orders[0].empty());
}

TEST(Rebalance, SpawnsUpToTarget) {
  auto s = empty_scenario(3);
  s.initial_idle_per_road = {30, 30, 30};
  auto w = init_world(chain(3), s, 1);
  EXPECT_EQ(rebalance_drivers(w, 100), 10);
  EXPECT_EQ(w.drivers.size(), 100u);
}

TEST(Rebalance, RemovesOnlyIdleDrivers) {
  auto s = empty_scenario(3);
  s.initial_idle_per_road = {30, 30, 30};
  auto w = init_world(chain(3), s, 1);
  std::set<std::size_t> serving;
  for (std::size_t i = 0; i < 5; ++i) {
    w.drivers[i * 10].status = DriverStatus::Serving;
    w.drivers[i * 10].remaining_steps = 4;
    serving.insert(w.drivers[i * 10].id);
  }
  EXPECT_EQ(rebalance_drivers(w, 80), -10);
  EXPECT_EQ(w.drivers.size(), 80u);
  std::set<std::size_t> still;
  for (const auto& d : w.drivers)
    if (!d.idle()) still.insert(d.id);
  EXPECT_EQ(still, serving);
}

TEST(Rebalance, EqualTargetIsANoOp) {
  auto s = empty_scenario(3);
  s.initial_idle_per_road = {1, 2, 3};
  auto w = init_world(chain(3), s, 1);
  const auto before = w.drivers;
  EXPECT_EQ(rebalance_drivers(w, 6), 0);
  ASSERT_EQ(w.drivers.size(), before.size());
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(w.drivers[i].position, before[i].position);
}

TEST(Rebalance, TargetBelowServingThrows) {
  auto s = empty_scenario(1);
  s.initial_idle_per_road = {2};
  auto w = init_world(chain(1), s, 1);
  w.drivers[0].status = w.drivers[1].status = DriverStatus::Serving;
  EXPECT_THROW(rebalance_drivers(w, 1), std::invalid_argument);
}

TEST(Observe, EmptyWorld) {
  auto s = empty_scenario(3, 321.0);
  auto obs = observe(init_world(chain(3), s, 1));
  EXPECT_EQ(obs.idle, (std::vector<long>{0, 0, 0}));
  EXPECT_EQ(obs.calls, (std::vector<long>{0, 0, 0}));
  EXPECT_EQ(obs.speed, (std::vector<double>{321.0, 321.0, 321.0}));
}

TEST(Observe, CountsIdleDriversAndCalls) {
  auto s = with_calls(empty_scenario(3), {{0, 1, 0, 2, 1.0}});
  s.initial_idle_per_road = {0, 0, 1};
  auto obs = observe(init_world(chain(3), s, 1));
  EXPECT_EQ(obs.idle, (std::vector<long>{0, 0, 1}));
  EXPECT_EQ(obs.calls, (std::vector<long>{1, 0, 0}));
}

TEST(Observe, ServingDriversAreNotIdle) {
  auto s = with_calls(empty_scenario(2), {{0, 1, 0, 5, 1.0}});
  s.initial_idle_per_road = {1, 0};
  auto w = init_world(chain(2), s, 1);
  assign_orders(w);
  EXPECT_EQ(observe(w).idle, (std::vector<long>{0, 0}));
}

TEST(Step, DriverMeetingACallTerminates) {
  auto s = with_calls(empty_scenario(1, 10.0), {{0, 0, 0, 2, 1.0}});
  s.initial_idle_per_road = {1};
  auto w = init_world(chain(1), s, 1);
  auto [obs, out] = step(w, uniform_policy(w.graph()));
  ASSERT_EQ(out.samples.size(), 1u);
  EXPECT_EQ(out.samples[0].reward, 1);
  EXPECT_TRUE(out.samples[0].terminated);
  EXPECT_EQ(out.served, 1u);
  EXPECT_EQ(obs.idle[0], 0);
}

TEST(Step, EmptyFleetStillGeneratesCalls) {
  auto s = with_calls(empty_scenario(2), {{0, 1, 1, 2, 1.0}});
  auto w = init_world(chain(2), s, 1);
  auto [obs, out] = step(w, uniform_policy(w.graph()));
  EXPECT_TRUE(out.samples.empty());
  EXPECT_EQ(out.generated, 1u);
  EXPECT_EQ(obs.calls[0], 1);
}

TEST(Step, ServiceEndsAtDropoffAfterDuration) {
  auto s = with_calls(empty_scenario(2, 10.0), {{0, 1, 0, 2, 1.0}});
  s.initial_idle_per_road = {1, 0};
  auto w = init_world(chain(2), s, 1);
  const auto pol = uniform_policy(w.graph());
  step(w, pol);  // matched, 2 steps to go
  EXPECT_FALSE(w.drivers[0].idle());
  EXPECT_EQ(w.drivers[0].remaining_steps, 1);
  auto [obs, out] = step(w, pol);
  EXPECT_TRUE(out.samples.empty());
  EXPECT_TRUE(w.drivers[0].idle());
  EXPECT_EQ(w.drivers[0].road, 1u);
  EXPECT_EQ(obs.idle, (std::vector<long>{0, 1}));
}

TEST(Step, ControllableNextFollowsPositionAndSpeed) {
  auto s = empty_scenario(2, 300.0);
  s.initial_idle_per_road = {1, 0};
  auto w = init_world(chain(2), s, 1);
  w.drivers[0].position = 0.2;  // 200 -> 500 m: next advance reaches 800 < 1000
  auto out = step(w, uniform_policy(w.graph())).second;
  ASSERT_EQ(out.samples.size(), 1u);
  EXPECT_FALSE(out.samples[0].was_controllable);
  EXPECT_FALSE(out.samples[0].was_controllable_next);
  out = step(w, uniform_policy(w.graph())).second;  // at 800 m now
  EXPECT_TRUE(out.samples[0].was_controllable_next);
}

TEST(Step, RebalanceFollowsSeries) {
  auto s = empty_scenario(2);
  s.initial_idle_per_road = {2, 2};
  s.total_drivers_series = {4, 7, 3};
  auto w = init_world(chain(2), s, 1);
  step(w, uniform_policy(w.graph()));
  EXPECT_EQ(w.drivers.size(), 7u);
  step(w, uniform_policy(w.graph()));
  EXPECT_EQ(w.drivers.size(), 3u);
  step(w, uniform_policy(w.graph()));
  EXPECT_EQ(w.drivers.size(), 3u);  // series clamps at its last value
}

TEST(Step, ShortfallIsRecordedWhenTargetBelowServing) {
  auto s = with_calls(empty_scenario(1), {{0, 0, 0, 5, 1.0}, {0, 0, 0, 5, 1.0}});
  s.initial_idle_per_road = {2};
  s.total_drivers_series = {2, 1};
  auto w = init_world(chain(1), s, 1);
  step(w, uniform_policy(w.graph()));
  EXPECT_EQ(w.drivers.size(), 2u);
  EXPECT_EQ(w.rebalance_shortfall, 1u);
}

TEST(ResponseRate, Values) {
  EXPECT_DOUBLE_EQ(*order_response_rate({100, 50}), 0.5);
  EXPECT_DOUBLE_EQ(*order_response_rate({100, 0}), 0.0);
  EXPECT_FALSE(order_response_rate({0, 0}).has_value());
}

// ---------------------------------------------------------------------------
// Properties over random runs

namespace {

struct RunTrace {
  std::vector<StepOutcome> outcomes;
  std::vector<Observation> observations;
  Counters counters;
};

RunTrace run_random(std::uint64_t seed, std::size_t steps) {
  Rng gen(seed);
  auto net = random_network(gen, 12, 5);
  auto s = random_scenario(gen, net.road_count(), static_cast<long>(steps));
  auto w = init_world(net, s, seed);
  RunTrace tr;
  for (std::size_t k = 0; k < steps; ++k) {
    auto [obs, out] = step(w, uniform_policy(w.graph()));
    tr.outcomes.push_back(std::move(out));
    tr.observations.push_back(std::move(obs));
  }
  tr.counters = w.counters;
  return tr;
}

}  // namespace

TEST(SimProperty, ConservationOverRandomRuns) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng gen(seed);
    auto net = random_network(gen, 12, 5);
    auto s = random_scenario(gen, net.road_count(), 100);
    auto w = init_world(net, s, seed);
    const auto& g = w.graph();
    for (int k = 0; k < 100; ++k) {
      std::map<std::size_t, RoadId> idle_before;
      for (const auto& d : w.drivers)
        if (d.idle()) idle_before[d.id] = d.road;
      const auto out = step(w, uniform_policy(g)).second;

      EXPECT_EQ(static_cast<long>(w.drivers.size()), s.target_drivers(w.time));
      EXPECT_LE(w.counters.orders_served, w.counters.orders_generated);
      ASSERT_EQ(out.samples.size(), idle_before.size());
      std::set<std::size_t> seen;
      for (const auto& smp : out.samples) {
        EXPECT_EQ(smp.reward == 1, smp.terminated);
        EXPECT_TRUE(seen.insert(smp.driver_id).second);
        const RoadId from = idle_before.at(smp.driver_id);
        if (smp.was_controllable) {
          auto acts = g.action_list(from);
          EXPECT_NE(std::find(acts.begin(), acts.end(), smp.road_after_move), acts.end());
        } else {
          EXPECT_EQ(smp.road_after_move, from);
        }
      }
      for (const auto& d : w.drivers) {
        EXPECT_GE(d.position, 0.0);
        EXPECT_LT(d.position, 1.0);
      }
      for (RoadId j = 0; j < w.road_count(); ++j)
        for (const auto& o : w.open_orders[j]) EXPECT_EQ(o.start_road, j);
    }
    EXPECT_EQ(w.rebalance_shortfall, 0u);
    auto rate = order_response_rate(w.counters);
    if (rate) {
      EXPECT_GE(*rate, 0.0);
      EXPECT_LE(*rate, 1.0);
    }
  }
}

TEST(SimProperty, IdenticalSeedsIdenticalRuns) {
  auto a = run_random(77, 100), b = run_random(77, 100);
  EXPECT_EQ(a.outcomes, b.outcomes);
  EXPECT_EQ(a.observations, b.observations);
  EXPECT_EQ(a.counters, b.counters);
  auto c = run_random(78, 100);
  EXPECT_NE(a.outcomes, c.outcomes);
}
