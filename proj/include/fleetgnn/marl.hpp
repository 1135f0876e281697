#pragma once

// Road-level policies derived from Q values, expected-SARSA targets, the DQN
// loss and the training loop (no replay memory, periodic target sync, linear
// exploration annealing).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fleetgnn/gnn.hpp"
#include "fleetgnn/policy.hpp"
#include "fleetgnn/preference.hpp"
#include "fleetgnn/sim.hpp"

namespace fleetgnn {

enum class PolicyFamily { Random, Proportional, Greedy, EpsGreedy, Pow, Exp, Entropy };

struct PolicyKind {
  PolicyFamily family = PolicyFamily::Random;
  double param = 0.0;  // beta for Pow/Exp/Entropy, epsilon for EpsGreedy

  static PolicyKind random() { return {PolicyFamily::Random, 0.0}; }
  static PolicyKind proportional() { return {PolicyFamily::Proportional, 0.0}; }
  static PolicyKind greedy() { return {PolicyFamily::Greedy, 0.0}; }
  static PolicyKind eps_greedy(double eps) { return checked({PolicyFamily::EpsGreedy, eps}); }
  static PolicyKind pow(double beta) { return checked({PolicyFamily::Pow, beta}); }
  static PolicyKind exp(double beta) { return checked({PolicyFamily::Exp, beta}); }
  static PolicyKind entropy(double beta) { return checked({PolicyFamily::Entropy, beta}); }

  /// Whether the policy is computed from a trained Q network.
  bool learned() const {
    return family != PolicyFamily::Random && family != PolicyFamily::Proportional;
  }

  std::string name() const {
    switch (family) {
      case PolicyFamily::Random: return "random";
      case PolicyFamily::Proportional: return "proportional";
      case PolicyFamily::Greedy: return "greedy";
      case PolicyFamily::EpsGreedy: return "eps-greedy";
      case PolicyFamily::Pow: return "pow";
      case PolicyFamily::Exp: return "exp";
      case PolicyFamily::Entropy: return "entropy";
    }
    return "?";
  }

  std::string label() const {
    switch (family) {
      case PolicyFamily::EpsGreedy: return name() + "(eps=" + trim(param) + ")";
      case PolicyFamily::Pow:
      case PolicyFamily::Exp:
      case PolicyFamily::Entropy: return name() + "(beta=" + trim(param) + ")";
      default: return name();
    }
  }

  bool operator==(const PolicyKind&) const = default;

 private:
  static PolicyKind checked(PolicyKind k) {
    if (k.family == PolicyFamily::EpsGreedy && !(k.param >= 0.0 && k.param <= 1.0)) {
      throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
    if ((k.family == PolicyFamily::Pow || k.family == PolicyFamily::Exp ||
         k.family == PolicyFamily::Entropy) &&
        !(k.param > 0.0)) {
      throw std::invalid_argument("beta must be positive");
    }
    return k;
  }
  static std::string trim(double v) {
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }
};

/// Builds a PolicyKind from its CLI name; `beta` and `epsilon` apply where relevant.
inline PolicyKind parse_policy_kind(const std::string& name, double beta, double epsilon) {
  if (name == "random") return PolicyKind::random();
  if (name == "proportional") return PolicyKind::proportional();
  if (name == "greedy") return PolicyKind::greedy();
  if (name == "eps-greedy") return PolicyKind::eps_greedy(epsilon);
  if (name == "pow") return PolicyKind::pow(beta);
  if (name == "exp") return PolicyKind::exp(beta);
  if (name == "entropy") return PolicyKind::entropy(beta);
  throw std::invalid_argument("unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// Features

struct FeatureScale {
  double count_scale = 10.0;
  double max_speed = 1.0;
};

inline FeatureScale feature_scale_for(const Scenario& scenario, double count_scale = 10.0) {
  return {count_scale, scenario.speeds.max_speed()};
}

/// N x 3 matrix (idle, calls, speed), each column scaled into a small range.
inline Tensor make_features(const Observation& obs, const FeatureScale& scale) {
  const std::size_t n = obs.road_count();
  Tensor x({n, 3}, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    x(j, 0) = static_cast<double>(obs.idle[j]) / scale.count_scale;
    x(j, 1) = static_cast<double>(obs.calls[j]) / scale.count_scale;
    x(j, 2) = obs.speed[j] / scale.max_speed;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Policies

namespace detail {

inline std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace detail

/// Per-road distribution over the road's action list. `obs` is required for
/// the proportional baseline only.
inline Policy policy_from_q(std::span<const double> q, const DualGraph& graph, const PolicyKind& kind,
                            const Observation* obs = nullptr) {
  if (q.size() != graph.node_count) throw std::invalid_argument("one Q value per road required");
  if (kind.family == PolicyFamily::Proportional && obs == nullptr) {
    throw std::invalid_argument("proportional policy needs an observation");
  }
  Policy pol;
  pol.probs.resize(graph.node_count);
  std::vector<double> vals;
  for (RoadId j = 0; j < graph.node_count; ++j) {
    const auto actions = graph.action_list(j);
    auto& row = pol.probs[j];
    const std::size_t n = actions.size();
    if (graph.is_dead_end(j)) {
      row = {1.0};
      continue;
    }
    const double u = 1.0 / static_cast<double>(n);
    vals.assign(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) vals[a] = q[actions[a]];

    switch (kind.family) {
      case PolicyFamily::Random: row.assign(n, u); break;
      case PolicyFamily::Proportional: {
        double total = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          vals[a] = static_cast<double>(obs->calls[actions[a]]);
          total += vals[a];
        }
        row.assign(n, u);
        if (total > 0.0)
          for (std::size_t a = 0; a < n; ++a) row[a] = vals[a] / total;
        break;
      }
      case PolicyFamily::Greedy:
      case PolicyFamily::EpsGreedy: {
        const double eps = kind.family == PolicyFamily::EpsGreedy ? kind.param : 0.0;
        row.assign(n, eps * u);
        row[detail::argmax_lowest(vals)] += 1.0 - eps;
        break;
      }
      case PolicyFamily::Pow:
        for (double v : vals) {
          if (!(v > 0.0)) throw std::domain_error("power policy requires strictly positive Q values");
        }
        row = preference_distribution(vals, Preference::Pow, kind.param);
        break;
      case PolicyFamily::Exp:
      case PolicyFamily::Entropy:
        row = preference_distribution(vals, Preference::Exp, kind.param);
        break;
    }
  }
  return pol;
}

// ---------------------------------------------------------------------------
// Targets and loss

/// Bootstrap value of one agent: the policy-weighted successor Q when it will
/// be controllable, otherwise the Q of the road it is on.
inline double expected_future_q(std::span<const double> q_next, const Policy& policy_next,
                                const DualGraph& graph, const TransitionSample& sample) {
  const RoadId j = sample.road_after_move;
  if (j >= q_next.size()) throw std::out_of_range("sample road outside the Q vector");
  if (!sample.was_controllable_next || graph.is_dead_end(j)) return q_next[j];
  const auto actions = graph.action_list(j);
  const auto& row = policy_next.probs.at(j);
  double v = 0.0;
  for (std::size_t a = 0; a < actions.size(); ++a) v += row[a] * q_next[actions[a]];
  return v;
}

/// 1 for agents that got an order (their episode ends), else gamma * hatQ.
inline std::vector<double> td_targets(std::span<const TransitionSample> samples,
                                      std::span<const double> q_next, const Policy& policy_next,
                                      const DualGraph& graph, double gamma) {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) {
    y.push_back(s.terminated ? 1.0 : gamma * expected_future_q(q_next, policy_next, graph, s));
  }
  return y;
}

/// reward + (gamma / beta) * log sum exp(beta * q_soft_next); terminated
/// transitions return 1.
inline double soft_q_target(double reward, std::span<const double> q_soft_next, double beta,
                            double gamma, bool terminated = false) {
  if (terminated) return 1.0;
  if (!(beta > 0.0)) throw std::invalid_argument("soft_q_target: beta must be positive");
  std::vector<double> scaled(q_soft_next.begin(), q_soft_next.end());
  for (double& v : scaled) v *= beta;
  return reward + gamma / beta * log_sum_exp(scaled);
}

/// Soft backup per sample: over the successors when controllable next,
/// over the stay action otherwise.
inline std::vector<double> soft_td_targets(std::span<const TransitionSample> samples,
                                           std::span<const double> q_next, const DualGraph& graph,
                                           double beta, double gamma) {
  std::vector<double> y;
  y.reserve(samples.size());
  std::vector<double> vals;
  for (const auto& s : samples) {
    const RoadId j = s.road_after_move;
    vals.clear();
    if (s.was_controllable_next) {
      for (RoadId k : graph.action_list(j)) vals.push_back(q_next[k]);
    } else {
      vals.push_back(q_next[j]);
    }
    y.push_back(soft_q_target(s.reward, vals, beta, gamma, s.terminated));
  }
  return y;
}

/// Sum over samples of (y_i - Q[road_after_move_i])^2.
inline double dqn_loss(std::span<const double> q_pred, std::span<const TransitionSample> samples,
                       std::span<const double> targets) {
  if (samples.size() != targets.size()) throw std::invalid_argument("one target per sample required");
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = targets[i] - q_pred[samples[i].road_after_move];
    loss += d * d;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double gamma = 0.9;
  std::size_t epochs = 5;
  std::size_t steps_per_epoch = 1440;
  double lr = 1e-3;
  std::size_t target_sync_every = 100;
  PolicyKind policy = PolicyKind::pow(2.0);
  OptimizerKind optimizer = OptimizerKind::Sgd;
  // Unset means feature_scale_for(world scenario).
  std::optional<FeatureScale> features;
  // Epoch number of the first epoch run, so resumed runs keep counting.
  std::size_t first_epoch = 0;
  // Length of the full exploration schedule in steps; 0 means this run's
  // epochs * steps_per_epoch. A resumed run starts first_epoch epochs in.
  std::size_t schedule_steps = 0;
};

struct StepMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step within this run
  double loss = 0.0;
  double epsilon = 0.0;
  std::uint64_t served = 0;     // cumulative within the epoch, initial calls included
  std::uint64_t generated = 0;  // cumulative within the epoch
  std::optional<double> response_rate;

  bool operator==(const StepMetrics&) const = default;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::uint64_t served = 0;
  std::uint64_t generated = 0;
  std::optional<double> response_rate;

  bool operator==(const EpochMetrics&) const = default;
};

struct TrainResult {
  ParamStore params;
  std::vector<StepMetrics> steps;
  std::vector<EpochMetrics> epochs;
};

/// Produces a fresh world for episode (or epoch) number `episode`.
using WorldFactory = std::function<WorldState(std::uint64_t episode)>;

inline WorldFactory make_world_factory(std::shared_ptr<const SimContext> ctx, std::uint64_t seed) {
  return [ctx = std::move(ctx), seed](std::uint64_t episode) {
    return init_world(ctx, derive_seed(seed, episode));
  };
}

/// Targets for the method's backup rule, computed from the target network.
inline std::vector<double> method_targets(const PolicyKind& kind,
                                          std::span<const TransitionSample> samples,
                                          std::span<const double> q_next, const Observation& obs_next,
                                          const DualGraph& graph, double gamma) {
  if (kind.family == PolicyFamily::Entropy) {
    return soft_td_targets(samples, q_next, graph, kind.param, gamma);
  }
  const Policy next = policy_from_q(q_next, graph, kind, &obs_next);
  return td_targets(samples, q_next, next, graph, gamma);
}

inline TrainResult train(const ParamStore& initial, const WorldFactory& make_world,
                         const TrainConfig& cfg) {
  if (!cfg.policy.learned()) {
    throw std::invalid_argument("policy '" + cfg.policy.name() + "' has nothing to train");
  }
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (cfg.target_sync_every == 0) throw std::invalid_argument("target_sync_every must be positive");

  TrainResult result;
  result.params = initial;
  ParamStore target = initial;
  Adam adam;
  const std::size_t total = cfg.schedule_steps ? cfg.schedule_steps : cfg.epochs * cfg.steps_per_epoch;
  const std::size_t offset = cfg.schedule_steps ? cfg.first_epoch * cfg.steps_per_epoch : 0;
  std::size_t global = 0;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = cfg.first_epoch + e;
    WorldState world = make_world(epoch);
    const DualGraph& graph = world.graph();
    const FeatureScale scale = cfg.features.value_or(feature_scale_for(world.scenario()));
    Observation obs = observe(world);
    double loss_sum = 0.0;

    for (std::size_t k = 0; k < cfg.steps_per_epoch; ++k, ++global) {
      const double eps =
          total > 1 ? std::max(0.0, 1.0 - static_cast<double>(offset + global) / static_cast<double>(total - 1))
                    : 0.0;

      ForwardTrace tr = trace_forward(result.params, graph, make_features(obs, scale));
      const auto qv = tr.tape.value(tr.output).values();
      const std::vector<double> q(qv.begin(), qv.end());
      const Policy behavior = mix_with_uniform(policy_from_q(q, graph, cfg.policy, &obs), eps);

      auto [obs_next, outcome] = step(world, behavior);

      const auto q_next = forward(target, graph, make_features(obs_next, scale));
      const auto y = method_targets(cfg.policy, outcome.samples, q_next, obs_next, graph, cfg.gamma);

      double loss = 0.0;
      if (!outcome.samples.empty()) {
        std::vector<std::size_t> rows;
        rows.reserve(outcome.samples.size());
        for (const auto& s : outcome.samples) rows.push_back(s.road_after_move);
        Var pred = ad::gather_rows(tr.tape, tr.output, std::move(rows));
        Var l = ad::squared_error_sum(tr.tape, pred, Tensor::column(y));
        loss = tr.tape.value(l)[0];
        const Gradients g = backward(tr, l);
        if (cfg.optimizer == OptimizerKind::Adam) {
          adam.step(result.params, g, cfg.lr);
        } else {
          sgd_step(result.params, g, cfg.lr);
        }
      }
      if ((global + 1) % cfg.target_sync_every == 0) copy_into_target(result.params, target);

      loss_sum += loss;
      const Counters& c = world.counters;
      result.steps.push_back({epoch, global, loss, eps, c.orders_served, c.orders_generated,
                              order_response_rate(c)});
      obs = std::move(obs_next);
    }

    const Counters& c = world.counters;
    result.epochs.push_back({epoch,
                             cfg.steps_per_epoch ? loss_sum / static_cast<double>(cfg.steps_per_epoch) : 0.0,
                             c.orders_served, c.orders_generated, order_response_rate(c)});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

/// A policy to evaluate: a baseline, or a learned kind plus its network.
struct PolicySource {
  PolicyKind kind;
  std::optional<ParamStore> params;
  FeatureScale features;
};

struct EvalResult {
  std::optional<double> mean;  // over episodes with a defined rate
  std::vector<std::optional<double>> per_episode;
};

/// Runs `episodes` fresh worlds for `steps` steps each without exploration.
inline EvalResult evaluate(const PolicySource& source, const WorldFactory& make_world,
                           std::size_t episodes, std::size_t steps) {
  if (source.kind.learned() && !source.params) {
    throw std::invalid_argument("policy '" + source.kind.name() + "' needs trained parameters");
  }
  EvalResult r;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    WorldState world = make_world(ep);
    const DualGraph& graph = world.graph();
    Observation obs = observe(world);
    std::vector<double> q(graph.node_count, 0.5);
    for (std::size_t k = 0; k < steps; ++k) {
      if (source.kind.learned()) q = forward(*source.params, graph, make_features(obs, source.features));
      const Policy pol = policy_from_q(q, graph, source.kind, &obs);
      obs = step(world, pol).first;
    }
    auto rate = order_response_rate(world.counters);
    r.per_episode.push_back(rate);
    if (rate) {
      sum += *rate;
      ++defined;
    }
  }
  if (defined) r.mean = sum / static_cast<double>(defined);
  return r;
}

}  // namespace fleetgnn
