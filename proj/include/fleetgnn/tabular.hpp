#pragma once

// Tabular expected-SARSA on a small explicit MDP. Used to check the update
// rule itself against an exact policy evaluation.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace fleetgnn {

struct TabularMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  // transition[s][a][s'] and reward[s][a][s'].
  std::vector<std::vector<std::vector<double>>> transition;
  std::vector<std::vector<std::vector<double>>> reward;

  void check() const {
    if (transition.size() != states || reward.size() != states) {
      throw std::invalid_argument("MDP tables must have one entry per state");
    }
    for (std::size_t s = 0; s < states; ++s) {
      if (transition[s].size() != actions || reward[s].size() != actions) {
        throw std::invalid_argument("MDP tables must have one entry per action");
      }
      for (std::size_t a = 0; a < actions; ++a) {
        if (transition[s][a].size() != states || reward[s][a].size() != states) {
          throw std::invalid_argument("MDP rows must cover every next state");
        }
      }
    }
  }
};

using QTable = std::vector<std::vector<double>>;

/// Synchronous sweeps of
///   Q(s,a) <- (1 - alpha_k) Q(s,a) + alpha_k (R(s,a,s') + gamma E_pi[Q(s',a')])
/// with the next state taken in expectation over the transition table.
/// `policy[s][a]` is held fixed; `alpha(k)` gives the step size of sweep k.
inline QTable tabular_expected_sarsa(const TabularMdp& mdp, const std::vector<std::vector<double>>& policy,
                                     const std::function<double(std::size_t)>& alpha, double gamma,
                                     std::size_t sweeps, const QTable& q_init = {}) {
  mdp.check();
  if (policy.size() != mdp.states) throw std::invalid_argument("policy needs one row per state");
  QTable q = q_init.empty() ? QTable(mdp.states, std::vector<double>(mdp.actions, 0.0)) : q_init;
  std::vector<double> v(mdp.states);
  for (std::size_t k = 0; k < sweeps; ++k) {
    for (std::size_t s = 0; s < mdp.states; ++s) {
      v[s] = 0.0;
      for (std::size_t a = 0; a < mdp.actions; ++a) v[s] += policy[s][a] * q[s][a];
    }
    const double step = alpha(k);
    for (std::size_t s = 0; s < mdp.states; ++s) {
      for (std::size_t a = 0; a < mdp.actions; ++a) {
        double target = 0.0;
        for (std::size_t n = 0; n < mdp.states; ++n) {
          const double p = mdp.transition[s][a][n];
          if (p != 0.0) target += p * (mdp.reward[s][a][n] + gamma * v[n]);
        }
        q[s][a] = (1.0 - step) * q[s][a] + step * target;
      }
    }
  }
  return q;
}

}  // namespace fleetgnn
