#pragma once

// Two-road, single-step model of a stochastic policy update. All drivers start
// on road 1 and either stay or move to road 2; a unit of driver mass on road j
// earns min(1, calls_j / (pi_j * N_1)).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "fleetgnn/preference.hpp"

namespace fleetgnn::toy {

struct ToyConfig {
  std::array<double, 2> drivers{10.0, 0.0};
  std::array<double, 2> calls{3.0, 7.0};
  double alpha = 1.0;
  std::array<double, 2> q_init{1.0, 1.0};

  void check() const {
    for (double v : drivers)
      if (v < 0.0) throw std::invalid_argument("driver counts must be non-negative");
    for (double v : calls)
      if (v < 0.0) throw std::invalid_argument("call counts must be non-negative");
  }
};

using ToyPolicy = std::array<double, 2>;  // [stay, move]

/// Expected reward per unit driver for each action; nullopt where the
/// action receives no driver mass.
inline std::array<std::optional<double>, 2> reward_per_unit_driver(const ToyPolicy& policy,
                                                                   const ToyConfig& cfg) {
  std::array<std::optional<double>, 2> out;
  for (std::size_t j = 0; j < 2; ++j) {
    const double mass = policy[j] * cfg.drivers[0];
    if (mass > 0.0) out[j] = std::min(1.0, cfg.calls[j] / mass);
  }
  return out;
}

inline double total_reward(const ToyPolicy& policy, const ToyConfig& cfg) {
  double r = 0.0;
  for (std::size_t j = 0; j < 2; ++j) r += std::min(policy[j] * cfg.drivers[0], cfg.calls[j]);
  return r;
}

struct FixedPointResult {
  ToyPolicy policy{};
  double reward = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Alternates pi <- F_beta(Q) and Q_j <- (1-alpha) Q_j + alpha E[R_j]
/// (skipping actions without driver mass) until the policy moves less than
/// `tol`. Returns the last policy computed and its total reward. Beyond a
/// family-dependent beta the map has no attracting fixed point and the
/// iterates settle on a 2-cycle; `converged` is then false.
inline FixedPointResult fixed_point_iterate(double beta, Preference family, const ToyConfig& cfg,
                                            std::size_t max_iters = 10000, double tol = 1e-10) {
  cfg.check();
  std::array<double, 2> q = cfg.q_init;
  FixedPointResult res;
  std::optional<ToyPolicy> prev;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const auto dist = preference_distribution(q, family, beta);
    const ToyPolicy pi{dist[0], dist[1]};
    const auto r = reward_per_unit_driver(pi, cfg);
    for (std::size_t j = 0; j < 2; ++j) {
      if (r[j]) q[j] = (1.0 - cfg.alpha) * q[j] + cfg.alpha * *r[j];
    }
    res.policy = pi;
    res.iterations = it + 1;
    if (prev && std::max(std::abs(pi[0] - (*prev)[0]), std::abs(pi[1] - (*prev)[1])) < tol) {
      res.converged = true;
      break;
    }
    prev = pi;
  }
  res.reward = total_reward(res.policy, cfg);
  return res;
}

struct SweepPoint {
  double beta = 0.0;
  Preference family = Preference::Pow;
  double reward = 0.0;
  bool converged = false;
};

inline std::vector<SweepPoint> sweep_beta(const std::vector<double>& betas, Preference family,
                                          const ToyConfig& cfg) {
  if (betas.empty()) throw std::invalid_argument("beta grid is empty");
  std::vector<SweepPoint> out;
  out.reserve(betas.size());
  for (double b : betas) {
    const auto r = fixed_point_iterate(b, family, cfg);
    out.push_back({b, family, r.reward, r.converged});
  }
  return out;
}

/// `count` points log-spaced over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi >= lo) || count == 0) throw std::invalid_argument("bad log grid");
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return g;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << "beta,family,reward,converged\n";
  os.precision(10);
  for (const auto& p : points) {
    os << p.beta << ',' << to_string(p.family) << ',' << p.reward << ',' << (p.converged ? 1 : 0)
       << '\n';
  }
}

/// Best total reward over all policies: a 1001-point grid over pi_stay, then
/// ternary refinement around the best cell (the objective is concave).
inline double optimal_reward(const ToyConfig& cfg) {
  cfg.check();
  auto f = [&](double stay) { return total_reward({stay, 1.0 - stay}, cfg); };
  constexpr std::size_t n = 1000;
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (f(static_cast<double>(i) / n) > f(static_cast<double>(best) / n)) best = i;
  }
  double lo = std::max(0.0, (static_cast<double>(best) - 1.0) / n);
  double hi = std::min(1.0, (static_cast<double>(best) + 1.0) / n);
  for (int k = 0; k < 200; ++k) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2)) lo = m1; else hi = m2;
  }
  return std::max(f(static_cast<double>(best) / n), f(0.5 * (lo + hi)));
}

}  // namespace fleetgnn::toy
