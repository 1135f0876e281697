#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fleetgnn {

/// Increasing maps from action values to a distribution:
///   Pow: q^beta / sum q^beta        Exp: exp(beta q) / sum exp(beta q)
enum class Preference { Pow, Exp };

inline std::string to_string(Preference p) { return p == Preference::Pow ? "pow" : "exp"; }

/// Evaluated in the log domain so that very large beta stays finite. Zero
/// values get zero mass under Pow; if every value is zero the result is
/// uniform.
inline std::vector<double> preference_distribution(std::span<const double> q, Preference family,
                                                   double beta) {
  if (q.empty()) throw std::invalid_argument("preference_distribution: no actions");
  if (!(beta > 0.0)) throw std::invalid_argument("preference_distribution: beta must be positive");
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> logits(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (family == Preference::Pow) {
      if (q[i] < 0.0) throw std::domain_error("power preference needs non-negative values");
      logits[i] = q[i] == 0.0 ? neg_inf : beta * std::log(q[i]);
    } else {
      logits[i] = beta * q[i];
    }
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(q.size());
  if (top == neg_inf) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(q.size()));
    return p;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    p[i] = logits[i] == neg_inf ? 0.0 : std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

/// log(sum_i exp(x_i)) without overflow.
inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("log_sum_exp of an empty set");
  const double top = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - top);
  return top + std::log(s);
}

}  // namespace fleetgnn
