#pragma once

// Brute-force helpers built straight from the joint distribution
// P(Y, X_1, ..., X_n) = P(Y) prod_j P(X_j | Y). Nothing here calls the
// library's inference code.

#include <cstddef>
#include <random>
#include <vector>

#include "selfres/prob_core.hpp"

namespace oracle {

struct joint_entry {
  std::vector<std::size_t> signals;
  double p[2]; // P(Y=0, signals), P(Y=1, signals)
};

inline std::vector<joint_entry> joint_table(double prior1, const std::vector<selfres::signal_model>& models) {
  std::vector<joint_entry> table{{{}, {1.0 - prior1, prior1}}};
  for (const auto& m : models) {
    std::vector<joint_entry> next;
    for (const auto& e : table) {
      for (std::size_t x = 0; x < m.size(); ++x) {
        joint_entry n = e;
        n.signals.push_back(x);
        n.p[0] *= m.rows()[x][0];
        n.p[1] *= m.rows()[x][1];
        next.push_back(n);
      }
    }
    table = std::move(next);
  }
  return table;
}

// P(Y=1 | the listed agents' signals take the listed values)
inline double conditional(const std::vector<joint_entry>& table, const std::vector<std::size_t>& agents,
                          const std::vector<std::size_t>& values) {
  double num = 0.0, den = 0.0;
  for (const auto& e : table) {
    bool ok = true;
    for (std::size_t i = 0; i < agents.size(); ++i) ok = ok && e.signals[agents[i]] == values[i];
    if (!ok) continue;
    num += e.p[1];
    den += e.p[0] + e.p[1];
  }
  return num / den;
}

inline selfres::signal_model random_model(std::mt19937_64& rng, std::size_t n, double min_entry = 0.02) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<selfres::signal_model::row> rows(n);
  for (int y = 0; y < 2; ++y) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) {
      x = min_entry + u(rng);
      s += x;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      rows[i][y] = w[i] / s;
      acc += rows[i][y];
    }
    rows[n - 1][y] = 1.0 - acc;
  }
  return selfres::signal_model{rows};
}

} // namespace oracle
