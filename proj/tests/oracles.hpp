#pragma once

// Reference implementations used by the unit tests and the acceptance binary.

#include "esa/alignment.hpp"
#include "esa/fn_core.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace esa::testing {

// Cost of one lattice edge from node (i0, j0) spanning (a, b) steps, written
// out from the discretised objective: trapezoid over the a intervals, with the
// edge's constant root slope at every node it touches.
inline double edge_cost(const Channels& ref, const Channels& query, double lambda, const std::vector<double>& target,
                        int i0, int j0, int a, int b, double h) {
  const double root = std::sqrt(static_cast<double>(b) / a);
  double sum = 0.0;
  double ends = 0.0;
  for (int r = 0; r <= a; ++r) {
    const int num = r * b;
    const int idx = j0 + num / a;
    const double fr = static_cast<double>(num % a) / a;
    double gr = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      const auto& q = query[k];
      const double v = fr == 0.0 ? q[idx] : q[idx] + fr * (q[idx + 1] - q[idx]);
      const double d = ref[k][i0 + r] - root * v;
      gr += d * d;
    }
    if (lambda > 0.0) {
      const double p = root - target[i0 + r];
      gr += lambda * p * p;
    }
    sum += gr;
    if (r == 0 || r == a) ends += gr;
  }
  return h * (sum - 0.5 * ends);
}

struct BruteForceResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<double> warp;
  long paths = 0;
};

// Enumerates every monotone lattice path from (0,0) to (m-1,m-1) whose edges
// are drawn from `slopes`.
inline BruteForceResult brute_force_alignment(const Channels& ref, const Channels& query, double lambda,
                                              std::vector<double> target, const std::vector<Slope>& slopes) {
  const int m = static_cast<int>(ref.front().size());
  if (target.empty()) target.assign(static_cast<std::size_t>(m), 1.0);
  const double h = 1.0 / (m - 1);
  BruteForceResult best;
  std::vector<double> path(static_cast<std::size_t>(m), 0.0);
  auto rec = [&](auto&& self, int i, int j, double acc) -> void {
    if (i == m - 1 && j == m - 1) {
      ++best.paths;
      if (acc < best.cost) {
        best.cost = acc;
        best.warp = path;
      }
      return;
    }
    for (const auto& s : slopes) {
      const int i1 = i + s.time_steps;
      const int j1 = j + s.value_steps;
      if (i1 > m - 1 || j1 > m - 1) continue;
      for (int r = 1; r <= s.time_steps; ++r)
        path[static_cast<std::size_t>(i + r)] = (j + static_cast<double>(r * s.value_steps) / s.time_steps) / (m - 1);
      self(self, i1, j1, acc + edge_cost(ref, query, lambda, target, i, j, s.time_steps, s.value_steps, h));
    }
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

}  // namespace esa::testing
