#pragma once

// Pairwise elastic alignment by dynamic programming over a lattice of
// piecewise-linear warps.
//
// The objective for a reference r and a query q (either may have several
// channels) is
//
//   sum_k || r_k - (q_k o g) sqrt(g') ||^2  +  lambda * || sqrt(g') - target ||^2
//
// discretised per grid interval with the trapezoid rule, using the interval's
// slope for sqrt(g') at both of its end nodes. A DP edge spans `time_steps`
// intervals at constant slope value_steps / time_steps, so the DP minimises
// exactly the discretised objective over all lattice paths.

#include "esa/fn_core.hpp"

#include <span>
#include <string>
#include <vector>

namespace esa {

struct Slope {
  int time_steps;
  int value_steps;
  bool operator==(const Slope&) const = default;
};

enum class TieBreak {
  // Among equal-cost predecessors prefer the slope closest to 1, then the
  // lexicographically smallest (time_steps, value_steps).
  kNearestUnitSlope,
};

struct DpConfig {
  std::vector<Slope> slopes = coprime_slopes(4);
  TieBreak tie_break = TieBreak::kNearestUnitSlope;

  // All coprime (p, q) with 1 <= p, q <= max_step.
  static std::vector<Slope> coprime_slopes(int max_step);
  // Throws InvalidParameter unless (1,1) is present and all steps are positive.
  void validate() const;
};

struct AlignResult {
  explicit AlignResult(Warp w) : warp(std::move(w)) {}

  Warp warp;
  double cost = 0.0;
  double data_part = 0.0;
  double penalty_part = 0.0;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

struct ObjectiveParts {
  double data = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

using Channels = std::vector<std::vector<double>>;

// Unpenalised: gamma* = argmin ||q1 - q2 . gamma||^2.
AlignResult align_pairwise(const Srsf& q1, const Srsf& q2, const DpConfig& cfg = {});

// Adds lambda * ||sqrt(gamma') - target||^2. Throws InvalidParameter for lambda < 0.
AlignResult align_pairwise_penalized(const Srsf& q1, const Srsf& q2, double lambda, const WarpSrsf& target,
                                     const DpConfig& cfg = {});

// Multichannel core behind both of the above and the R^K (universal) alignment.
// `target` empty means the identity target (psi = 1).
AlignResult align_channels(const Channels& reference, const Channels& query, const TimeGrid& grid, double lambda,
                           std::span<const double> target, const DpConfig& cfg = {});

// Evaluates the discretised objective at an arbitrary warp.
ObjectiveParts alignment_objective(const Channels& reference, const Channels& query, const Warp& gamma, double lambda,
                                   std::span<const double> target);

// Node values of (q o g) sqrt(g') consistent with the discretised objective:
// sqrt(g') at an interior node is the mean of the two adjacent interval values.
// The cross-sectional mean of these is the exact minimiser of the summed
// objective over the reference for fixed warps.
Channels lattice_aligned(const Channels& query, const Warp& gamma);

}  // namespace esa
