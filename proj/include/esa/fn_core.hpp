#pragma once

// Grid-sampled functions on [0,1], square-root slope functions (SRSFs) and
// warping functions. Every function in a panel shares one uniform TimeGrid.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace esa {

class TimeGrid {
 public:
  explicit TimeGrid(std::size_t m);

  std::size_t size() const { return m_; }
  double step() const { return 1.0 / static_cast<double>(m_ - 1); }
  double at(std::size_t i) const {
    return i + 1 == m_ ? 1.0 : static_cast<double>(i) / static_cast<double>(m_ - 1);
  }
  std::vector<double> points() const;
  // Non-uniform inputs are resampled at load time, so every grid is uniform.
  bool uniform() const { return true; }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::size_t m_;
};

// Collects non-fatal conditions (renormalisations, monotonicity repairs).
struct Diagnostics {
  std::vector<std::string> warnings;
  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
};

class SampledFunction {
 public:
  SampledFunction(TimeGrid grid, std::vector<double> values);
  static SampledFunction constant(TimeGrid grid, double c);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

class Srsf {
 public:
  Srsf(TimeGrid grid, std::vector<double> values, double anchor = 0.0);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double anchor() const { return anchor_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
  double anchor_;
};

// gamma(0)=0, gamma(1)=1, strictly increasing.
class Warp {
 public:
  // Throws InvalidWarp unless the values satisfy the invariants exactly.
  Warp(TimeGrid grid, std::vector<double> values);
  static Warp identity(TimeGrid grid);
  // Projects arbitrary values onto the warp set: clamp to [0,1], isotonic
  // regression (pool-adjacent-violators), endpoint reset and, if ties remain,
  // a 1e-10 blend with the identity. `repaired` reports whether anything moved.
  static Warp repaired(TimeGrid grid, std::vector<double> values, bool* repaired = nullptr);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

// psi = sqrt(gamma'), nonnegative with unit L2 norm.
class WarpSrsf {
 public:
  // Throws InvalidWarp if values are negative or the norm is off by more than 1e-6.
  WarpSrsf(TimeGrid grid, std::vector<double> values);
  static WarpSrsf identity(TimeGrid grid);
  // Clips negatives and rescales to unit norm; throws if the norm is zero.
  static WarpSrsf normalized(TimeGrid grid, std::vector<double> values);

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

// SRSF of an R^K-valued function: q = F' / sqrt(|F'|) with the Euclidean norm.
struct VectorSrsf {
  TimeGrid grid;
  std::vector<std::vector<double>> channels;
};

// ---- numerics on raw sample vectors ------------------------------------------

// Linear interpolation of grid samples at x, clamped to [0,1].
double interpolate(std::span<const double> values, const TimeGrid& grid, double x);
// Central differences in the interior, second-order one-sided at the endpoints.
std::vector<double> derivative(std::span<const double> values, const TimeGrid& grid);
// Composite trapezoid.
double integrate(std::span<const double> values, const TimeGrid& grid);
std::vector<double> cumulative_integral(std::span<const double> values, const TimeGrid& grid);
double l2_norm(std::span<const double> values, const TimeGrid& grid);
double l2_distance(std::span<const double> a, std::span<const double> b, const TimeGrid& grid);
double l2_distance(const Srsf& a, const Srsf& b);
double l2_distance(const SampledFunction& a, const SampledFunction& b);
double l2_distance(const WarpSrsf& a, const WarpSrsf& b);

// ---- SRSF and group action ---------------------------------------------------

Srsf srsf_transform(const SampledFunction& f);
SampledFunction srsf_inverse(const Srsf& q);
// (q o gamma) * sqrt(gamma')
Srsf warp_action(const Srsf& q, const Warp& gamma);
// f o gamma
SampledFunction compose(const SampledFunction& f, const Warp& gamma);

VectorSrsf vector_srsf_transform(std::span<const SampledFunction> components);
VectorSrsf warp_action(const VectorSrsf& q, const Warp& gamma);
double l2_norm(const VectorSrsf& q);

// ---- warp group --------------------------------------------------------------

// (outer o inner)(t) = outer(inner(t))
Warp compose_warps(const Warp& outer, const Warp& inner, Diagnostics* diag = nullptr);
Warp invert_warp(const Warp& gamma, Diagnostics* diag = nullptr);

WarpSrsf warp_to_psi(const Warp& gamma, Diagnostics* diag = nullptr);
Warp psi_to_warp(const WarpSrsf& psi, Diagnostics* diag = nullptr);

double extrinsic_phase_distance(const Warp& a, const Warp& b);

// Sup-norm distance of two sample vectors.
double sup_distance(std::span<const double> a, std::span<const double> b);

}  // namespace esa
