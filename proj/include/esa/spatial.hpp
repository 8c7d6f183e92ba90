#pragma once

// Phase trace-variograms over spatial sites and simplex-constrained kriging of
// warp SRSFs.

#include "esa/fn_core.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace esa {

class SpatialLayout {
 public:
  SpatialLayout() = default;
  // Each site has the same dimension (2 or 3).
  explicit SpatialLayout(std::vector<std::vector<double>> sites);

  std::size_t size() const { return sites_.size(); }
  std::size_t dimension() const { return sites_.empty() ? 0 : sites_.front().size(); }
  const std::vector<std::vector<double>>& sites() const { return sites_; }
  double distance(std::size_t a, std::size_t b) const { return dist_[a * sites_.size() + b]; }
  double max_distance() const { return max_distance_; }
  SpatialLayout scaled(double factor) const;
  // Sub-layout with the listed sites, in order.
  SpatialLayout subset(std::span<const std::size_t> keep) const;

 private:
  std::vector<std::vector<double>> sites_;
  std::vector<double> dist_;
  double max_distance_ = 0.0;
};

// Equal-width bins on (0, max_distance]; bin b collects pairs whose distance
// lies in (b w, (b+1) w], i.e. (centre - eps, centre + eps] with eps = w/2.
struct VariogramBins {
  std::size_t count = 1;
  double max_distance = 1.0;

  // ceil(sqrt(K(K-1)/2)) bins up to 0.75 d_max.
  static VariogramBins standard(const SpatialLayout& layout);
  double width() const { return max_distance / static_cast<double>(count); }
  // Bin index for a pair distance, or -1 if outside every bin.
  long index(double d) const;
};

struct EmpiricalVariogram {
  std::vector<double> centers;
  double half_width = 0.0;
  std::vector<std::size_t> counts;
  std::vector<double> estimates;

  std::size_t size() const { return centers.size(); }
};

// Exponential family: V(h) = nugget + sill (1 - exp(-h / range)).
struct VariogramModel {
  double nugget = 0.0;
  double sill = 0.0;
  double range = 1.0;
  // No spatial structure could be fitted (flat or too few bins).
  bool degenerate = false;

  double operator()(double h) const;
};

struct KrigingRow {
  std::size_t target = 0;
  std::vector<std::size_t> neighbors;  // every site except the target, ascending
  std::vector<double> weights;         // on the simplex, aligned with neighbors
  bool degenerate = false;
  std::size_t iterations = 0;
};

// One row per target site.
struct KrigingWeights {
  std::vector<KrigingRow> rows;
};

// (1 / 2|N(h)|) sum ||v_a - v_b||^2 over site pairs in each bin; empty bins
// are omitted. Works on any set of functions sampled on `grid`.
EmpiricalVariogram empirical_trace_variogram(std::span<const std::vector<double>> functions, const TimeGrid& grid,
                                             const SpatialLayout& layout, const VariogramBins& bins);

EmpiricalVariogram empirical_phase_variogram(std::span<const WarpSrsf> psis, const SpatialLayout& layout,
                                             const VariogramBins& bins);

// Count-weighted least squares over the exponential family with nonnegative
// nugget and sill. Needs at least 3 populated bins (InvalidInput otherwise).
// Flat estimates give a nugget-only model flagged degenerate.
VariogramModel fit_variogram(const EmpiricalVariogram& emp);

// Weighted sum of squared residuals of a model against the bins.
double weighted_sse(const EmpiricalVariogram& emp, const VariogramModel& model);

// Minimises 2 sum_l z_l V(|s_j - s_l|) - sum_a sum_b z_a z_b V(|s_a - s_b|)
// over the simplex by accelerated projected gradient from uniform weights.
KrigingRow solve_kriging_weights(const VariogramModel& model, const SpatialLayout& layout, std::size_t target);
KrigingWeights solve_kriging_weights(const VariogramModel& model, const SpatialLayout& layout);
KrigingWeights uniform_kriging_weights(std::size_t sites);

// The quadratic objective above, for checking candidate weight vectors.
double kriging_objective(const VariogramModel& model, const SpatialLayout& layout, const KrigingRow& row);

// Euclidean projection onto {z : z >= 0, sum z = 1}.
std::vector<double> project_to_simplex(std::span<const double> v);

// sum_l z_l psi_l over the row's neighbours, renormalised to unit norm.
// `psis` holds one entry per site; the target's own entry is ignored.
WarpSrsf krige_psi(const KrigingRow& row, std::span<const WarpSrsf> psis);

}  // namespace esa
