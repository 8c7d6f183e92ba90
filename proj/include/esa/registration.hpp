#pragma once

// Multiple registration with template estimation, plus the componentwise and
// universal (one common warp per observation) baselines for multivariate data.

#include "esa/alignment.hpp"
#include "esa/fn_core.hpp"
#include "esa/spatial.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esa {

// n observations of K component functions on one grid, indexed funcs[i][j].
struct MvSample {
  std::vector<std::vector<SampledFunction>> funcs;
  SpatialLayout layout;
  std::vector<std::string> labels;

  std::size_t n() const { return funcs.size(); }
  std::size_t components() const { return funcs.empty() ? 0 : funcs.front().size(); }
  const TimeGrid& grid() const { return funcs.front().front().grid(); }
  // Throws InvalidInput unless every row has K functions on one grid and the
  // layout has K sites.
  void validate() const;
  // Observations in `rows`, in order, sharing the layout.
  MvSample subset(std::span<const std::size_t> rows) const;
  // Component j of every observation.
  std::vector<SampledFunction> component(std::size_t j) const;
};

struct MultipleRegConfig {
  DpConfig dp;
  // Stop once ||mu_new - mu_old|| / ||mu_old|| falls below this.
  double tolerance = 1e-4;
  int max_iterations = 50;
  // Re-express template and warps so the warps average to the identity.
  bool center = true;
};

struct MultipleRegResult {
  MultipleRegResult(Srsf t, std::vector<Warp> w, std::vector<Srsf> a)
      : template_srsf(std::move(t)), warps(std::move(w)), aligned(std::move(a)) {}

  Srsf template_srsf;
  std::vector<Warp> warps;
  std::vector<Srsf> aligned;
  int iterations = 0;
  // Summed alignment objective after each template update (entry 0: identity warps).
  std::vector<double> cost_trace;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct UniversalRegResult {
  explicit UniversalRegResult(VectorSrsf t) : template_srsf(std::move(t)) {}

  VectorSrsf template_srsf;
  std::vector<Warp> warps;  // one per observation, shared by all components
  std::vector<VectorSrsf> aligned;
  int iterations = 0;
  std::vector<double> cost_trace;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Alternates DP alignment to the current template with the template update
// (cross-sectional mean of the aligned SRSFs). lambda > 0 penalises every warp
// towards the identity. Requires n >= 2.
MultipleRegResult register_multiple(std::span<const Srsf> qs, double lambda, const MultipleRegConfig& cfg = {});

// Extrinsic mean: average of the warp SRSFs, renormalised, mapped back.
Warp mean_warp(std::span<const Warp> warps);

// Warps composed with the inverse of their mean, so they average to identity.
std::vector<Warp> center_warps(std::span<const Warp> warps, Diagnostics* diag = nullptr);

std::vector<MultipleRegResult> register_componentwise(const MvSample& sample, double lambda,
                                                      const MultipleRegConfig& cfg = {});

UniversalRegResult register_universal(const MvSample& sample, double lambda, const MultipleRegConfig& cfg = {});

// Cross-sectional mean of SRSFs on a shared grid.
Srsf mean_srsf(std::span<const Srsf> qs);
SampledFunction mean_function(std::span<const SampledFunction> fs);

}  // namespace esa
