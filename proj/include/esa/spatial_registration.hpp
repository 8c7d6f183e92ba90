#pragma once

// Spatially penalised multiple registration: every warp gamma_ij is pulled
// towards a kriged prediction from the other components of observation i.

#include "esa/registration.hpp"
#include "esa/spatial.hpp"

#include <string>
#include <vector>

namespace esa {

enum class InitTemplate { kAligned, kRawMean };

struct SpatialRegConfig {
  double lambda = 1.0;
  double outer_tol = 1e-4;  // relative: sum_j ||mu_j new - old|| / sum_j ||mu_j old||
  double inner_tol = 1e-4;  // sum_j ||psi_ij^(k) - psi_ij^(k-1)||^2
  int max_outer = 20;
  int max_inner = 10;
  // false: always run max_outer x max_inner sweeps.
  bool stopping_rules = true;
  InitTemplate init_template = InitTemplate::kAligned;
  DpConfig dp;
  // Used by the componentwise and cross-component registrations at start-up.
  MultipleRegConfig init;

  void validate() const;
};

struct SpatialInit {
  std::vector<std::vector<Srsf>> qs;                 // [i][j]
  std::vector<MultipleRegResult> componentwise;      // [j], lambda = 0
  std::vector<Srsf> templates;                       // mu_j^(0)
  std::vector<std::vector<Warp>> xi;                 // [i][j], centred per observation
  std::vector<std::vector<WarpSrsf>> xi_psi;         // [i][j]
  std::vector<EmpiricalVariogram> variograms;        // [i]
  std::vector<VariogramModel> models;                // [i]
  std::vector<KrigingWeights> weights;               // [i]
  std::vector<bool> uniform_fallback;                // [i] weights fell back to uniform
  std::vector<std::string> warnings;
};

struct SpatialRegResult {
  std::vector<Srsf> templates;                              // [j], re-centred
  std::vector<std::vector<Warp>> warps;                     // [i][j]
  std::vector<std::vector<WarpSrsf>> psis;                  // [i][j]
  std::vector<std::vector<Srsf>> aligned;                   // q_ij . gamma_ij
  std::vector<std::vector<SampledFunction>> aligned_functions;  // f_ij o gamma_ij
  std::vector<KrigingWeights> weights;                      // [i]
  // Average over components of the penalised objective (line after each
  // template update, entry 0 at initialisation).
  std::vector<double> cost_trace;
  // Same objective after every inner sweep, indexed by the cumulative counter.
  std::vector<double> inner_cost_trace;
  // delta(k) for k = 1.. (cumulative sweep counter).
  std::vector<double> delta_trace;
  // Cumulative sweep count at which each template update happened.
  std::vector<int> update_iterations;
  std::vector<double> template_change;  // relative outer change per update
  int outer_iterations = 0;
  int inner_iterations = 0;  // cumulative
  bool converged = false;
  std::vector<std::string> warnings;
};

SpatialInit initialize_spatial(const MvSample& sample, const SpatialRegConfig& cfg);

SpatialRegResult register_spatial(const MvSample& sample, const SpatialRegConfig& cfg);
// Reuses a precomputed initialisation (it depends on the sample, not on lambda).
SpatialRegResult register_spatial(const MvSample& sample, const SpatialInit& init, const SpatialRegConfig& cfg);

// delta(k) = (1/(K n)) sum_i sum_j ||psi_ij^(k) - psi_ij^(k-1)||^2 over
// consecutive states in `history` (each state indexed [i][j]).
std::vector<double> convergence_delta(const std::vector<std::vector<std::vector<WarpSrsf>>>& history);

// Average over j of sum_i ||mu_j - q_ij . g_ij||^2 + lambda ||psi_ij - krige||^2.
double spatial_objective(const std::vector<Srsf>& templates, const std::vector<std::vector<Srsf>>& qs,
                         const std::vector<std::vector<Warp>>& warps, const std::vector<KrigingWeights>& weights,
                         double lambda);

}  // namespace esa
