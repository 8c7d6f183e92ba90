#pragma once

// Template-estimation metrics, the four registration methods behind one entry
// point, k-fold cross-validation of lambda and template trace-variograms.

#include "esa/registration.hpp"
#include "esa/simgen.hpp"
#include "esa/spatial.hpp"
#include "esa/spatial_registration.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace esa {

enum class Method { kNone, kComponentwise, kUniversal, kSpatial };

std::string method_name(Method m);
// Accepts none | componentwise | universal | spatial.
Method parse_method(const std::string& s);

struct MethodOutput {
  Method method = Method::kNone;
  double lambda = 0.0;
  std::vector<std::vector<Warp>> warps;                      // [i][j]; universal repeats one warp per row
  std::vector<std::vector<SampledFunction>> aligned;         // f_ij o gamma_ij
  std::vector<std::vector<Srsf>> aligned_srsf;               // q_ij . gamma_ij
  std::vector<SampledFunction> templates;                    // mean_i f_ij o gamma_ij
  std::vector<Srsf> template_srsf;                           // mean_i q_ij . gamma_ij
  std::optional<SpatialRegResult> spatial;
  std::vector<int> iterations;       // per component (componentwise) or one entry
  std::vector<bool> converged;
  std::vector<std::vector<double>> cost_traces;
  std::vector<std::string> warnings;
};

// lambda is the identity penalty for the baselines and the spatial penalty for
// kSpatial. `init` (spatial only) skips the lambda-independent start-up.
MethodOutput run_method(const MvSample& sample, Method method, double lambda, const SpatialRegConfig& cfg = {},
                        const SpatialInit* init = nullptr);

struct MetricReport {
  std::string method;
  double lambda = 0.0;
  long replicate = -1;
  double mse = 0.0;
  double qmse = 0.0;
  std::vector<double> mse_by_component;
  std::vector<double> qmse_by_component;
};

// (1/(rows K)) sum_i sum_j ||estimate_ij - truth_j||^2. A 1 x K panel scores
// template estimates.
double mse(const std::vector<std::vector<SampledFunction>>& estimate, const std::vector<SampledFunction>& truth);
double qmse(const std::vector<std::vector<Srsf>>& estimate, const std::vector<Srsf>& truth);

// Scores the estimated templates of a run against the true templates.
MetricReport evaluate_templates(const MethodOutput& out, const std::vector<SampledFunction>& truth);

struct CvReport {
  std::string method;
  std::vector<double> lambdas;
  std::vector<double> criterion;                // per lambda
  std::vector<std::vector<double>> per_fold;    // [lambda][fold]
  double selected = 0.0;
  std::size_t selected_index = 0;
  std::vector<std::size_t> fold_of;             // fold index of every observation
  std::uint64_t seed = 0;
};

// {1e-4, 1e-3, ..., 1e3}
std::vector<double> default_lambda_grid();

// Seeded random partition of [n] into near-equal folds.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

// For every fold and lambda: fit on the other folds, align each held-out
// function to the fitted template without penalty and accumulate
// ||f o g - mu||^2; the criterion divides the total by folds K n. Selects the
// argmin (first on ties, in the caller's grid order).
CvReport cross_validate_lambda(const MvSample& sample, const std::vector<double>& lambdas, Method method,
                               std::size_t folds = 4, std::uint64_t seed = 1, const SpatialRegConfig& cfg = {});

EmpiricalVariogram template_trace_variogram(const std::vector<SampledFunction>& templates, const SpatialLayout& layout,
                                            const VariogramBins& bins);

}  // namespace esa
