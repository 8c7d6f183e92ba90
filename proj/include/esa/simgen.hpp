#pragma once

// Seeded generators for the two simulation settings: spatially correlated
// templates and noise, beta-CDF warps and correlated-uniform phase fields.

#include "esa/fn_core.hpp"
#include "esa/registration.hpp"
#include "esa/rng.hpp"
#include "esa/spatial.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace esa {

struct SimConfig {
  int setting = 1;
  std::size_t n = 20;
  std::size_t K = 20;
  double Z = 0.5;
  double B = 0.25;
  double sigma_a = 1.0;
  double sigma_e = 0.5;
  double range_factor = 0.5;  // l = range_factor * d_max
  std::size_t m = 201;
  std::uint64_t seed = 1;
  double presmooth = 0.0;  // 0: no smoothed copy

  // Setting 1: n=20, K=20, sigma_a=1, sigma_e=0.5, B=0.25.
  // Setting 2: n=20, K=16, sigma_a=2, sigma_e=0.5, B=0.
  static SimConfig defaults(int setting);
  void validate() const;
};

struct SimTruth {
  SimConfig config;
  MvSample sample;
  std::optional<MvSample> smoothed;
  std::vector<SampledFunction> templates;            // mu_j
  std::vector<Warp> alpha;                           // [i]
  std::vector<std::vector<Warp>> xi;                 // [i][j]
  std::vector<std::vector<Warp>> gamma;              // xi o alpha
  std::vector<std::vector<SampledFunction>> noise;   // e_ij on the grid
  std::vector<double> z;                             // [i]
  std::vector<std::vector<double>> b;                // [i][j]
  std::vector<std::vector<double>> coefficients;     // [c][j]: amplitudes (setting 1) or spline coefficients
  double range = 0.0;
  bool low_snr = false;
};

// Matern covariance; only nu = 0.5 (exponential) is supported.
double matern_cov(double d, double scale, double range, double nu = 0.5);
// Covariance matrix over the layout's sites, row-major K x K.
std::vector<double> matern_matrix(const SpatialLayout& layout, double scale, double range);
// Draws N(mean, cov) with a Cholesky factor (1e-10 jitter retried on failure).
std::vector<double> sample_mvn(const std::vector<double>& cov, std::size_t k, double mean, Rng& rng);

// Beta(1, exp(b)) CDF: gamma(t) = 1 - (1-t)^exp(b).
Warp beta_cdf_warp(const TimeGrid& grid, double b);

// Gaussian copula onto [-B, B]^K with exponential correlation over the sites.
std::vector<double> correlated_uniform(double bound, const SpatialLayout& layout, double range, Rng& rng);
std::vector<double> correlated_uniform(double bound, const SpatialLayout& layout, double range, std::uint64_t seed);

double normal_cdf(double x);

// Cubic (order 4) B-spline basis with `count` functions on clamped uniform
// knots over [0,1]; returns values[k][a] on the grid.
std::vector<std::vector<double>> bspline_basis(const TimeGrid& grid, std::size_t count = 10, int order = 4);

struct Electrode {
  std::string label;
  double x, y, z;
};
// Sixteen 10-20 positions on the unit sphere; x towards the nose, y towards
// the left ear, z towards the vertex. Also shipped as data/electrodes_16.csv.
const std::vector<Electrode>& electrodes_16();
SpatialLayout electrode_layout_16();

SimTruth gen_setting1(const SimConfig& cfg);
SimTruth gen_setting2(const SimConfig& cfg);
SimTruth simulate(const SimConfig& cfg);

// Minimises sum (y - f)^2 + (strength / h^3) sum (second difference of f)^2,
// a discrete smoothing spline with smoothing parameter `strength`.
SampledFunction presmooth(const SampledFunction& f, double strength);
MvSample presmooth(const MvSample& sample, double strength);

}  // namespace esa
