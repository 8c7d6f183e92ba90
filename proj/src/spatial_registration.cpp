#include "esa/spatial_registration.hpp"

#include "esa/error.hpp"
#include "esa/parallel.hpp"

#include <cmath>
#include <string>

namespace esa {

void SpatialRegConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidParameter("spatial registration: lambda must be finite and >= 0");
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw InvalidParameter("spatial registration: tolerances must be > 0");
  if (max_outer < 1 || max_inner < 1) throw InvalidParameter("spatial registration: iteration caps must be >= 1");
  dp.validate();
}

namespace {

std::string stage(const std::string& where, const std::exception& e) { return where + ": " + e.what(); }

std::vector<WarpSrsf> psis_of(const std::vector<Warp>& warps) {
  std::vector<WarpSrsf> out;
  out.reserve(warps.size());
  for (const auto& g : warps) out.push_back(warp_to_psi(g));
  return out;
}

double sq_distance(const WarpSrsf& a, const WarpSrsf& b) {
  const double d = l2_distance(a, b);
  return d * d;
}

}  // namespace

SpatialInit initialize_spatial(const MvSample& sample, const SpatialRegConfig& cfg) {
  cfg.validate();
  sample.validate();
  const std::size_t n = sample.n();
  const std::size_t k = sample.components();
  if (n < 2) throw InvalidInput("spatial registration needs n >= 2");
  if (k < 2) throw InvalidInput("spatial registration needs K >= 2");

  SpatialInit init;
  init.qs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) init.qs[i].push_back(srsf_transform(sample.funcs[i][j]));
  }

  MultipleRegConfig mcfg = cfg.init;
  mcfg.dp = cfg.dp;
  try {
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<Srsf> col;
      for (std::size_t i = 0; i < n; ++i) col.push_back(init.qs[i][j]);
      init.componentwise.push_back(register_multiple(col, 0.0, mcfg));
      if (cfg.init_template == InitTemplate::kAligned) {
        init.templates.push_back(init.componentwise[j].template_srsf);
      } else {
        init.templates.push_back(mean_srsf(col));
      }
    }
  } catch (const Error& e) {
    throw NumericalError(stage("initialisation (componentwise templates)", e));
  }

  const VariogramBins bins = VariogramBins::standard(sample.layout);
  init.xi.resize(n);
  init.xi_psi.resize(n);
  init.variograms.resize(n);
  init.models.resize(n);
  init.weights.resize(n);
  init.uniform_fallback.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      MultipleRegResult cross = register_multiple(init.qs[i], 0.0, mcfg);
      init.xi[i] = std::move(cross.warps);
      init.xi_psi[i] = psis_of(init.xi[i]);
    } catch (const Error& e) {
      throw NumericalError(stage("initialisation (cross-component phase, observation " + std::to_string(i) + ")", e));
    }
    init.variograms[i] = empirical_phase_variogram(init.xi_psi[i], sample.layout, bins);
    try {
      init.models[i] = fit_variogram(init.variograms[i]);
    } catch (const InvalidInput& e) {
      init.models[i] = VariogramModel{0.0, 0.0, 1.0, true};
      init.warnings.push_back("observation " + std::to_string(i) + ": variogram fit skipped (" + e.what() +
                              "); using uniform kriging weights");
    }
    if (init.models[i].degenerate) {
      init.weights[i] = uniform_kriging_weights(k);
      init.uniform_fallback[i] = true;
    } else {
      init.weights[i] = solve_kriging_weights(init.models[i], sample.layout);
    }
  }
  return init;
}

double spatial_objective(const std::vector<Srsf>& templates, const std::vector<std::vector<Srsf>>& qs,
                         const std::vector<std::vector<Warp>>& warps, const std::vector<KrigingWeights>& weights,
                         double lambda) {
  const std::size_t n = qs.size();
  const std::size_t k = templates.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<WarpSrsf> psi = psis_of(warps[i]);
    for (std::size_t j = 0; j < k; ++j) {
      const WarpSrsf target = krige_psi(weights[i].rows[j], psi);
      total += alignment_objective({templates[j].values()}, {qs[i][j].values()}, warps[i][j], lambda, target.values())
                   .total;
    }
  }
  return total / static_cast<double>(k);
}

std::vector<double> convergence_delta(const std::vector<std::vector<std::vector<WarpSrsf>>>& history) {
  std::vector<double> out;
  for (std::size_t s = 1; s < history.size(); ++s) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < history[s].size(); ++i) {
      for (std::size_t j = 0; j < history[s][i].size(); ++j) {
        acc += sq_distance(history[s][i][j], history[s - 1][i][j]);
        ++count;
      }
    }
    out.push_back(count == 0 ? 0.0 : acc / static_cast<double>(count));
  }
  return out;
}

SpatialRegResult register_spatial(const MvSample& sample, const SpatialRegConfig& cfg) {
  return register_spatial(sample, initialize_spatial(sample, cfg), cfg);
}

SpatialRegResult register_spatial(const MvSample& sample, const SpatialInit& init, const SpatialRegConfig& cfg) {
  cfg.validate();
  sample.validate();
  const std::size_t n = sample.n();
  const std::size_t k = sample.components();
  if (init.qs.size() != n || init.templates.size() != k || init.weights.size() != n)
    throw InvalidInput("spatial registration: initialisation does not match the sample");
  const TimeGrid grid = sample.grid();
  const auto& qs = init.qs;

  SpatialRegResult res;
  res.weights = init.weights;
  res.warnings = init.warnings;
  std::vector<Srsf> templates = init.templates;
  std::vector<std::vector<Warp>> warps(n, std::vector<Warp>(k, Warp::identity(grid)));
  std::vector<std::vector<WarpSrsf>> psis(n, std::vector<WarpSrsf>(k, WarpSrsf::identity(grid)));

  const double kn = static_cast<double>(k * n);
  res.cost_trace.push_back(spatial_objective(templates, qs, warps, res.weights, cfg.lambda));

  for (int z = 0; z < cfg.max_outer; ++z) {
    std::vector<bool> active(n, true);
    for (int sweep = 0; sweep < cfg.max_inner; ++sweep) {
      std::vector<double> moved(n, 0.0);
      parallel_for(n, [&](std::size_t i) {
        if (!active[i]) return;
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          // psis[i] holds the fresh states for l < j and the previous sweep's for l > j.
          const WarpSrsf target = krige_psi(res.weights[i].rows[j], psis[i]);
          AlignResult ar = align_channels({templates[j].values()}, {qs[i][j].values()}, grid, cfg.lambda,
                                          target.values(), cfg.dp);
          if (!std::isfinite(ar.cost))
            throw NumericalError("spatial registration: non-finite cost at (i=" + std::to_string(i) + ", j=" +
                                 std::to_string(j) + ", z=" + std::to_string(z) + ", k=" + std::to_string(sweep) +
                                 ")");
          WarpSrsf next = warp_to_psi(ar.warp);
          for (double v : next.values()) {
            if (!std::isfinite(v))
              throw NumericalError("spatial registration: non-finite phase at (i=" + std::to_string(i) + ", j=" +
                                   std::to_string(j) + ", z=" + std::to_string(z) + ", k=" + std::to_string(sweep) +
                                   ")");
          }
          acc += sq_distance(next, psis[i][j]);
          psis[i][j] = std::move(next);
          warps[i][j] = std::move(ar.warp);
        }
        moved[i] = acc;
      });
      double delta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        delta += moved[i];
        if (active[i] && cfg.stopping_rules && moved[i] <= cfg.inner_tol) active[i] = false;
      }
      res.delta_trace.push_back(delta / kn);
      res.inner_cost_trace.push_back(spatial_objective(templates, qs, warps, res.weights, cfg.lambda));
      ++res.inner_iterations;
      bool any = false;
      for (bool a : active) any = any || a;
      if (!any) break;
    }

    std::vector<Srsf> next_templates;
    double change = 0.0;
    double base = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> acc(grid.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const Channels y = lattice_aligned({qs[i][j].values()}, warps[i][j]);
        for (std::size_t a = 0; a < acc.size(); ++a) acc[a] += y[0][a];
      }
      for (double& v : acc) v /= static_cast<double>(n);
      Srsf mu(grid, std::move(acc), templates[j].anchor());
      change += l2_distance(mu, templates[j]);
      base += l2_norm(templates[j].values(), grid);
      next_templates.push_back(std::move(mu));
    }
    templates = std::move(next_templates);
    const double rel = change / (base > 0.0 ? base : 1.0);
    res.template_change.push_back(rel);
    res.update_iterations.push_back(res.inner_iterations);
    res.cost_trace.push_back(spatial_objective(templates, qs, warps, res.weights, cfg.lambda));
    res.outer_iterations = z + 1;
    if (cfg.stopping_rules && rel <= cfg.outer_tol) {
      res.converged = true;
      break;
    }
  }
  if (cfg.stopping_rules && !res.converged) res.warnings.push_back("spatial registration: outer loop hit max_outer");

  // Re-centre each component so its warps average to the identity.
  Diagnostics diag;
  res.warps.assign(n, {});
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<Warp> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(warps[i][j]);
    std::vector<Warp> centred = center_warps(col, &diag);
    for (std::size_t i = 0; i < n; ++i) res.warps[i].push_back(std::move(centred[i]));
  }
  res.psis.assign(n, {});
  res.aligned.assign(n, {});
  res.aligned_functions.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      res.psis[i].push_back(warp_to_psi(res.warps[i][j]));
      res.aligned[i].push_back(warp_action(qs[i][j], res.warps[i][j]));
      res.aligned_functions[i].push_back(compose(sample.funcs[i][j], res.warps[i][j]));
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<Srsf> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(res.aligned[i][j]);
    res.templates.push_back(mean_srsf(col));
  }
  for (auto& w : diag.warnings) res.warnings.push_back(std::move(w));
  return res;
}

}  // namespace esa
