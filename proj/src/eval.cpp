#include "esa/eval.hpp"

#include "esa/error.hpp"
#include "esa/rng.hpp"

#include <cmath>
#include <numeric>

namespace esa {

std::string method_name(Method m) {
  switch (m) {
    case Method::kNone: return "none";
    case Method::kComponentwise: return "componentwise";
    case Method::kUniversal: return "universal";
    case Method::kSpatial: return "spatial";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "none") return Method::kNone;
  if (s == "componentwise") return Method::kComponentwise;
  if (s == "universal") return Method::kUniversal;
  if (s == "spatial") return Method::kSpatial;
  throw InvalidParameter("unknown method '" + s + "' (expected none, componentwise, universal or spatial)");
}

namespace {

void finish(MethodOutput& out, const MvSample& sample) {
  const std::size_t n = sample.n();
  const std::size_t k = sample.components();
  if (out.aligned.empty()) {
    out.aligned.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) out.aligned[i].push_back(compose(sample.funcs[i][j], out.warps[i][j]));
    }
  }
  if (out.aligned_srsf.empty()) {
    out.aligned_srsf.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j)
        out.aligned_srsf[i].push_back(warp_action(srsf_transform(sample.funcs[i][j]), out.warps[i][j]));
    }
  }
  out.templates.clear();
  out.template_srsf.clear();
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<SampledFunction> fs;
    std::vector<Srsf> qs;
    for (std::size_t i = 0; i < n; ++i) {
      fs.push_back(out.aligned[i][j]);
      qs.push_back(out.aligned_srsf[i][j]);
    }
    out.templates.push_back(mean_function(fs));
    out.template_srsf.push_back(mean_srsf(qs));
  }
}

}  // namespace

MethodOutput run_method(const MvSample& sample, Method method, double lambda, const SpatialRegConfig& cfg,
                        const SpatialInit* init) {
  sample.validate();
  const std::size_t n = sample.n();
  const std::size_t k = sample.components();
  const TimeGrid grid = sample.grid();
  MethodOutput out;
  out.method = method;
  out.lambda = lambda;
  MultipleRegConfig mcfg = cfg.init;
  mcfg.dp = cfg.dp;

  switch (method) {
    case Method::kNone:
      out.warps.assign(n, std::vector<Warp>(k, Warp::identity(grid)));
      out.aligned = sample.funcs;
      break;
    case Method::kComponentwise: {
      std::vector<MultipleRegResult> res;
      if (init != nullptr && lambda == 0.0) {
        res = init->componentwise;
      } else {
        res = register_componentwise(sample, lambda, mcfg);
      }
      out.warps.assign(n, {});
      out.aligned_srsf.assign(n, {});
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
          out.warps[i].push_back(res[j].warps[i]);
          out.aligned_srsf[i].push_back(res[j].aligned[i]);
        }
        out.iterations.push_back(res[j].iterations);
        out.converged.push_back(res[j].converged);
        out.cost_traces.push_back(res[j].cost_trace);
        for (const auto& w : res[j].warnings) out.warnings.push_back("component " + std::to_string(j) + ": " + w);
      }
      break;
    }
    case Method::kUniversal: {
      UniversalRegResult res = register_universal(sample, lambda, mcfg);
      out.warps.assign(n, {});
      for (std::size_t i = 0; i < n; ++i) out.warps[i].assign(k, res.warps[i]);
      out.iterations.push_back(res.iterations);
      out.converged.push_back(res.converged);
      out.cost_traces.push_back(res.cost_trace);
      out.warnings = res.warnings;
      break;
    }
    case Method::kSpatial: {
      SpatialRegConfig scfg = cfg;
      scfg.lambda = lambda;
      SpatialRegResult res = init != nullptr ? register_spatial(sample, *init, scfg) : register_spatial(sample, scfg);
      out.warps = res.warps;
      out.aligned = res.aligned_functions;
      out.aligned_srsf = res.aligned;
      out.iterations.push_back(res.inner_iterations);
      out.converged.push_back(res.converged);
      out.cost_traces.push_back(res.cost_trace);
      out.warnings = res.warnings;
      out.spatial = std::move(res);
      break;
    }
  }
  finish(out, sample);
  return out;
}

double mse(const std::vector<std::vector<SampledFunction>>& estimate, const std::vector<SampledFunction>& truth) {
  if (estimate.empty() || truth.empty()) throw InvalidInput("mse: empty input");
  double acc = 0.0;
  for (const auto& row : estimate) {
    if (row.size() != truth.size()) throw InvalidInput("mse: component count mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!(row[j].grid() == truth[j].grid())) throw InvalidInput("mse: grid mismatch");
      const double d = l2_distance(row[j], truth[j]);
      acc += d * d;
    }
  }
  return acc / static_cast<double>(estimate.size() * truth.size());
}

double qmse(const std::vector<std::vector<Srsf>>& estimate, const std::vector<Srsf>& truth) {
  if (estimate.empty() || truth.empty()) throw InvalidInput("qmse: empty input");
  double acc = 0.0;
  for (const auto& row : estimate) {
    if (row.size() != truth.size()) throw InvalidInput("qmse: component count mismatch");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!(row[j].grid() == truth[j].grid())) throw InvalidInput("qmse: grid mismatch");
      const double d = l2_distance(row[j], truth[j]);
      acc += d * d;
    }
  }
  return acc / static_cast<double>(estimate.size() * truth.size());
}

MetricReport evaluate_templates(const MethodOutput& out, const std::vector<SampledFunction>& truth) {
  if (out.templates.size() != truth.size()) throw InvalidInput("evaluate: template count differs from truth");
  MetricReport r;
  r.method = method_name(out.method);
  r.lambda = out.lambda;
  std::vector<Srsf> truth_q;
  for (const auto& mu : truth) truth_q.push_back(srsf_transform(mu));
  for (std::size_t j = 0; j < truth.size(); ++j) {
    r.mse_by_component.push_back(mse({{out.templates[j]}}, {truth[j]}));
    r.qmse_by_component.push_back(qmse({{out.template_srsf[j]}}, {truth_q[j]}));
  }
  r.mse = mse({out.templates}, truth);
  r.qmse = qmse({out.template_srsf}, truth_q);
  return r;
}

std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 1 || n < folds) throw InvalidParameter("cross-validation needs n >= folds >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::substream(seed, {0xCF});
  for (std::size_t a = n; a > 1; --a) {
    const auto r = static_cast<std::size_t>(rng.uniform() * static_cast<double>(a));
    std::swap(perm[a - 1], perm[std::min(r, a - 1)]);
  }
  std::vector<std::size_t> fold_of(n);
  for (std::size_t p = 0; p < n; ++p) fold_of[perm[p]] = p % folds;
  return fold_of;
}

CvReport cross_validate_lambda(const MvSample& sample, const std::vector<double>& lambdas, Method method,
                               std::size_t folds, std::uint64_t seed, const SpatialRegConfig& cfg) {
  sample.validate();
  if (lambdas.empty()) throw InvalidParameter("cross-validation: empty lambda grid");
  const std::size_t n = sample.n();
  const std::size_t k = sample.components();
  CvReport rep;
  rep.method = method_name(method);
  rep.lambdas = lambdas;
  rep.seed = seed;
  rep.fold_of = assign_folds(n, folds, seed);
  rep.per_fold.assign(lambdas.size(), std::vector<double>(folds, 0.0));

  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < n; ++i) (rep.fold_of[i] == f ? valid : train).push_back(i);
    if (valid.size() < 2 || train.size() < 2)
      throw InvalidInput("cross-validation: fold " + std::to_string(f) + " has fewer than 2 observations");
    const MvSample tr = sample.subset(train);
    std::optional<SpatialInit> init;
    if (method == Method::kSpatial) init = initialize_spatial(tr, cfg);

    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      const MethodOutput fit = run_method(tr, method, lambdas[l], cfg, init ? &*init : nullptr);
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const SampledFunction& mu = fit.templates[j];
        const Srsf qmu = srsf_transform(mu);
        for (std::size_t i : valid) {
          const SampledFunction& fij = sample.funcs[i][j];
          const AlignResult ar = align_pairwise(qmu, srsf_transform(fij), cfg.dp);
          const double d = l2_distance(compose(fij, ar.warp), mu);
          acc += d * d;
        }
      }
      rep.per_fold[l][f] = acc;
    }
  }
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    double total = 0.0;
    for (double v : rep.per_fold[l]) total += v;
    rep.criterion.push_back(total / static_cast<double>(folds * k * n));
  }
  rep.selected_index = 0;
  for (std::size_t l = 1; l < lambdas.size(); ++l) {
    if (rep.criterion[l] < rep.criterion[rep.selected_index]) rep.selected_index = l;
  }
  rep.selected = lambdas[rep.selected_index];
  return rep;
}

EmpiricalVariogram template_trace_variogram(const std::vector<SampledFunction>& templates, const SpatialLayout& layout,
                                            const VariogramBins& bins) {
  if (templates.size() < 2) throw InvalidInput("template variogram needs K >= 2");
  std::vector<std::vector<double>> values;
  for (const auto& t : templates) values.push_back(t.values());
  return empirical_trace_variogram(values, templates.front().grid(), layout, bins);
}

}  // namespace esa
