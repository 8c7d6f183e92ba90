#include "esa/registration.hpp"

#include "esa/error.hpp"
#include "esa/parallel.hpp"

#include <cmath>

namespace esa {

void MvSample::validate() const {
  if (funcs.empty()) throw InvalidInput("sample has no observations");
  const std::size_t k = funcs.front().size();
  if (k == 0) throw InvalidInput("sample has no components");
  const TimeGrid g = funcs.front().front().grid();
  for (const auto& row : funcs) {
    if (row.size() != k) throw InvalidInput("observations have different component counts");
    for (const auto& f : row) {
      if (!(f.grid() == g)) throw InvalidInput("sample functions live on different grids");
    }
  }
  if (layout.size() != k) throw InvalidInput("layout site count differs from component count");
  if (!labels.empty() && labels.size() != k) throw InvalidInput("label count differs from component count");
}

MvSample MvSample::subset(std::span<const std::size_t> rows) const {
  MvSample out;
  out.layout = layout;
  out.labels = labels;
  for (std::size_t i : rows) out.funcs.push_back(funcs.at(i));
  return out;
}

std::vector<SampledFunction> MvSample::component(std::size_t j) const {
  std::vector<SampledFunction> out;
  out.reserve(funcs.size());
  for (const auto& row : funcs) out.push_back(row.at(j));
  return out;
}

Srsf mean_srsf(std::span<const Srsf> qs) {
  if (qs.empty()) throw InvalidInput("mean_srsf: empty input");
  std::vector<double> acc(qs.front().values().size(), 0.0);
  double anchor = 0.0;
  for (const auto& q : qs) {
    if (!(q.grid() == qs.front().grid())) throw InvalidInput("mean_srsf: grids differ");
    for (std::size_t a = 0; a < acc.size(); ++a) acc[a] += q[a];
    anchor += q.anchor();
  }
  const double inv = 1.0 / static_cast<double>(qs.size());
  for (double& v : acc) v *= inv;
  return Srsf(qs.front().grid(), std::move(acc), anchor * inv);
}

SampledFunction mean_function(std::span<const SampledFunction> fs) {
  if (fs.empty()) throw InvalidInput("mean_function: empty input");
  std::vector<double> acc(fs.front().values().size(), 0.0);
  for (const auto& f : fs) {
    if (!(f.grid() == fs.front().grid())) throw InvalidInput("mean_function: grids differ");
    for (std::size_t a = 0; a < acc.size(); ++a) acc[a] += f[a];
  }
  for (double& v : acc) v /= static_cast<double>(fs.size());
  return SampledFunction(fs.front().grid(), std::move(acc));
}

Warp mean_warp(std::span<const Warp> warps) {
  if (warps.empty()) throw InvalidInput("mean_warp: empty input");
  bool same = true;
  for (const auto& g : warps) same = same && g.values() == warps.front().values();
  if (same) return warps.front();
  const TimeGrid grid = warps.front().grid();
  std::vector<double> acc(grid.size(), 0.0);
  for (const auto& g : warps) {
    const WarpSrsf psi = warp_to_psi(g);
    for (std::size_t a = 0; a < acc.size(); ++a) acc[a] += psi[a];
  }
  return psi_to_warp(WarpSrsf::normalized(grid, std::move(acc)));
}

std::vector<Warp> center_warps(std::span<const Warp> warps, Diagnostics* diag) {
  std::vector<Warp> out(warps.begin(), warps.end());
  if (out.empty()) return out;
  const Warp id = Warp::identity(out.front().grid());
  // One pass leaves a residual from interpolation and finite differences at
  // the kinks of DP warps; a few more passes remove it.
  for (int pass = 0; pass < 8; ++pass) {
    const Warp mean = mean_warp(out);
    if (extrinsic_phase_distance(mean, id) <= 1e-6) break;
    const Warp inv = invert_warp(mean, diag);
    for (auto& g : out) g = compose_warps(g, inv, diag);
  }
  return out;
}

namespace {

struct ChannelRegResult {
  Channels template_channels;
  std::vector<Warp> warps;
  int iterations = 0;
  std::vector<double> cost_trace;
  bool converged = false;
  std::vector<std::string> warnings;
};

Channels channel_mean(const std::vector<Channels>& xs) {
  Channels acc = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < acc.size(); ++k) {
      for (std::size_t a = 0; a < acc[k].size(); ++a) acc[k][a] += xs[i][k][a];
    }
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (auto& c : acc) {
    for (double& v : c) v *= inv;
  }
  return acc;
}

double channel_norm(const Channels& c, const TimeGrid& grid) {
  double s = 0.0;
  for (const auto& ch : c) {
    const double n = l2_norm(ch, grid);
    s += n * n;
  }
  return std::sqrt(s);
}

double channel_distance(const Channels& a, const Channels& b, const TimeGrid& grid) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = l2_distance(a[k], b[k], grid);
    s += d * d;
  }
  return std::sqrt(s);
}

// Alternating minimisation of sum_i min_g ||mu - q_i . g||^2 (+ identity penalty).
// Each template update is the exact minimiser of the discretised objective for
// the current warps, and the previous warps remain DP-feasible, so the cost
// trace is non-increasing.
ChannelRegResult register_channels(const std::vector<Channels>& qs, const TimeGrid& grid, double lambda,
                                   const MultipleRegConfig& cfg) {
  const std::size_t n = qs.size();
  if (n < 2) throw InvalidInput("multiple registration needs at least two functions");
  if (cfg.max_iterations < 1) throw InvalidParameter("multiple registration: max_iterations must be >= 1");
  if (!(cfg.tolerance > 0.0)) throw InvalidParameter("multiple registration: tolerance must be > 0");

  ChannelRegResult res;
  res.warps.assign(n, Warp::identity(grid));
  res.template_channels = channel_mean(qs);
  auto total_cost = [&](const Channels& tmpl) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += alignment_objective(tmpl, qs[i], res.warps[i], lambda, {}).total;
    return c;
  };
  res.cost_trace.push_back(total_cost(res.template_channels));

  std::vector<AlignResult> aligned(n, AlignResult(Warp::identity(grid)));
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    parallel_for(n, [&](std::size_t i) { aligned[i] = align_channels(res.template_channels, qs[i], grid, lambda, {}, cfg.dp); });
    std::vector<Channels> warped(n);
    for (std::size_t i = 0; i < n; ++i) {
      res.warps[i] = aligned[i].warp;
      for (const auto& w : aligned[i].warnings) res.warnings.push_back("observation " + std::to_string(i) + ": " + w);
      warped[i] = lattice_aligned(qs[i], res.warps[i]);
    }
    Channels next = channel_mean(warped);
    const double base = channel_norm(res.template_channels, grid);
    const double change = channel_distance(next, res.template_channels, grid) / (base > 0.0 ? base : 1.0);
    res.template_channels = std::move(next);
    res.cost_trace.push_back(total_cost(res.template_channels));
    res.iterations = it;
    if (!std::isfinite(res.cost_trace.back())) throw NumericalError("multiple registration: non-finite cost");
    if (change < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) res.warnings.push_back("multiple registration: not converged after max_iterations");
  return res;
}

}  // namespace

MultipleRegResult register_multiple(std::span<const Srsf> qs, double lambda, const MultipleRegConfig& cfg) {
  if (qs.size() < 2) throw InvalidInput("register_multiple: need at least two functions");
  const TimeGrid grid = qs.front().grid();
  std::vector<Channels> channels;
  channels.reserve(qs.size());
  for (const auto& q : qs) {
    if (!(q.grid() == grid)) throw InvalidInput("register_multiple: grids differ");
    channels.push_back({q.values()});
  }
  ChannelRegResult core = register_channels(channels, grid, lambda, cfg);

  Diagnostics diag;
  std::vector<Warp> warps = cfg.center ? center_warps(core.warps, &diag) : core.warps;
  std::vector<Srsf> aligned;
  aligned.reserve(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) aligned.push_back(warp_action(qs[i], warps[i]));

  Srsf tmpl = mean_srsf(aligned);
  MultipleRegResult out(std::move(tmpl), std::move(warps), std::move(aligned));
  out.iterations = core.iterations;
  out.cost_trace = std::move(core.cost_trace);
  out.converged = core.converged;
  out.warnings = std::move(core.warnings);
  for (auto& w : diag.warnings) out.warnings.push_back(std::move(w));
  return out;
}

std::vector<MultipleRegResult> register_componentwise(const MvSample& sample, double lambda,
                                                      const MultipleRegConfig& cfg) {
  sample.validate();
  std::vector<MultipleRegResult> out;
  for (std::size_t j = 0; j < sample.components(); ++j) {
    std::vector<Srsf> qs;
    for (const auto& row : sample.funcs) qs.push_back(srsf_transform(row[j]));
    out.push_back(register_multiple(qs, lambda, cfg));
  }
  return out;
}

UniversalRegResult register_universal(const MvSample& sample, double lambda, const MultipleRegConfig& cfg) {
  sample.validate();
  const TimeGrid grid = sample.grid();
  std::vector<VectorSrsf> qs;
  std::vector<Channels> channels;
  for (const auto& row : sample.funcs) {
    qs.push_back(vector_srsf_transform(row));
    channels.push_back(qs.back().channels);
  }
  ChannelRegResult core = register_channels(channels, grid, lambda, cfg);

  Diagnostics diag;
  std::vector<Warp> warps = cfg.center ? center_warps(core.warps, &diag) : core.warps;
  UniversalRegResult out(VectorSrsf{grid, {}});
  for (std::size_t i = 0; i < qs.size(); ++i) out.aligned.push_back(warp_action(qs[i], warps[i]));
  std::vector<Channels> aligned_channels;
  for (const auto& a : out.aligned) aligned_channels.push_back(a.channels);
  out.template_srsf = VectorSrsf{grid, channel_mean(aligned_channels)};
  out.warps = std::move(warps);
  out.iterations = core.iterations;
  out.cost_trace = std::move(core.cost_trace);
  out.converged = core.converged;
  out.warnings = std::move(core.warnings);
  for (auto& w : diag.warnings) out.warnings.push_back(std::move(w));
  return out;
}

}  // namespace esa
