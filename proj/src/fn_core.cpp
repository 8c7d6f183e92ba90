#include "esa/fn_core.hpp"

#include "esa/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace esa {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite value");
  }
}

void require_same_grid(const TimeGrid& a, const TimeGrid& b) {
  if (!(a == b)) throw InvalidInput("functions live on different grids");
}

// Pool-adjacent-violators isotonic regression with unit weights.
std::vector<double> isotonic(std::span<const double> y) {
  std::vector<double> level;
  std::vector<std::size_t> count;
  for (double v : y) {
    level.push_back(v);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t c = count.back() + count[count.size() - 2];
      const double merged = (level.back() * count.back() + level[level.size() - 2] * count[count.size() - 2]) / c;
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = c;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < level.size(); ++b) out.insert(out.end(), count[b], level[b]);
  return out;
}

bool strictly_increasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

}  // namespace

TimeGrid::TimeGrid(std::size_t m) : m_(m) {
  if (m < 3) throw InvalidInput("time grid needs at least 3 points");
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> p(m_);
  for (std::size_t i = 0; i < m_; ++i) p[i] = at(i);
  return p;
}

SampledFunction::SampledFunction(TimeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw InvalidInput("sample count does not match grid");
  require_finite(values_, "sampled function");
}

SampledFunction SampledFunction::constant(TimeGrid grid, double c) {
  return SampledFunction(grid, std::vector<double>(grid.size(), c));
}

Srsf::Srsf(TimeGrid grid, std::vector<double> values, double anchor)
    : grid_(grid), values_(std::move(values)), anchor_(anchor) {
  if (values_.size() != grid_.size()) throw InvalidInput("SRSF sample count does not match grid");
  require_finite(values_, "SRSF");
  if (!std::isfinite(anchor_)) throw InvalidInput("SRSF anchor is not finite");
}

Warp::Warp(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw InvalidWarp("warp sample count does not match grid");
  if (values_.front() != 0.0 || values_.back() != 1.0) throw InvalidWarp("warp does not preserve endpoints");
  if (!strictly_increasing(values_)) throw InvalidWarp("warp is not strictly increasing");
}

Warp Warp::identity(TimeGrid grid) { return Warp(grid, grid.points()); }

Warp Warp::repaired(TimeGrid grid, std::vector<double> values, bool* repaired) {
  if (values.size() != grid.size()) throw InvalidWarp("warp sample count does not match grid");
  require_finite(values, "warp");
  const std::vector<double> original = values;
  for (double& v : values) v = std::clamp(v, 0.0, 1.0);
  if (!std::is_sorted(values.begin(), values.end())) values = isotonic(values);
  values.front() = 0.0;
  values.back() = 1.0;
  for (double& v : values) v = std::clamp(v, 0.0, 1.0);
  if (!strictly_increasing(values)) {
    constexpr double eps = 1e-10;
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (1.0 - eps) * values[i] + eps * grid.at(i);
    values.front() = 0.0;
    values.back() = 1.0;
  }
  if (repaired) *repaired = values != original;
  return Warp(grid, std::move(values));
}

WarpSrsf::WarpSrsf(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw InvalidWarp("psi sample count does not match grid");
  require_finite(values_, "psi");
  for (double v : values_) {
    if (v < 0.0) throw InvalidWarp("psi must be nonnegative");
  }
  if (std::abs(l2_norm(values_, grid_) - 1.0) > 1e-6) throw InvalidWarp("psi must have unit norm");
}

WarpSrsf WarpSrsf::identity(TimeGrid grid) { return WarpSrsf(grid, std::vector<double>(grid.size(), 1.0)); }

WarpSrsf WarpSrsf::normalized(TimeGrid grid, std::vector<double> values) {
  if (values.size() != grid.size()) throw InvalidWarp("psi sample count does not match grid");
  require_finite(values, "psi");
  for (double& v : values) v = std::max(v, 0.0);
  const double n = l2_norm(values, grid);
  if (!(n > 0.0)) throw InvalidWarp("psi has zero norm");
  for (double& v : values) v /= n;
  return WarpSrsf(grid, std::move(values));
}

double interpolate(std::span<const double> values, const TimeGrid& grid, double x) {
  const std::size_t m = grid.size();
  const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(m - 1);
  std::size_t k = static_cast<std::size_t>(pos);
  if (k >= m - 1) k = m - 2;
  const double frac = pos - static_cast<double>(k);
  return values[k] + frac * (values[k + 1] - values[k]);
}

std::vector<double> derivative(std::span<const double> v, const TimeGrid& grid) {
  const std::size_t m = grid.size();
  if (v.size() != m) throw InvalidInput("derivative: sample count does not match grid");
  const double h = grid.step();
  std::vector<double> d(m);
  d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
  d[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < m; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
  return d;
}

double integrate(std::span<const double> v, const TimeGrid& grid) {
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return s * grid.step();
}

std::vector<double> cumulative_integral(std::span<const double> v, const TimeGrid& grid) {
  const double h = grid.step();
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 1; i < v.size(); ++i) out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
  return out;
}

double l2_norm(std::span<const double> v, const TimeGrid& grid) {
  double s = 0.5 * (v.front() * v.front() + v.back() * v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i] * v[i];
  return std::sqrt(s * grid.step());
}

double l2_distance(std::span<const double> a, std::span<const double> b, const TimeGrid& grid) {
  if (a.size() != b.size() || a.size() != grid.size()) throw InvalidInput("l2_distance: size mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return l2_norm(d, grid);
}

double l2_distance(const Srsf& a, const Srsf& b) {
  require_same_grid(a.grid(), b.grid());
  return l2_distance(a.values(), b.values(), a.grid());
}

double l2_distance(const SampledFunction& a, const SampledFunction& b) {
  require_same_grid(a.grid(), b.grid());
  return l2_distance(a.values(), b.values(), a.grid());
}

double l2_distance(const WarpSrsf& a, const WarpSrsf& b) {
  require_same_grid(a.grid(), b.grid());
  return l2_distance(a.values(), b.values(), a.grid());
}

Srsf srsf_transform(const SampledFunction& f) {
  std::vector<double> d = derivative(f.values(), f.grid());
  for (double& x : d) {
    if (!std::isfinite(x)) throw InvalidInput("srsf_transform: non-finite derivative");
    x = x == 0.0 ? 0.0 : x / std::sqrt(std::abs(x));
  }
  return Srsf(f.grid(), std::move(d), f.values().front());
}

SampledFunction srsf_inverse(const Srsf& q) {
  std::vector<double> slope(q.values().size());
  for (std::size_t i = 0; i < slope.size(); ++i) slope[i] = q[i] * std::abs(q[i]);
  std::vector<double> f = cumulative_integral(slope, q.grid());
  for (double& x : f) x += q.anchor();
  return SampledFunction(q.grid(), std::move(f));
}

namespace {

std::vector<double> sqrt_warp_derivative(const Warp& gamma) {
  std::vector<double> d = derivative(gamma.values(), gamma.grid());
  for (double& x : d) x = std::sqrt(std::max(x, 0.0));
  return d;
}

bool is_identity(const Warp& gamma) {
  const TimeGrid& grid = gamma.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (gamma[i] != grid.at(i)) return false;
  }
  return true;
}

}  // namespace

Srsf warp_action(const Srsf& q, const Warp& gamma) {
  require_same_grid(q.grid(), gamma.grid());
  if (is_identity(gamma)) return q;
  const std::vector<double> root = sqrt_warp_derivative(gamma);
  std::vector<double> out(root.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = interpolate(q.values(), q.grid(), gamma[i]) * root[i];
  return Srsf(q.grid(), std::move(out), q.anchor());
}

SampledFunction compose(const SampledFunction& f, const Warp& gamma) {
  require_same_grid(f.grid(), gamma.grid());
  if (is_identity(gamma)) return f;
  std::vector<double> out(f.values().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = interpolate(f.values(), f.grid(), gamma[i]);
  return SampledFunction(f.grid(), std::move(out));
}

VectorSrsf vector_srsf_transform(std::span<const SampledFunction> components) {
  if (components.empty()) throw InvalidInput("vector_srsf_transform: no components");
  const TimeGrid grid = components.front().grid();
  const std::size_t m = grid.size();
  VectorSrsf q{grid, {}};
  for (const auto& f : components) {
    require_same_grid(grid, f.grid());
    q.channels.push_back(derivative(f.values(), grid));
  }
  for (std::size_t i = 0; i < m; ++i) {
    double norm2 = 0.0;
    for (const auto& c : q.channels) norm2 += c[i] * c[i];
    if (!std::isfinite(norm2)) throw InvalidInput("vector_srsf_transform: non-finite derivative");
    if (norm2 == 0.0) continue;
    const double root = std::sqrt(std::sqrt(norm2));
    for (auto& c : q.channels) c[i] /= root;
  }
  return q;
}

VectorSrsf warp_action(const VectorSrsf& q, const Warp& gamma) {
  require_same_grid(q.grid, gamma.grid());
  if (is_identity(gamma)) return q;
  const std::vector<double> root = sqrt_warp_derivative(gamma);
  VectorSrsf out{q.grid, {}};
  for (const auto& c : q.channels) {
    std::vector<double> w(root.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = interpolate(c, q.grid, gamma[i]) * root[i];
    out.channels.push_back(std::move(w));
  }
  return out;
}

double l2_norm(const VectorSrsf& q) {
  double s = 0.0;
  for (const auto& c : q.channels) {
    const double n = l2_norm(c, q.grid);
    s += n * n;
  }
  return std::sqrt(s);
}

Warp compose_warps(const Warp& outer, const Warp& inner, Diagnostics* diag) {
  require_same_grid(outer.grid(), inner.grid());
  if (is_identity(outer)) return inner;
  if (is_identity(inner)) return outer;
  std::vector<double> v(inner.values().size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = interpolate(outer.values(), outer.grid(), inner[i]);
  bool fixed = false;
  Warp out = Warp::repaired(outer.grid(), std::move(v), &fixed);
  if (fixed && diag) diag->warn("compose_warps: monotonicity repaired");
  return out;
}

Warp invert_warp(const Warp& gamma, Diagnostics* diag) {
  const TimeGrid& grid = gamma.grid();
  const std::size_t m = grid.size();
  const auto& g = gamma.values();
  std::vector<double> v(m);
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double y = grid.at(i);
    while (k + 2 < m && g[k + 1] < y) ++k;
    const double span = g[k + 1] - g[k];
    const double frac = span > 0.0 ? std::clamp((y - g[k]) / span, 0.0, 1.0) : 0.0;
    v[i] = grid.at(k) + frac * (grid.at(k + 1) - grid.at(k));
  }
  bool fixed = false;
  Warp out = Warp::repaired(grid, std::move(v), &fixed);
  if (fixed && diag) diag->warn("invert_warp: monotonicity repaired");
  return out;
}

WarpSrsf warp_to_psi(const Warp& gamma, Diagnostics* diag) {
  std::vector<double> psi = sqrt_warp_derivative(gamma);
  const double n = l2_norm(psi, gamma.grid());
  if (diag && std::abs(n - 1.0) > 1e-3) diag->warn("warp_to_psi: norm deviates from 1 before renormalisation");
  return WarpSrsf::normalized(gamma.grid(), std::move(psi));
}

Warp psi_to_warp(const WarpSrsf& psi, Diagnostics* diag) {
  std::vector<double> sq(psi.values().size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = psi[i] * psi[i];
  std::vector<double> g = cumulative_integral(sq, psi.grid());
  const double total = g.back();
  for (double& x : g) x /= total;
  bool fixed = false;
  Warp out = Warp::repaired(psi.grid(), std::move(g), &fixed);
  if (fixed && diag) diag->warn("psi_to_warp: monotonicity repaired");
  return out;
}

double extrinsic_phase_distance(const Warp& a, const Warp& b) {
  return l2_distance(warp_to_psi(a), warp_to_psi(b));
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("sup_distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace esa
