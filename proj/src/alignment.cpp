#include "esa/alignment.hpp"

#include "esa/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace esa {

std::vector<Slope> DpConfig::coprime_slopes(int max_step) {
  std::vector<Slope> out;
  for (int p = 1; p <= max_step; ++p) {
    for (int q = 1; q <= max_step; ++q) {
      if (std::gcd(p, q) == 1) out.push_back({p, q});
    }
  }
  return out;
}

void DpConfig::validate() const {
  bool has_unit = false;
  for (const auto& s : slopes) {
    if (s.time_steps <= 0 || s.value_steps <= 0) throw InvalidParameter("DP slopes must be positive");
    has_unit = has_unit || (s.time_steps == 1 && s.value_steps == 1);
  }
  if (!has_unit) throw InvalidParameter("DP slope set must contain (1,1)");
}

namespace {

struct EdgeStencil {
  int a = 1;  // time steps
  int b = 1;  // value steps
  double root_slope = 1.0;
  std::vector<int> offset;   // floor(r * b / a)
  std::vector<double> frac;  // fractional part of r * b / a
};

std::vector<EdgeStencil> make_stencils(const DpConfig& cfg) {
  std::vector<Slope> order = cfg.slopes;
  // Preference order for ties: closest to unit slope, then lexicographic.
  std::stable_sort(order.begin(), order.end(), [](const Slope& x, const Slope& y) {
    const double dx = std::abs(std::log(static_cast<double>(x.value_steps) / x.time_steps));
    const double dy = std::abs(std::log(static_cast<double>(y.value_steps) / y.time_steps));
    if (dx != dy) return dx < dy;
    if (x.time_steps != y.time_steps) return x.time_steps < y.time_steps;
    return x.value_steps < y.value_steps;
  });
  order.erase(std::unique(order.begin(), order.end()), order.end());
  std::vector<EdgeStencil> out;
  for (const auto& s : order) {
    EdgeStencil e;
    e.a = s.time_steps;
    e.b = s.value_steps;
    // Uniform grid: slope in value units per time unit equals b / a.
    e.root_slope = std::sqrt(static_cast<double>(e.b) / e.a);
    for (int r = 0; r <= e.a; ++r) {
      const int num = r * e.b;
      e.offset.push_back(num / e.a);
      e.frac.push_back(static_cast<double>(num % e.a) / e.a);
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline double sample(const std::vector<double>& v, int idx, double frac) {
  if (frac == 0.0) return v[idx];
  return v[idx] + frac * (v[idx + 1] - v[idx]);
}

void check_shapes(const Channels& reference, const Channels& query, const TimeGrid& grid) {
  if (reference.empty() || reference.size() != query.size()) throw InvalidInput("alignment: channel count mismatch");
  for (std::size_t k = 0; k < reference.size(); ++k) {
    if (reference[k].size() != grid.size() || query[k].size() != grid.size())
      throw InvalidInput("alignment: sample count does not match grid");
  }
}

bool all_zero(const Channels& c) {
  for (const auto& ch : c) {
    for (double v : ch) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

ObjectiveParts alignment_objective(const Channels& reference, const Channels& query, const Warp& gamma, double lambda,
                                   std::span<const double> target) {
  const TimeGrid& grid = gamma.grid();
  check_shapes(reference, query, grid);
  if (!target.empty() && target.size() != grid.size()) throw InvalidInput("alignment: target size mismatch");
  const std::size_t m = grid.size();
  const double h = grid.step();
  const auto& g = gamma.values();

  std::vector<double> warped_node(m * query.size());
  for (std::size_t k = 0; k < query.size(); ++k) {
    for (std::size_t a = 0; a < m; ++a) warped_node[k * m + a] = interpolate(query[k], grid, g[a]);
  }

  ObjectiveParts out;
  for (std::size_t a = 0; a + 1 < m; ++a) {
    const double root = std::sqrt((g[a + 1] - g[a]) / h);
    double data = 0.0;
    for (std::size_t node : {a, a + 1}) {
      for (std::size_t k = 0; k < query.size(); ++k) {
        const double d = reference[k][node] - root * warped_node[k * m + node];
        data += d * d;
      }
    }
    const double t0 = target.empty() ? 1.0 : target[a];
    const double t1 = target.empty() ? 1.0 : target[a + 1];
    const double pen = (root - t0) * (root - t0) + (root - t1) * (root - t1);
    out.data += 0.5 * h * data;
    out.penalty += 0.5 * h * pen;
  }
  out.total = out.data + lambda * out.penalty;
  return out;
}

Channels lattice_aligned(const Channels& query, const Warp& gamma) {
  const TimeGrid& grid = gamma.grid();
  const std::size_t m = grid.size();
  const double h = grid.step();
  const auto& g = gamma.values();
  std::vector<double> root(m - 1);
  for (std::size_t a = 0; a + 1 < m; ++a) root[a] = std::sqrt((g[a + 1] - g[a]) / h);
  Channels out;
  for (const auto& q : query) {
    if (q.size() != m) throw InvalidInput("lattice_aligned: sample count does not match grid");
    std::vector<double> y(m);
    for (std::size_t a = 0; a < m; ++a) {
      double c;
      if (a == 0) {
        c = root[0];
      } else if (a + 1 == m) {
        c = root[m - 2];
      } else {
        c = 0.5 * (root[a - 1] + root[a]);
      }
      y[a] = interpolate(q, grid, g[a]) * c;
    }
    out.push_back(std::move(y));
  }
  return out;
}

AlignResult align_channels(const Channels& reference, const Channels& query, const TimeGrid& grid, double lambda,
                           std::span<const double> target, const DpConfig& cfg) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidParameter("alignment: lambda must be finite and >= 0");
  cfg.validate();
  check_shapes(reference, query, grid);
  if (!target.empty() && target.size() != grid.size()) throw InvalidInput("alignment: target size mismatch");

  const int m = static_cast<int>(grid.size());
  const double h = grid.step();
  const std::size_t nch = reference.size();

  if (all_zero(query)) {
    AlignResult res(Warp::identity(grid));
    const ObjectiveParts parts = alignment_objective(reference, query, res.warp, lambda, target);
    res.cost = parts.total;
    res.data_part = parts.data;
    res.penalty_part = parts.penalty;
    res.degenerate = true;
    res.warnings.push_back("align: query SRSF is identically zero; returning identity warp");
    return res;
  }

  const std::vector<EdgeStencil> stencils = make_stencils(cfg);
  double min_slope = std::numeric_limits<double>::infinity();
  double max_slope = 0.0;
  for (const auto& e : stencils) {
    const double s = static_cast<double>(e.b) / e.a;
    min_slope = std::min(min_slope, s);
    max_slope = std::max(max_slope, s);
  }
  const std::vector<double> unit(static_cast<std::size_t>(m), 1.0);
  const std::span<const double> tgt = target.empty() ? std::span<const double>(unit) : target;

  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t mm = static_cast<std::size_t>(m);
  std::vector<double> cost(mm * mm, inf);
  std::vector<signed char> pred(mm * mm, -1);
  cost[0] = 0.0;

  const double slack = 1e-9;
  const double last = static_cast<double>(m - 1);

  for (int i = 1; i < m; ++i) {
    // Nodes outside the cone of feasible slopes from the start and to the end
    // can never lie on a complete path.
    const double lo = std::max(min_slope * i, last - max_slope * (last - i));
    const double hi = std::min(max_slope * i, last - min_slope * (last - i));
    const int jlo = std::max(1, static_cast<int>(std::ceil(lo - slack)));
    const int jhi = std::min(m - 1, static_cast<int>(std::floor(hi + slack)));
    for (int j = jlo; j <= jhi; ++j) {
      double best = inf;
      signed char best_e = -1;
      for (std::size_t e = 0; e < stencils.size(); ++e) {
        const EdgeStencil& st = stencils[e];
        const int i0 = i - st.a;
        const int j0 = j - st.b;
        if (i0 < 0 || j0 < 0) continue;
        const double prev = cost[static_cast<std::size_t>(i0) * mm + static_cast<std::size_t>(j0)];
        if (prev == inf) continue;
        double sum = 0.0;
        double ends = 0.0;
        for (int r = 0; r <= st.a; ++r) {
          const int ti = i0 + r;
          const int idx = j0 + st.offset[r];
          const double fr = st.frac[r];
          double gr = 0.0;
          for (std::size_t k = 0; k < nch; ++k) {
            const double d = reference[k][ti] - st.root_slope * sample(query[k], idx, fr);
            gr += d * d;
          }
          if (lambda > 0.0) {
            const double p = st.root_slope - tgt[ti];
            gr += lambda * p * p;
          }
          sum += gr;
          if (r == 0 || r == st.a) ends += gr;
        }
        const double c = prev + h * (sum - 0.5 * ends);
        if (c < best) {
          best = c;
          best_e = static_cast<signed char>(e);
        }
      }
      cost[static_cast<std::size_t>(i) * mm + static_cast<std::size_t>(j)] = best;
      pred[static_cast<std::size_t>(i) * mm + static_cast<std::size_t>(j)] = best_e;
    }
  }

  const double final_cost = cost[mm * mm - 1];
  if (!std::isfinite(final_cost)) throw NumericalError("alignment: no feasible lattice path (check slope set)");

  std::vector<double> values(mm, 0.0);
  int i = m - 1;
  int j = m - 1;
  while (i > 0) {
    const signed char e = pred[static_cast<std::size_t>(i) * mm + static_cast<std::size_t>(j)];
    const EdgeStencil& st = stencils[static_cast<std::size_t>(e)];
    const int i0 = i - st.a;
    const int j0 = j - st.b;
    for (int r = 0; r <= st.a; ++r) {
      const double pos = j0 + static_cast<double>(r * st.b) / st.a;
      values[static_cast<std::size_t>(i0 + r)] = pos / last;
    }
    i = i0;
    j = j0;
  }
  values.front() = 0.0;
  values.back() = 1.0;

  AlignResult res(Warp(grid, std::move(values)));
  res.cost = final_cost;
  const ObjectiveParts parts = alignment_objective(reference, query, res.warp, lambda, target);
  res.data_part = parts.data;
  res.penalty_part = parts.penalty;
  return res;
}

AlignResult align_pairwise(const Srsf& q1, const Srsf& q2, const DpConfig& cfg) {
  if (!(q1.grid() == q2.grid())) throw InvalidInput("align_pairwise: grids differ");
  return align_channels({q1.values()}, {q2.values()}, q1.grid(), 0.0, {}, cfg);
}

AlignResult align_pairwise_penalized(const Srsf& q1, const Srsf& q2, double lambda, const WarpSrsf& target,
                                     const DpConfig& cfg) {
  if (!(q1.grid() == q2.grid()) || !(q1.grid() == target.grid()))
    throw InvalidInput("align_pairwise_penalized: grids differ");
  if (lambda < 0.0) throw InvalidParameter("align_pairwise_penalized: lambda must be >= 0");
  return align_channels({q1.values()}, {q2.values()}, q1.grid(), lambda, target.values(), cfg);
}

}  // namespace esa
