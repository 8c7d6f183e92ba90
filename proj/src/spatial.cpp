#include "esa/spatial.hpp"

#include "esa/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace esa {

SpatialLayout::SpatialLayout(std::vector<std::vector<double>> sites) : sites_(std::move(sites)) {
  const std::size_t k = sites_.size();
  if (k == 0) throw InvalidInput("spatial layout needs at least one site");
  const std::size_t p = sites_.front().size();
  if (p < 1) throw InvalidInput("site coordinates are empty");
  for (const auto& s : sites_) {
    if (s.size() != p) throw InvalidInput("sites have inconsistent dimension");
    for (double c : s) {
      if (!std::isfinite(c)) throw InvalidInput("site coordinate is not finite");
    }
  }
  dist_.assign(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < p; ++c) s += (sites_[a][c] - sites_[b][c]) * (sites_[a][c] - sites_[b][c]);
      const double d = std::sqrt(s);
      dist_[a * k + b] = d;
      dist_[b * k + a] = d;
      max_distance_ = std::max(max_distance_, d);
    }
  }
  if (k > 1 && !(max_distance_ > 0.0)) throw InvalidInput("all sites coincide");
}

SpatialLayout SpatialLayout::scaled(double factor) const {
  auto s = sites_;
  for (auto& site : s) {
    for (double& c : site) c *= factor;
  }
  return SpatialLayout(std::move(s));
}

SpatialLayout SpatialLayout::subset(std::span<const std::size_t> keep) const {
  std::vector<std::vector<double>> s;
  for (std::size_t k : keep) s.push_back(sites_.at(k));
  return SpatialLayout(std::move(s));
}

VariogramBins VariogramBins::standard(const SpatialLayout& layout) {
  const double k = static_cast<double>(layout.size());
  VariogramBins b;
  b.count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(k * (k - 1.0) / 2.0))));
  b.max_distance = 0.75 * layout.max_distance();
  return b;
}

long VariogramBins::index(double d) const {
  if (!(d > 0.0) || d > max_distance || count == 0) return -1;
  const double w = width();
  long idx = static_cast<long>(std::ceil(d / w)) - 1;
  idx = std::clamp(idx, 0L, static_cast<long>(count) - 1);
  // Guard the half-open bin edges against rounding in d / w.
  while (idx > 0 && d <= static_cast<double>(idx) * w) --idx;
  while (idx + 1 < static_cast<long>(count) && d > static_cast<double>(idx + 1) * w) ++idx;
  return idx;
}

double VariogramModel::operator()(double h) const {
  if (degenerate || sill == 0.0) return nugget;
  return nugget + sill * (1.0 - std::exp(-h / range));
}

EmpiricalVariogram empirical_trace_variogram(std::span<const std::vector<double>> functions, const TimeGrid& grid,
                                             const SpatialLayout& layout, const VariogramBins& bins) {
  const std::size_t k = functions.size();
  if (k < 2) throw InvalidInput("variogram needs at least two sites");
  if (layout.size() != k) throw InvalidInput("variogram: layout size differs from number of functions");
  if (bins.count == 0 || !(bins.max_distance > 0.0)) throw InvalidParameter("variogram: invalid bins");
  std::vector<double> sum(bins.count, 0.0);
  std::vector<std::size_t> cnt(bins.count, 0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const long idx = bins.index(layout.distance(a, b));
      if (idx < 0) continue;
      const double d = l2_distance(functions[a], functions[b], grid);
      sum[static_cast<std::size_t>(idx)] += d * d;
      ++cnt[static_cast<std::size_t>(idx)];
    }
  }
  EmpiricalVariogram out;
  out.half_width = 0.5 * bins.width();
  for (std::size_t b = 0; b < bins.count; ++b) {
    if (cnt[b] == 0) continue;
    out.centers.push_back((static_cast<double>(b) + 0.5) * bins.width());
    out.counts.push_back(cnt[b]);
    out.estimates.push_back(sum[b] / (2.0 * static_cast<double>(cnt[b])));
  }
  return out;
}

EmpiricalVariogram empirical_phase_variogram(std::span<const WarpSrsf> psis, const SpatialLayout& layout,
                                             const VariogramBins& bins) {
  if (psis.empty()) throw InvalidInput("variogram needs at least two sites");
  std::vector<std::vector<double>> v;
  v.reserve(psis.size());
  for (const auto& p : psis) v.push_back(p.values());
  return empirical_trace_variogram(v, psis.front().grid(), layout, bins);
}

double weighted_sse(const EmpiricalVariogram& emp, const VariogramModel& model) {
  double s = 0.0;
  for (std::size_t b = 0; b < emp.size(); ++b) {
    const double r = emp.estimates[b] - model(emp.centers[b]);
    s += static_cast<double>(emp.counts[b]) * r * r;
  }
  return s;
}

namespace {

struct LinearFit {
  double nugget = 0.0;
  double sill = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// For a fixed range the model is linear in (nugget, sill); solve the
// two-parameter nonnegative weighted least squares by enumerating active sets.
LinearFit fit_linear(const EmpiricalVariogram& emp, double range) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> x(emp.size());
  for (std::size_t b = 0; b < emp.size(); ++b) {
    const double w = static_cast<double>(emp.counts[b]);
    x[b] = 1.0 - std::exp(-emp.centers[b] / range);
    sw += w;
    sx += w * x[b];
    sy += w * emp.estimates[b];
    sxx += w * x[b] * x[b];
    sxy += w * x[b] * emp.estimates[b];
  }
  auto sse = [&](double n0, double s) {
    double e = 0.0;
    for (std::size_t b = 0; b < emp.size(); ++b) {
      const double r = emp.estimates[b] - (n0 + s * x[b]);
      e += static_cast<double>(emp.counts[b]) * r * r;
    }
    return e;
  };
  LinearFit best;
  auto consider = [&](double n0, double s) {
    if (n0 < 0.0 || s < 0.0) return;
    const double e = sse(n0, s);
    if (e < best.sse) best = {n0, s, e};
  };
  const double det = sw * sxx - sx * sx;
  if (std::abs(det) > 1e-300) consider((sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det);
  if (sxx > 0.0) consider(0.0, sxy / sxx);
  consider(sy / sw, 0.0);
  consider(0.0, 0.0);
  return best;
}

}  // namespace

VariogramModel fit_variogram(const EmpiricalVariogram& emp) {
  if (emp.size() < 3) throw InvalidInput("fit_variogram: need at least 3 populated bins");
  const auto [lo_it, hi_it] = std::minmax_element(emp.estimates.begin(), emp.estimates.end());
  if (*hi_it - *lo_it <= 1e-10) {
    VariogramModel flat;
    double sw = 0.0, sy = 0.0;
    for (std::size_t b = 0; b < emp.size(); ++b) {
      sw += static_cast<double>(emp.counts[b]);
      sy += static_cast<double>(emp.counts[b]) * emp.estimates[b];
    }
    flat.nugget = std::max(0.0, sy / sw);
    flat.sill = 0.0;
    flat.range = emp.centers.back();
    flat.degenerate = true;
    return flat;
  }

  // Profile over log(range): coarse scan, then golden-section refinement.
  const double hmax = emp.centers.back() + emp.half_width;
  const double log_lo = std::log(1e-3 * hmax);
  const double log_hi = std::log(1e3 * hmax);
  constexpr int kScan = 241;
  auto profile = [&](double log_r) { return fit_linear(emp, std::exp(log_r)).sse; };
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int s = 0; s < kScan; ++s) {
    const double lr = log_lo + (log_hi - log_lo) * s / (kScan - 1);
    const double e = profile(lr);
    if (e < best_sse) {
      best_sse = e;
      best = s;
    }
  }
  const double step = (log_hi - log_lo) / (kScan - 1);
  double a = log_lo + step * std::max(0, best - 1);
  double b = log_lo + step * std::min(kScan - 1, best + 1);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = profile(c);
  double fd = profile(d);
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = profile(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = profile(d);
    }
  }
  double log_r = 0.5 * (a + b);
  if (profile(log_r) > best_sse) log_r = log_lo + step * best;

  const LinearFit lin = fit_linear(emp, std::exp(log_r));
  VariogramModel model;
  model.nugget = lin.nugget;
  model.sill = lin.sill;
  model.range = std::exp(log_r);
  model.degenerate = !(lin.sill > 0.0);
  if (model.degenerate) model.sill = 0.0;
  return model;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cum += u[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  return out;
}

KrigingWeights uniform_kriging_weights(std::size_t sites) {
  KrigingWeights w;
  for (std::size_t j = 0; j < sites; ++j) {
    KrigingRow row;
    row.target = j;
    for (std::size_t l = 0; l < sites; ++l) {
      if (l != j) row.neighbors.push_back(l);
    }
    row.weights.assign(row.neighbors.size(), row.neighbors.empty() ? 0.0 : 1.0 / row.neighbors.size());
    row.degenerate = true;
    w.rows.push_back(std::move(row));
  }
  return w;
}

double kriging_objective(const VariogramModel& model, const SpatialLayout& layout, const KrigingRow& row) {
  double lin = 0.0;
  double quad = 0.0;
  for (std::size_t a = 0; a < row.neighbors.size(); ++a) {
    lin += row.weights[a] * model(layout.distance(row.target, row.neighbors[a]));
    for (std::size_t b = 0; b < row.neighbors.size(); ++b) {
      if (a == b) continue;
      quad += row.weights[a] * row.weights[b] * model(layout.distance(row.neighbors[a], row.neighbors[b]));
    }
  }
  return 2.0 * lin - quad;
}

KrigingRow solve_kriging_weights(const VariogramModel& model, const SpatialLayout& layout, std::size_t target) {
  const std::size_t k = layout.size();
  if (target >= k) throw InvalidParameter("kriging: target index out of range");
  if (k < 2) throw InvalidInput("kriging: need at least two sites");
  if (model.degenerate) return uniform_kriging_weights(k).rows[target];
  if (!(model.range > 0.0) || model.nugget < 0.0 || model.sill < 0.0)
    throw InvalidParameter("kriging: invalid variogram model");

  KrigingRow row;
  row.target = target;
  for (std::size_t l = 0; l < k; ++l) {
    if (l != target) row.neighbors.push_back(l);
  }
  const std::size_t n = row.neighbors.size();
  row.weights.assign(n, 1.0 / static_cast<double>(n));
  if (n == 1) return row;

  // Semivariances between neighbours (zero on the diagonal) and to the target.
  Eigen::MatrixXd gam = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd to_target(static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    to_target(static_cast<Eigen::Index>(a)) = model(layout.distance(target, row.neighbors[a]));
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) gam(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                      model(layout.distance(row.neighbors[a], row.neighbors[b]));
    }
  }
  // Curvature along the simplex's affine hull: the Hessian is -2 Gamma, so the
  // step uses the largest eigenvalue of -P Gamma P with P the centring projector.
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
                               Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n),
                                                         1.0 / static_cast<double>(n));
  const Eigen::MatrixXd curv = -(proj * gam * proj);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(curv, Eigen::EigenvaluesOnly);
  const double lmax = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
  const double step = 1.0 / (2.0 * lmax);

  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(row.weights.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd y = x;
  double t = 1.0;
  constexpr std::size_t kMaxIter = 200000;
  std::size_t it = 0;
  for (; it < kMaxIter; ++it) {
    const Eigen::VectorXd grad = 2.0 * to_target - 2.0 * gam * y;
    const Eigen::VectorXd trial = y - step * grad;
    const std::vector<double> p = project_to_simplex(std::span<const double>(trial.data(), n));
    const Eigen::VectorXd next = Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(n));
    const double moved = (next - x).cwiseAbs().maxCoeff();
    // Adaptive restart keeps the accelerated scheme monotone in practice.
    const bool restart = (y - next).dot(next - x) > 0.0;
    const double t_next = restart ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = restart ? next : Eigen::VectorXd(next + ((t - 1.0) / t_next) * (next - x));
    t = t_next;
    x = next;
    if (moved < 1e-10) {
      ++it;
      break;
    }
  }
  row.iterations = it;
  row.weights.assign(x.data(), x.data() + n);
  return row;
}

KrigingWeights solve_kriging_weights(const VariogramModel& model, const SpatialLayout& layout) {
  KrigingWeights w;
  for (std::size_t j = 0; j < layout.size(); ++j) w.rows.push_back(solve_kriging_weights(model, layout, j));
  return w;
}

WarpSrsf krige_psi(const KrigingRow& row, std::span<const WarpSrsf> psis) {
  if (row.neighbors.empty()) throw InvalidInput("krige_psi: no neighbours");
  const TimeGrid grid = psis[row.neighbors.front()].grid();
  std::vector<double> acc(grid.size(), 0.0);
  for (std::size_t a = 0; a < row.neighbors.size(); ++a) {
    const WarpSrsf& p = psis[row.neighbors[a]];
    const double w = row.weights[a];
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * p[i];
  }
  return WarpSrsf::normalized(grid, std::move(acc));
}

}  // namespace esa
