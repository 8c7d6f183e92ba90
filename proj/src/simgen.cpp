#include "esa/simgen.hpp"

#include "esa/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace esa {

namespace {

enum Stream : std::uint64_t { kSites = 1, kCoefficients = 2, kAlpha = 3, kXi = 4, kNoise = 5 };

// Lower Cholesky factor, row-major.
std::vector<double> cholesky(const std::vector<double>& cov, std::size_t k) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cov[r * k + c];
  }
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    a += 1e-10 * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    llt.compute(a);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  std::vector<double> out(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] = l(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  return out;
}

std::vector<double> draw(const std::vector<double>& chol, std::size_t k, double mean, Rng& rng) {
  std::vector<double> z(k);
  for (double& v : z) v = rng.normal();
  std::vector<double> out(k, mean);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c <= r; ++c) out[r] += chol[r * k + c] * z[c];
  }
  return out;
}

double bump_template(double t, double a1, double a2) {
  return a1 * std::exp(-100.0 * (t - 1.0 / 3.0) * (t - 1.0 / 3.0)) +
         a2 * std::exp(-100.0 * (t - 2.0 / 3.0) * (t - 2.0 / 3.0));
}

SpatialLayout random_sites(std::size_t k, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, {kSites});
  std::vector<std::vector<double>> sites(k);
  for (auto& s : sites) {
    const double x = rng.uniform(-2.0, 2.0);
    const double y = rng.uniform(-2.0, 2.0);
    s = {x, y};
  }
  return SpatialLayout(std::move(sites));
}

// Warps, noise and composition shared by both settings.
void fill_sample(SimTruth& truth) {
  const SimConfig& cfg = truth.config;
  const TimeGrid grid(cfg.m);
  const std::size_t k = truth.templates.size();
  const SpatialLayout& layout = truth.sample.layout;
  const std::vector<double> noise_chol = cholesky(matern_matrix(layout, cfg.sigma_e * cfg.sigma_e, truth.range), k);

  Rng alpha_rng = Rng::substream(cfg.seed, {kAlpha});
  truth.z.resize(cfg.n);
  for (auto& z : truth.z) z = alpha_rng.uniform(-cfg.Z, cfg.Z);

  truth.alpha.clear();
  truth.xi.assign(cfg.n, {});
  truth.gamma.assign(cfg.n, {});
  truth.noise.assign(cfg.n, {});
  truth.b.assign(cfg.n, {});
  truth.sample.funcs.assign(cfg.n, {});
  for (std::size_t i = 0; i < cfg.n; ++i) {
    truth.alpha.push_back(beta_cdf_warp(grid, truth.z[i]));
    Rng xi_rng = Rng::substream(cfg.seed, {kXi, i});
    truth.b[i] = correlated_uniform(cfg.B, layout, truth.range, xi_rng);

    Rng noise_rng = Rng::substream(cfg.seed, {kNoise, i});
    std::vector<std::vector<double>> e(k, std::vector<double>(cfg.m));
    for (std::size_t a = 0; a < cfg.m; ++a) {
      const std::vector<double> v = draw(noise_chol, k, 0.0, noise_rng);
      for (std::size_t j = 0; j < k; ++j) e[j][a] = v[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      truth.xi[i].push_back(beta_cdf_warp(grid, truth.b[i][j]));
      // The composition of two Beta(1, .) CDFs is again one, with exponents adding.
      truth.gamma[i].push_back(beta_cdf_warp(grid, truth.z[i] + truth.b[i][j]));
      truth.noise[i].emplace_back(grid, e[j]);
      std::vector<double> g(cfg.m);
      for (std::size_t a = 0; a < cfg.m; ++a) g[a] = truth.templates[j][a] + e[j][a];
      truth.sample.funcs[i].push_back(compose(SampledFunction(grid, std::move(g)), truth.gamma[i][j]));
    }
  }
  if (cfg.presmooth > 0.0) truth.smoothed = presmooth(truth.sample, cfg.presmooth);
}

}  // namespace

SimConfig SimConfig::defaults(int setting) {
  SimConfig c;
  c.setting = setting;
  if (setting == 2) {
    c.K = 16;
    c.sigma_a = 2.0;
    c.B = 0.0;
  } else if (setting != 1) {
    throw InvalidParameter("simulation setting must be 1 or 2");
  }
  return c;
}

void SimConfig::validate() const {
  if (setting != 1 && setting != 2) throw InvalidParameter("simulation setting must be 1 or 2");
  if (n < 1) throw InvalidParameter("simulation: n must be >= 1");
  if (K < 2) throw InvalidParameter("simulation: K must be >= 2");
  if (setting == 2 && K != 16) throw InvalidParameter("simulation setting 2 uses the 16-electrode layout (K = 16)");
  if (!(Z >= 0.0) || !(B >= 0.0)) throw InvalidParameter("simulation: Z and B must be >= 0");
  if (!(sigma_a > 0.0) || !(sigma_e > 0.0)) throw InvalidParameter("simulation: sigma_a and sigma_e must be > 0");
  if (!(range_factor > 0.0)) throw InvalidParameter("simulation: range factor must be > 0");
  if (m < 3) throw InvalidParameter("simulation: grid size must be >= 3");
  if (!(presmooth >= 0.0)) throw InvalidParameter("simulation: presmooth strength must be >= 0");
}

double matern_cov(double d, double scale, double range, double nu) {
  if (!(range > 0.0)) throw InvalidParameter("matern_cov: range must be > 0");
  if (nu != 0.5) throw InvalidParameter("matern_cov: only nu = 0.5 is supported");
  if (d < 0.0) throw InvalidParameter("matern_cov: distance must be >= 0");
  return scale * std::exp(-d / range);
}

std::vector<double> matern_matrix(const SpatialLayout& layout, double scale, double range) {
  const std::size_t k = layout.size();
  std::vector<double> out(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) out[a * k + b] = matern_cov(layout.distance(a, b), scale, range);
  }
  return out;
}

std::vector<double> sample_mvn(const std::vector<double>& cov, std::size_t k, double mean, Rng& rng) {
  if (cov.size() != k * k) throw InvalidInput("sample_mvn: covariance has the wrong size");
  return draw(cholesky(cov, k), k, mean, rng);
}

Warp beta_cdf_warp(const TimeGrid& grid, double b) {
  if (!std::isfinite(b)) throw InvalidParameter("beta_cdf_warp: parameter must be finite");
  const double e = std::exp(b);
  std::vector<double> v(grid.size());
  for (std::size_t a = 0; a < v.size(); ++a) v[a] = 1.0 - std::pow(1.0 - grid.at(a), e);
  v.front() = 0.0;
  v.back() = 1.0;
  // Extreme exponents flatten the CDF below double resolution near one end.
  return Warp::repaired(grid, std::move(v));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<double> correlated_uniform(double bound, const SpatialLayout& layout, double range, Rng& rng) {
  if (!(bound >= 0.0)) throw InvalidParameter("correlated_uniform: bound must be >= 0");
  const std::size_t k = layout.size();
  if (bound == 0.0) return std::vector<double>(k, 0.0);
  std::vector<double> z = sample_mvn(matern_matrix(layout, 1.0, range), k, 0.0, rng);
  for (double& v : z) v = -bound + 2.0 * bound * normal_cdf(v);
  return z;
}

std::vector<double> correlated_uniform(double bound, const SpatialLayout& layout, double range, std::uint64_t seed) {
  Rng rng(seed);
  return correlated_uniform(bound, layout, range, rng);
}

std::vector<std::vector<double>> bspline_basis(const TimeGrid& grid, std::size_t count, int order) {
  if (order < 1 || count < static_cast<std::size_t>(order))
    throw InvalidParameter("bspline_basis: need count >= order >= 1");
  const std::size_t p = static_cast<std::size_t>(order);
  const std::size_t intervals = count - p + 1;
  std::vector<double> knots;
  for (std::size_t r = 0; r < p; ++r) knots.push_back(0.0);
  for (std::size_t r = 1; r < intervals; ++r) knots.push_back(static_cast<double>(r) / static_cast<double>(intervals));
  for (std::size_t r = 0; r < p; ++r) knots.push_back(1.0);

  std::vector<std::vector<double>> out(count, std::vector<double>(grid.size(), 0.0));
  for (std::size_t a = 0; a < grid.size(); ++a) {
    const double t = grid.at(a);
    // Knot span containing t; the right end belongs to the last span.
    std::size_t span = p - 1;
    while (span + 1 < count && t >= knots[span + 1]) ++span;
    std::vector<double> nb(p, 0.0);
    nb[0] = 1.0;
    // Cox-de Boor on the p non-zero functions of this span.
    for (std::size_t d = 1; d < p; ++d) {
      std::vector<double> next(p, 0.0);
      for (std::size_t r = 0; r <= d; ++r) {
        const std::size_t idx = span - d + r;
        double v = 0.0;
        if (r > 0) {
          const double den = knots[idx + d] - knots[idx];
          if (den > 0.0) v += (t - knots[idx]) / den * nb[r - 1];
        }
        if (r < d) {
          const double den = knots[idx + d + 1] - knots[idx + 1];
          if (den > 0.0) v += (knots[idx + d + 1] - t) / den * nb[r];
        }
        next[r] = v;
      }
      nb = std::move(next);
    }
    for (std::size_t r = 0; r < p; ++r) out[span - (p - 1) + r][a] = nb[r];
  }
  return out;
}

const std::vector<Electrode>& electrodes_16() {
  static const std::vector<Electrode> table = [] {
    // (label, polar angle from the vertex, azimuth), degrees.
    struct Polar {
      const char* label;
      double theta, phi;
    };
    const Polar polar[] = {{"Fp1", 90, 18},  {"Fp2", 90, -18}, {"F7", 90, 54},   {"F3", 60, 39},
                           {"Fz", 45, 0},    {"F4", 60, -39},  {"F8", 90, -54},  {"T7", 90, 90},
                           {"C3", 45, 90},   {"Cz", 0, 0},     {"C4", 45, -90},  {"T8", 90, -90},
                           {"P3", 60, 141},  {"Pz", 45, 180},  {"P4", 60, -141}, {"Oz", 90, 180}};
    std::vector<Electrode> out;
    const double deg = std::numbers::pi / 180.0;
    for (const auto& e : polar) {
      const double th = e.theta * deg;
      const double ph = e.phi * deg;
      out.push_back({e.label, std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
    }
    return out;
  }();
  return table;
}

SpatialLayout electrode_layout_16() {
  std::vector<std::vector<double>> sites;
  for (const auto& e : electrodes_16()) sites.push_back({e.x, e.y, e.z});
  return SpatialLayout(std::move(sites));
}

SimTruth gen_setting1(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.setting != 1) throw InvalidParameter("gen_setting1: config is not setting 1");
  SimTruth truth;
  truth.config = cfg;
  truth.sample.layout = random_sites(cfg.K, cfg.seed);
  truth.range = cfg.range_factor * truth.sample.layout.max_distance();
  const TimeGrid grid(cfg.m);

  const std::vector<double> chol =
      cholesky(matern_matrix(truth.sample.layout, cfg.sigma_a * cfg.sigma_a, truth.range), cfg.K);
  Rng rng = Rng::substream(cfg.seed, {kCoefficients});
  truth.coefficients.push_back(draw(chol, cfg.K, 3.0, rng));
  truth.coefficients.push_back(draw(chol, cfg.K, 3.0, rng));
  for (std::size_t j = 0; j < cfg.K; ++j) {
    std::vector<double> mu(cfg.m);
    for (std::size_t a = 0; a < cfg.m; ++a)
      mu[a] = bump_template(grid.at(a), truth.coefficients[0][j], truth.coefficients[1][j]);
    truth.templates.emplace_back(grid, std::move(mu));
  }
  fill_sample(truth);
  return truth;
}

SimTruth gen_setting2(const SimConfig& cfg) {
  cfg.validate();
  if (cfg.setting != 2) throw InvalidParameter("gen_setting2: config is not setting 2");
  SimTruth truth;
  truth.config = cfg;
  truth.sample.layout = electrode_layout_16();
  for (const auto& e : electrodes_16()) truth.sample.labels.push_back(e.label);
  truth.range = cfg.range_factor * truth.sample.layout.max_distance();
  truth.low_snr = cfg.sigma_e >= 1.0;
  const TimeGrid grid(cfg.m);

  const std::vector<std::vector<double>> basis = bspline_basis(grid, 10, 4);
  const std::vector<double> chol =
      cholesky(matern_matrix(truth.sample.layout, cfg.sigma_a * cfg.sigma_a, truth.range), cfg.K);
  Rng rng = Rng::substream(cfg.seed, {kCoefficients});
  for (std::size_t c = 0; c < basis.size(); ++c) truth.coefficients.push_back(draw(chol, cfg.K, 0.0, rng));
  for (std::size_t j = 0; j < cfg.K; ++j) {
    std::vector<double> mu(cfg.m, 0.0);
    for (std::size_t c = 0; c < basis.size(); ++c) {
      for (std::size_t a = 0; a < cfg.m; ++a) mu[a] += truth.coefficients[c][j] * basis[c][a];
    }
    truth.templates.emplace_back(grid, std::move(mu));
  }
  fill_sample(truth);
  return truth;
}

SimTruth simulate(const SimConfig& cfg) { return cfg.setting == 2 ? gen_setting2(cfg) : gen_setting1(cfg); }

SampledFunction presmooth(const SampledFunction& f, double strength) {
  if (!(strength >= 0.0) || !std::isfinite(strength)) throw InvalidParameter("presmooth: strength must be >= 0");
  if (strength == 0.0) return f;
  const std::size_t m = f.values().size();
  const double h = f.grid().step();
  const double w = strength / (h * h * h);
  using Sp = Eigen::SparseMatrix<double>;
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t r = 0; r + 2 < m; ++r) {
    const auto row = static_cast<int>(r);
    trips.emplace_back(row, row, 1.0);
    trips.emplace_back(row, row + 1, -2.0);
    trips.emplace_back(row, row + 2, 1.0);
  }
  Sp d(static_cast<Eigen::Index>(m - 2), static_cast<Eigen::Index>(m));
  d.setFromTriplets(trips.begin(), trips.end());
  Sp eye(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  eye.setIdentity();
  const Sp a = eye + w * Sp(d.transpose() * d);
  Eigen::SimplicialLDLT<Sp> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("presmooth: factorisation failed");
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(f.values().data(), static_cast<Eigen::Index>(m));
  const Eigen::VectorXd s = solver.solve(y);
  return SampledFunction(f.grid(), std::vector<double>(s.data(), s.data() + m));
}

MvSample presmooth(const MvSample& sample, double strength) {
  MvSample out;
  out.layout = sample.layout;
  out.labels = sample.labels;
  for (const auto& row : sample.funcs) {
    std::vector<SampledFunction> r;
    for (const auto& f : row) r.push_back(presmooth(f, strength));
    out.funcs.push_back(std::move(r));
  }
  return out;
}

}  // namespace esa
