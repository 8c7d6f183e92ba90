#include "esa/error.hpp"
#include "esa/simgen.hpp"
#include "esa/spatial_registration.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace esa;
using namespace esa::testing;

namespace {

MvSample small_setting1(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed, double b = 0.25) {
  SimConfig c = SimConfig::defaults(1);
  c.n = n;
  c.K = k;
  c.m = m;
  c.seed = seed;
  c.B = b;
  c.sigma_e = 0.1;
  return simulate(c).sample;
}

SpatialRegConfig quick(double lambda) {
  SpatialRegConfig cfg;
  cfg.lambda = lambda;
  cfg.max_outer = 6;
  cfg.max_inner = 4;
  return cfg;
}

}  // namespace

TEST_CASE("configuration validation") {
  SpatialRegConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = {};
  cfg.outer_tol = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
  cfg = {};
  cfg.max_inner = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
}

TEST_CASE("initialisation on identical functions") {
  const TimeGrid g(41);
  const SampledFunction f = sample_with(g, [](double t) { return std::sin(4 * t) + t; });
  MvSample s;
  s.funcs = {{f, f}, {f, f}};
  s.layout = SpatialLayout({{0.0, 0.0}, {1.0, 0.0}});
  const SpatialInit init = initialize_spatial(s, {});
  const Srsf q = srsf_transform(f);
  for (const auto& row : init.xi) {
    for (const auto& w : row) CHECK(sup_distance(w.values(), g.points()) <= 1e-12);
  }
  for (const auto& t : init.templates) CHECK(sup_distance(t.values(), q.values()) <= 1e-12);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(init.uniform_fallback[i]);
    CHECK(init.weights[i].rows[0].weights == std::vector<double>{1.0});
  }
  CHECK_THROWS_AS(initialize_spatial(MvSample{{{f, f}}, s.layout, {}}, {}), InvalidInput);
}

TEST_CASE("initialisation on simulated data") {
  const MvSample s = small_setting1(4, 8, 41, 3);
  const SpatialInit init = initialize_spatial(s, {});
  REQUIRE(init.weights.size() == 4);
  for (const auto& w : init.weights) {
    REQUIRE(w.rows.size() == 8);
    for (const auto& row : w.rows) {
      double sum = 0.0;
      for (double z : row.weights) {
        CHECK(z >= 0.0);
        sum += z;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-8);
    }
  }
  for (const auto& row : init.xi_psi) {
    for (const auto& p : row) CHECK(std::abs(l2_norm(p.values(), p.grid()) - 1.0) <= 1e-6);
  }
}

TEST_CASE("spatial registration run") {
  const MvSample s = small_setting1(4, 5, 41, 11);
  const SpatialRegConfig cfg = quick(0.5);
  const SpatialInit init = initialize_spatial(s, cfg);
  const SpatialRegResult r = register_spatial(s, init, cfg);

  // The first cost entry is the objective with every warp at the identity.
  const std::vector<std::vector<Warp>> ids(4, std::vector<Warp>(5, Warp::identity(s.grid())));
  CHECK(r.cost_trace.front() == spatial_objective(init.templates, init.qs, ids, init.weights, cfg.lambda));
  CHECK(r.cost_trace.back() <= r.cost_trace.front());

  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(r.aligned[i][j].values() == warp_action(init.qs[i][j], r.warps[i][j]).values());
      CHECK(std::abs(l2_norm(r.psis[i][j].values(), s.grid()) - 1.0) <= 1e-6);
    }
    for (std::size_t j = 0; j < 5; ++j) CHECK(r.weights[i].rows[j].weights == init.weights[i].rows[j].weights);
  }
  for (double v : r.delta_trace) CHECK(std::isfinite(v));
  CHECK(r.inner_iterations == static_cast<int>(r.delta_trace.size()));
  CHECK(r.inner_cost_trace.size() == r.delta_trace.size());
  CHECK(r.update_iterations.size() == static_cast<std::size_t>(r.outer_iterations));
  CHECK(r.cost_trace.size() == static_cast<std::size_t>(r.outer_iterations) + 1);

  // An inner loop that stopped early did so because delta fell below the tolerance.
  int start = 0;
  for (int end : r.update_iterations) {
    if (end - start < cfg.max_inner) CHECK(r.delta_trace[static_cast<std::size_t>(end - 1)] <= cfg.inner_tol);
    start = end;
  }
  if (r.converged) CHECK(r.template_change.back() <= cfg.outer_tol);

  // Per-component centring.
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<Warp> col;
    for (std::size_t i = 0; i < 4; ++i) col.push_back(r.warps[i][j]);
    CHECK(extrinsic_phase_distance(mean_warp(col), Warp::identity(s.grid())) <= 1e-3);
  }
}

TEST_CASE("lambda zero reproduces componentwise registration") {
  const MvSample s = small_setting1(5, 4, 41, 5);
  SpatialRegConfig cfg = quick(0.0);
  cfg.init_template = InitTemplate::kRawMean;
  cfg.max_outer = 50;
  cfg.outer_tol = 1e-4;
  const SpatialRegResult r = register_spatial(s, cfg);
  MultipleRegConfig mc;
  mc.tolerance = 1e-4;
  const auto comp = register_componentwise(s, 0.0, mc);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(sup_distance(r.templates[j].values(), comp[j].template_srsf.values()) <= 1e-6);
}

TEST_CASE("without stopping rules every sweep runs") {
  const MvSample s = small_setting1(3, 4, 31, 8);
  SpatialRegConfig cfg = quick(1.0);
  cfg.stopping_rules = false;
  cfg.max_outer = 3;
  cfg.max_inner = 2;
  const SpatialRegResult r = register_spatial(s, cfg);
  CHECK(r.outer_iterations == 3);
  CHECK(r.inner_iterations == 6);
  CHECK(r.update_iterations == std::vector<int>{2, 4, 6});
}

TEST_CASE("a dominant penalty on a uniform field gives a common warp per observation") {
  const TimeGrid g(61);
  Rng rng(13);
  MvSample s;
  for (int i = 0; i < 3; ++i) {
    const Warp w = random_warp(g, rng, 0.6);
    std::vector<SampledFunction> row;
    for (int j = 0; j < 3; ++j)
      row.push_back(compose(sample_with(g, [&](double t) { return std::sin((3 + j) * t) + 0.5 * j * t; }), w));
    s.funcs.push_back(row);
  }
  s.layout = SpatialLayout({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  SpatialRegConfig cfg = quick(1e4);
  SpatialInit init = initialize_spatial(s, cfg);
  for (auto& w : init.weights) w = uniform_kriging_weights(3);
  const SpatialRegResult r = register_spatial(s, init, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a + 1; b < 3; ++b)
        CHECK(sup_distance(r.warps[i][a].values(), r.warps[i][b].values()) <= 5.0 / 61);
    }
  }
}

TEST_CASE("convergence delta") {
  const TimeGrid g(101);
  Rng rng(14);
  using State = std::vector<std::vector<WarpSrsf>>;
  State s0(2, std::vector<WarpSrsf>(2, WarpSrsf::identity(g)));
  CHECK(convergence_delta({s0, s0}) == std::vector<double>{0.0});

  State s1 = s0;
  s1[1][0] = warp_to_psi(random_warp(g, rng));
  const double d = l2_distance(s1[1][0], s0[1][0]);
  const std::vector<double> delta = convergence_delta({s0, s1, s1});
  REQUIRE(delta.size() == 2);
  CHECK(delta[0] == doctest::Approx(d * d / 4.0).epsilon(1e-12));
  CHECK(delta[1] == 0.0);
  CHECK(convergence_delta({s0}).empty());
}
