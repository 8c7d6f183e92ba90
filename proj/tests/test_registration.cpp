#include "esa/error.hpp"
#include "esa/registration.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace esa;
using namespace esa::testing;

namespace {

double bumps(double t) {
  return std::exp(-40 * (t - 0.3) * (t - 0.3)) + 0.7 * std::exp(-50 * (t - 0.65) * (t - 0.65)) + 0.3 * t;
}

double other(double t) { return std::sin(3 * t) + 0.4 * std::exp(-60 * (t - 0.5) * (t - 0.5)); }

MultipleRegConfig fine_slopes() {
  MultipleRegConfig cfg;
  cfg.dp.slopes = DpConfig::coprime_slopes(6);
  return cfg;
}

std::vector<Warp> centred_warps(const TimeGrid& g, std::size_t n, Rng& rng, double strength) {
  std::vector<Warp> ws;
  for (std::size_t i = 0; i < n; ++i) ws.push_back(random_warp(g, rng, strength));
  return center_warps(ws);
}

SpatialLayout line_layout(std::size_t k) {
  std::vector<std::vector<double>> s;
  for (std::size_t j = 0; j < k; ++j) s.push_back({static_cast<double>(j), 0.0});
  return SpatialLayout(s);
}

}  // namespace

TEST_CASE("identical functions need no warping") {
  const TimeGrid g(101);
  const Srsf q = srsf_transform(sample_fn(g, bumps));
  const std::vector<Srsf> qs(4, q);
  const MultipleRegResult r = register_multiple(qs, 0.0);
  for (const auto& w : r.warps) CHECK(sup_distance(w.values(), g.points()) <= 1e-12);
  CHECK(sup_distance(r.template_srsf.values(), q.values()) <= 1e-12);
  CHECK(r.converged);
}

TEST_CASE("recovers known centred warps") {
  const TimeGrid g(101);
  Rng rng(31);
  const Srsf q0 = srsf_transform(sample_fn(g, bumps));
  const std::vector<Warp> truth = centred_warps(g, 6, rng, 0.6);
  std::vector<Srsf> qs;
  for (const auto& h : truth) qs.push_back(warp_action(q0, invert_warp(h)));
  const MultipleRegResult r = register_multiple(qs, 0.0, fine_slopes());
  for (std::size_t i = 0; i < truth.size(); ++i) CHECK(sup_distance(r.warps[i].values(), truth[i].values()) <= 5.0 / 101);
}

TEST_CASE("cost trace, centring and aligned outputs") {
  const TimeGrid g(81);
  Rng rng(7);
  std::vector<Srsf> qs;
  for (int i = 0; i < 6; ++i) {
    const SampledFunction f = sample_with(g, [&](double t) { return bumps(t) + 0.1 * std::sin(5 * t + i); });
    qs.push_back(warp_action(srsf_transform(f), random_warp(g, rng, 0.8)));
  }
  for (double lambda : {0.0, 0.5}) {
    const MultipleRegResult r = register_multiple(qs, lambda);
    REQUIRE(r.cost_trace.size() >= 2);
    for (std::size_t s = 1; s < r.cost_trace.size(); ++s) CHECK(r.cost_trace[s] <= r.cost_trace[s - 1] + 1e-8);
    CHECK(r.cost_trace.back() <= r.cost_trace.front());
    CHECK(extrinsic_phase_distance(mean_warp(r.warps), Warp::identity(g)) <= 1e-3);
    for (std::size_t i = 0; i < qs.size(); ++i)
      CHECK(r.aligned[i].values() == warp_action(qs[i], r.warps[i]).values());
    CHECK(sup_distance(r.template_srsf.values(), mean_srsf(r.aligned).values()) == 0.0);
  }
}

TEST_CASE("iteration cap reports non-convergence") {
  const TimeGrid g(41);
  Rng rng(2);
  std::vector<Srsf> qs;
  for (int i = 0; i < 4; ++i) qs.push_back(srsf_transform(random_smooth(g, rng)));
  MultipleRegConfig cfg;
  cfg.max_iterations = 1;
  const MultipleRegResult r = register_multiple(qs, 0.0, cfg);
  CHECK(!r.converged);
  CHECK(r.iterations == 1);
  CHECK(!r.warnings.empty());
  CHECK_THROWS_AS(register_multiple(std::span<const Srsf>(qs.data(), 1), 0.0), InvalidInput);
}

TEST_CASE("mean warp") {
  const TimeGrid g(501);
  Rng rng(12);
  const Warp g0 = random_warp(g, rng);
  const std::vector<Warp> same(3, g0);
  CHECK(sup_distance(mean_warp(same).values(), g0.values()) <= 1e-9);

  const Warp mild = random_warp(g, rng, 0.4);
  const std::vector<Warp> pair{mild, invert_warp(mild)};
  CHECK(sup_distance(mean_warp(pair).values(), g.points()) <= 1e-2);

  const std::vector<Warp> centred = centred_warps(g, 8, rng, 1.0);
  CHECK(extrinsic_phase_distance(mean_warp(centred), Warp::identity(g)) <= 1e-3);
}

TEST_CASE("componentwise registration") {
  const TimeGrid g(61);
  Rng rng(5);
  MvSample s;
  for (int i = 0; i < 4; ++i) {
    const Warp w = random_warp(g, rng, 0.7);
    s.funcs.push_back({compose(sample_fn(g, bumps), w), compose(sample_fn(g, other), random_warp(g, rng, 0.7))});
  }
  s.layout = line_layout(2);
  const auto both = register_componentwise(s, 0.0);
  REQUIRE(both.size() == 2);

  MvSample swapped = s;
  for (auto& row : swapped.funcs) std::swap(row[0], row[1]);
  const auto rev = register_componentwise(swapped, 0.0);
  for (int j = 0; j < 2; ++j) {
    for (std::size_t i = 0; i < 4; ++i) CHECK(both[j].warps[i].values() == rev[1 - j].warps[i].values());
  }

  MvSample one;
  for (const auto& row : s.funcs) one.funcs.push_back({row[0]});
  one.layout = line_layout(1);
  std::vector<Srsf> qs;
  for (const auto& row : s.funcs) qs.push_back(srsf_transform(row[0]));
  const auto single = register_componentwise(one, 0.0);
  const MultipleRegResult direct = register_multiple(qs, 0.0);
  CHECK(single[0].template_srsf.values() == direct.template_srsf.values());
}

TEST_CASE("universal registration") {
  const TimeGrid g(101);
  Rng rng(19);

  SUBCASE("one component matches multiple registration bitwise") {
    MvSample s;
    for (int i = 0; i < 5; ++i) s.funcs.push_back({compose(sample_fn(g, bumps), random_warp(g, rng, 0.7))});
    s.layout = line_layout(1);
    const UniversalRegResult u = register_universal(s, 0.0);
    const auto c = register_componentwise(s, 0.0);
    CHECK(u.template_srsf.channels[0] == c[0].template_srsf.values());
    for (std::size_t i = 0; i < 5; ++i) CHECK(u.warps[i].values() == c[0].warps[i].values());
    CHECK(u.cost_trace == c[0].cost_trace);
  }

  SUBCASE("recovers a common warp per observation") {
    const std::vector<Warp> truth = centred_warps(g, 5, rng, 0.6);
    MvSample s;
    for (const auto& h : truth) {
      const Warp w = invert_warp(h);
      s.funcs.push_back({compose(sample_fn(g, bumps), w), compose(sample_fn(g, other), w)});
    }
    s.layout = line_layout(2);
    const UniversalRegResult u = register_universal(s, 0.0, fine_slopes());
    REQUIRE(u.warps.size() == truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(sup_distance(u.warps[i].values(), truth[i].values()) <= 5.0 / 101);
  }

  SUBCASE("vector action is an isometry") {
    const TimeGrid fine(501);
    const std::vector<SampledFunction> comps{random_smooth(fine, rng), random_smooth(fine, rng)};
    const VectorSrsf q = vector_srsf_transform(comps);
    for (int r = 0; r < 5; ++r) {
      const Warp w = random_warp(fine, rng);
      CHECK(std::abs(l2_norm(warp_action(q, w)) - l2_norm(q)) <= 1e-3 * std::max(1.0, l2_norm(q)));
    }
  }
}

TEST_CASE("sample validation") {
  const TimeGrid g(11);
  MvSample s;
  s.funcs = {{SampledFunction::constant(g, 1), SampledFunction::constant(g, 2)},
             {SampledFunction::constant(g, 1)}};
  s.layout = line_layout(2);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.funcs[1].push_back(SampledFunction::constant(TimeGrid(12), 0));
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s.funcs[1][1] = SampledFunction::constant(g, 3);
  CHECK_NOTHROW(s.validate());
  s.layout = line_layout(3);
  CHECK_THROWS_AS(s.validate(), InvalidInput);

  s.layout = line_layout(2);
  const std::vector<std::size_t> rows{1};
  const MvSample sub = s.subset(rows);
  CHECK(sub.n() == 1);
  CHECK(sub.funcs[0][1][0] == 3.0);
  CHECK(s.component(1).size() == 2);
}
