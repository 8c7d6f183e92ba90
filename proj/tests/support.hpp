#pragma once

#include "esa/fn_core.hpp"
#include "esa/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace esa::testing {

inline SampledFunction sample_fn(const TimeGrid& g, double (*f)(double)) {
  std::vector<double> v(g.size());
  for (std::size_t a = 0; a < v.size(); ++a) v[a] = f(g.at(a));
  return SampledFunction(g, std::move(v));
}

template <class F>
SampledFunction sample_with(const TimeGrid& g, F f) {
  std::vector<double> v(g.size());
  for (std::size_t a = 0; a < v.size(); ++a) v[a] = f(g.at(a));
  return SampledFunction(g, std::move(v));
}

template <class F>
Warp warp_with(const TimeGrid& g, F f) {
  std::vector<double> v(g.size());
  for (std::size_t a = 0; a < v.size(); ++a) v[a] = f(g.at(a));
  v.front() = 0.0;
  v.back() = 1.0;
  return Warp(g, std::move(v));
}

// Random smooth function: a few low-frequency sines plus a linear trend.
inline SampledFunction random_smooth(const TimeGrid& g, Rng& rng) {
  const double c0 = rng.uniform(-1, 1);
  double a[4], ph[4];
  for (int k = 0; k < 4; ++k) {
    a[k] = rng.uniform(-1, 1) / (k + 1);
    ph[k] = rng.uniform(0, 2 * std::numbers::pi);
  }
  return sample_with(g, [&](double t) {
    double s = c0 * t;
    for (int k = 0; k < 4; ++k) s += a[k] * std::sin(2 * std::numbers::pi * (k + 1) * t + ph[k]);
    return s;
  });
}

// Random smooth warp: a mixture of exponential-family warps, slopes in about [0.3, 3].
inline Warp random_warp(const TimeGrid& g, Rng& rng, double strength = 1.0) {
  const double c = rng.uniform(-strength, strength);
  const double d = rng.uniform(-strength, strength);
  const double w = rng.uniform(0.2, 0.8);
  auto e = [](double c, double t) { return std::abs(c) < 1e-9 ? t : std::expm1(c * t) / std::expm1(c); };
  return warp_with(g, [&](double t) { return w * e(c, t) + (1 - w) * (1 - e(d, 1 - t)); });
}

}  // namespace esa::testing
