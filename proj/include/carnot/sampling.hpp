#pragma once

#include <array>
#include <random>
#include <utility>
#include <vector>

#include "carnot/geometry.hpp"

namespace carnot {

inline constexpr std::uint64_t kDefaultSeed = 42;

namespace detail {

inline double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

inline unsigned prime(int i) {
  static constexpr std::array<unsigned, 16> primes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  return primes.at(static_cast<std::size_t>(i));
}

}  // namespace detail

/// Halton point number `index` (1-based, index 0 is the corner) in [0,1)^dim.
inline Vec halton(std::uint64_t index, int dim) {
  Vec h(dim);
  for (int k = 0; k < dim; ++k) h[k] = detail::radical_inverse(index, detail::prime(k));
  return h;
}

/// Maps a unit-cube point onto the open box of quasinorm radius r.
inline Vec to_box(const Vec& unit, double radius, const Weights& w, double shrink = 0.999) {
  Vec x(unit.size());
  for (int k = 0; k < unit.size(); ++k) x[k] = (2.0 * unit[k] - 1.0) * shrink * std::pow(radius, w[k]);
  return x;
}

/// count low-discrepancy points in the open Box(radius).
inline std::vector<Vec> box_grid(const Weights& w, double radius, int count) {
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) pts.push_back(to_box(halton(static_cast<std::uint64_t>(i), w.dim()), radius, w));
  return pts;
}

/// +-r^{sigma_k} e_k for each radius and coordinate.
inline std::vector<Vec> axis_points(const Weights& w, std::vector<double> radii = {0.25, 0.45}) {
  std::vector<Vec> pts;
  for (double r : radii)
    for (int k = 0; k < w.dim(); ++k)
      for (double sign : {1.0, -1.0}) {
        Vec x = Vec::Zero(w.dim());
        x[k] = sign * std::pow(r, w[k]);
        pts.push_back(x);
      }
  return pts;
}

/// Grid used for field and map limits: Halton points in Box(radius) plus axis points.
inline std::vector<Vec> limit_grid(const Weights& w, int count = 32, double radius = 0.5) {
  auto pts = box_grid(w, radius, count);
  for (auto& a : axis_points(w)) pts.push_back(std::move(a));
  return pts;
}

using PointPair = std::pair<Vec, Vec>;

/// Pairs of distinct low-discrepancy points in Box(radius).
inline std::vector<PointPair> pair_grid(const Weights& w, double radius, int count) {
  std::vector<PointPair> pairs;
  const int n = w.dim();
  for (int i = 1; static_cast<int>(pairs.size()) < count; ++i) {
    Vec h = halton(static_cast<std::uint64_t>(i), 2 * n);
    Vec a = to_box(h.head(n), radius, w), b = to_box(h.tail(n), radius, w);
    if ((a - b).norm() > 1e-9) pairs.emplace_back(std::move(a), std::move(b));
  }
  return pairs;
}

/// Low-discrepancy points on the unit quasinorm sphere.
inline std::vector<Vec> sphere_directions(const Weights& w, int count = 256) {
  std::vector<Vec> dirs;
  const int n = w.dim();
  for (int i = 1; static_cast<int>(dirs.size()) < count; ++i) {
    Vec x = to_box(halton(static_cast<std::uint64_t>(i), n), 1.0, w, 1.0);
    const double q = quasinorm(x, w);
    if (q < 1e-6) continue;
    dirs.push_back(dilate(x, 1.0 / q, w));
  }
  // the coordinate axes are where anisotropic maps are most extreme
  for (int k = 0; k < n; ++k)
    for (double sign : {1.0, -1.0}) {
      Vec e = Vec::Zero(n);
      e[k] = sign;
      dirs.push_back(e);
    }
  return dirs;
}

/// Seeded uniform sampler over Box(radius).
class BoxSampler {
 public:
  BoxSampler(Weights w, double radius, std::uint64_t seed = kDefaultSeed)
      : w_(std::move(w)), radius_(radius), rng_(seed) {}

  Vec operator()() {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec x(w_.dim());
    for (int k = 0; k < w_.dim(); ++k) x[k] = u(rng_) * std::pow(radius_, w_[k]);
    return x;
  }

  std::vector<Vec> take(int count) {
    std::vector<Vec> pts;
    for (int i = 0; i < count; ++i) pts.push_back((*this)());
    return pts;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  Weights w_;
  double radius_;
  std::mt19937_64 rng_;
};

}  // namespace carnot
