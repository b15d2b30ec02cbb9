#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "carnot/geometry.hpp"
#include "carnot/sampling.hpp"

using namespace carnot;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

// every alpha in [0, bound]^N with weight < bound
std::set<std::vector<int>> brute_force(const Weights& w, double bound) {
  std::set<std::vector<int>> out;
  const int n = w.dim();
  const int top = static_cast<int>(bound) + 1;
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  for (;;) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += a[static_cast<std::size_t>(i)] * w[i];
    if (s < bound) out.insert(a);
    int i = 0;
    while (i < n && ++a[static_cast<std::size_t>(i)] > top) a[static_cast<std::size_t>(i++)] = 0;
    if (i == n) break;
  }
  return out;
}
}  // namespace

TEST_CASE("weights validation", "[geometry]") {
  CHECK_NOTHROW((Weights{1, 1, 2}));
  CHECK_THROWS_AS((Weights{2, 1}), InvalidWeights);
  CHECK_THROWS_AS((Weights{1, 2, 1}), InvalidWeights);
  CHECK_THROWS_AS((Weights{1, -1}), InvalidWeights);
  CHECK_THROWS_AS(Weights(std::vector<double>{}), InvalidWeights);
  CHECK(Weights{1, 1, 2, 3}.depth() == 3);
}

TEST_CASE("dilation", "[geometry]") {
  CHECK(dilate(vec({1, 1, 1}), 0.5, {1, 1, 2}) == vec({0.5, 0.5, 0.25}));
  CHECK(dilate(vec({2, -3}), 0.1, {1, 2}).isApprox(vec({0.2, -0.03}), 1e-15));
  const Vec x = vec({0.3, -2, 7});
  CHECK(dilate(x, 1.0, {1, 1, 2}) == x);
  CHECK_THROWS_AS(dilate(x, 0.0, {1, 1, 2}), NonpositiveEpsilon);
  CHECK_THROWS_AS(dilate(x, -1.0, {1, 1, 2}), NonpositiveEpsilon);
}

TEST_CASE("dyadic dilations compose exactly", "[geometry][property]") {
  const Weights w{1, 1, 2, 3};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const Vec x = vec({u(rng), u(rng), u(rng), u(rng)});
    for (double a : {0.5, 0.25, 2.0})
      for (double b : {0.125, 4.0}) CHECK(dilate(dilate(x, a, w), b, w) == dilate(x, a * b, w));
  }
}

TEST_CASE("quasinorm", "[geometry]") {
  const Weights w{1, 1, 2};
  CHECK(quasinorm(vec({0, 0, 0}), w) == 0.0);
  CHECK(quasinorm(vec({3, -2, 4}), w) == 3.0);
  CHECK_THAT(quasinorm(vec({0.1, 0, 0.04}), w), Catch::Matchers::WithinAbs(0.2, 1e-15));
}

TEST_CASE("quasinorm is homogeneous of degree one", "[geometry][property]") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2), le(-8, 3);
  for (const Weights& w : {Weights{1, 2}, Weights{1, 1, 2}, Weights{1, 2, 3}, Weights{1, 1.5, 2.5}}) {
    for (int i = 0; i < 1000; ++i) {
      Vec x(w.dim());
      for (int k = 0; k < w.dim(); ++k) x[k] = u(rng);
      const double eps = std::exp(le(rng));
      const double lhs = quasinorm(dilate(x, eps, w), w), rhs = eps * quasinorm(x, w);
      CHECK(std::fabs(lhs - rhs) < 1e-12 * std::max(1.0, rhs));
    }
  }
}

TEST_CASE("multiindices below a weight", "[geometry]") {
  using MI = std::vector<std::vector<int>>;
  auto alphas = [](const std::vector<MultiIndex>& v) {
    MI out;
    for (const auto& a : v) out.push_back(a.alpha);
    return out;
  };
  CHECK(alphas(multiindices_below({1, 1, 2}, 2)) == MI{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  CHECK(alphas(multiindices_below({1, 2}, 1)) == MI{{0, 0}});
  CHECK(alphas(multiindices_below({1, 2}, 3)) == MI{{0, 0}, {1, 0}, {2, 0}, {0, 1}});
  CHECK_THROWS_AS(multiindices_below({1, 2}, 3.5), InvalidWeights);
}

TEST_CASE("multiindex enumeration matches brute force", "[geometry][property]") {
  for (const Weights& w : {Weights{1, 2}, Weights{1, 1, 2}, Weights{1, 2, 3}, Weights{1, 1, 2, 3}}) {
    std::set<std::vector<int>> prev;
    for (double bound = 0; bound <= w.depth() + 1; bound += 0.5) {
      const auto list = multiindices_below(w, bound);
      std::set<std::vector<int>> got;
      for (std::size_t i = 0; i < list.size(); ++i) {
        got.insert(list[i].alpha);
        CHECK(list[i].weight(w) >= list[i].order());
        if (i > 0) CHECK(list[i - 1].weight(w) <= list[i].weight(w));
      }
      CHECK(got.size() == list.size());
      CHECK(got == brute_force(w, bound));
      CHECK(std::includes(got.begin(), got.end(), prev.begin(), prev.end()));
      prev = got;
    }
  }
}

TEST_CASE("samplers stay inside their boxes", "[geometry]") {
  const Weights w{1, 1, 2};
  for (const auto& x : box_grid(w, 0.5, 64)) CHECK(quasinorm(x, w) < 0.5);
  for (const auto& d : sphere_directions(w)) CHECK_THAT(quasinorm(d, w), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(sphere_directions(w).size() == 256 + 6);
  BoxSampler s(w, 0.5);
  for (int i = 0; i < 100; ++i) CHECK(quasinorm(s(), w) <= 0.5);
  BoxSampler a(w, 0.5), b(w, 0.5);
  CHECK(a.take(5) == b.take(5));
}
