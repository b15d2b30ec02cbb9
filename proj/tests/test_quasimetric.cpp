#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "carnot/quasimetric.hpp"

using namespace carnot;

namespace {
Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

WeightedFrame heisenberg() {
  return WeightedFrame({VectorField::parse({"1", "0", "-x2/2"}), VectorField::parse({"0", "1", "x1/2"}),
                        VectorField::parse({"0", "0", "1"})},
                       Weights{1, 1, 2});
}

// d_inf from the group law: u = x^{-1} y
double heis_dinf(const Vec& x, const Vec& y) {
  const double u1 = y[0] - x[0], u2 = y[1] - x[1];
  const double u3 = y[2] - x[2] - (x[0] * y[1] - x[1] * y[0]) / 2;
  return std::max({std::fabs(u1), std::fabs(u2), std::sqrt(std::fabs(u3))});
}

DistanceFn sqrt_metric() { return explicit_metric(parse("sqrt((x1 - x3)^2 + abs(x2 - x4))", 4), 2); }

Vec sin1_map(const Vec& x) {
  const double a = std::fabs(x[0]);
  return vec({x[0], x[1] + x[0] * x[0] / 2 * std::sin(1 / std::pow(a, 0.75))});
}

Vec spiral(const Vec& x) {
  const double r = std::hypot(x[0], x[1]), c = std::cos(std::log(r)), s = std::sin(std::log(r));
  return vec({x[0] * c - x[1] * s, x[0] * s + x[1] * c});
}
}  // namespace

TEST_CASE("d_inf examples", "[quasimetric]") {
  const auto H = heisenberg();
  CHECK(d_inf(H, vec({0.1, 0.2, 0.3}), vec({0.1, 0.2, 0.3})) == 0.0);
  CHECK_THAT(d_inf(H, vec({0, 0, 0}), vec({0.3, 0, 0.04})), Catch::Matchers::WithinAbs(0.3, 1e-12));
  CHECK_THAT(d_inf(H, vec({1, 0, 0}), vec({1, 1, 0})), Catch::Matchers::WithinAbs(1.0, 1e-10));
}

TEST_CASE("d_inf matches the group law", "[quasimetric][property]") {
  const auto H = heisenberg();
  BoxSampler s(H.weights(), 0.5, 12);
  for (int i = 0; i < 100; ++i) {
    const Vec x = s(), y = s();
    CHECK_THAT(d_inf(H, x, y), Catch::Matchers::WithinAbs(heis_dinf(x, y), 1e-8));
  }
}

TEST_CASE("quasimetric constants", "[quasimetric]") {
  const Weights w2{1, 1};
  const auto e = estimate_quasimetric_constants(euclidean_metric(), random_triples(w2, 1.0, 500));
  CHECK(e.Q == 1.0);
  CHECK(e.C == 1.0);
  CHECK(e.raw_C == Catch::Approx(1.0).margin(1e-12));

  const auto q = estimate_quasimetric_constants(sqrt_metric(), random_triples(Weights{1, 2}, 1.0, 10000));
  CHECK(q.Q <= std::sqrt(2.0));
  CHECK(q.C == 1.0);

  const auto H = heisenberg();
  const auto h = estimate_quasimetric_constants(box_quasimetric(H), random_triples(H.weights(), 0.5, 120));
  CHECK(h.raw_C == Catch::Approx(1.0).margin(1e-8));

  std::vector<Triple> few(50, Triple{vec({0, 0}), vec({1, 0}), vec({0, 1})});
  CHECK_THROWS_AS(estimate_quasimetric_constants(euclidean_metric(), few), DegenerateSample);
}

TEST_CASE("distance bounds", "[quasimetric]") {
  const Weights w{1, 2};
  const DistanceFn qn{[w](const Vec& x, const Vec& y) { return quasinorm(y - x, w); }, Provenance::Explicit, "q"};
  const auto samples = box_grid(w, 1.0, 400);
  const auto b = fit_distance_bounds(qn, w, 1.0, samples);
  CHECK(b.C1 == Catch::Approx(1.0));
  CHECK(b.C2 == Catch::Approx(1.0));

  const auto r = fit_distance_bounds(sqrt_metric(), w, 1.0, samples);
  CHECK(r.C1 >= 1 / std::sqrt(2.0) - 1e-12);
  CHECK(r.C2 <= std::sqrt(2.0) + 1e-12);

  const auto H = heisenberg();
  const auto h = fit_distance_bounds(box_quasimetric(H), H.weights(), 0.5, box_grid(H.weights(), 0.5, 50));
  CHECK(h.C1 == Catch::Approx(1.0).margin(1e-9));
  CHECK(h.C2 == Catch::Approx(1.0).margin(1e-9));

  const DistanceFn bad{[](const Vec& x, const Vec& y) { return (x - y).norm(); }, Provenance::Explicit, "eucl"};
  CHECK_THROWS_AS(fit_distance_bounds(bad, w, 1.0, {vec({1e-7, 0}), vec({0, 1e-14})}), UnboundedRatio);
}

TEST_CASE("bound ratio is stable as the radius halves", "[quasimetric][property]") {
  const Weights w{1, 2};
  const auto d = sqrt_metric();
  const auto cone = cone_limit(d, w, {{vec({0, 0}), vec({0.3, 0.1})}, {vec({0, 0}), vec({-0.2, 0.2})}});
  REQUIRE(cone.report.verdict == Verdict::Converged);
  const auto big = fit_distance_bounds(d, w, 0.5, box_grid(w, 0.5, 300));
  const auto small = fit_distance_bounds(d, w, 0.25, box_grid(w, 0.25, 300));
  CHECK(std::fabs((big.C2 / big.C1) / (small.C2 / small.C1) - 1.0) < 0.1);
}

TEST_CASE("cone of a homogeneous metric is constant", "[quasimetric]") {
  const Weights w{1, 2};
  const auto pairs = pair_grid(w, 0.5, 16);
  const auto r = cone_limit(sqrt_metric(), w, pairs);
  CHECK(r.report.verdict == Verdict::Converged);
  CHECK(r.homogeneity.holds);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& v = r.report.traces[i].values;
    const double exact = sqrt_metric()(pairs[i].first, pairs[i].second);
    for (double x : v) CHECK_THAT(x, Catch::Matchers::WithinRel(exact, 1e-12));
  }
}

TEST_CASE("oscillating pullback diverges", "[quasimetric]") {
  const Weights w{1, 2};
  const auto rho = pulled_back(sin1_map, sqrt_metric());
  const auto r = cone_limit(rho, w, {{vec({1, 0}), vec({2, 0})}});
  CHECK(r.report.verdict == Verdict::Diverged);
  CHECK(r.report.traces[0].amplitude >= 0.1);
  CHECK(r.table.rows.empty());
}

TEST_CASE("spiral pullback is exactly homogeneous", "[quasimetric]") {
  const Weights w{1, 1};
  const auto rho = pulled_back(spiral, euclidean_metric());
  const auto pairs = pair_grid(w, 0.5, 20);
  const auto r = cone_limit(rho, w, pairs);
  CHECK(r.report.verdict == Verdict::Converged);
  CHECK(r.homogeneity.holds);
  for (const auto& p : pairs)
    for (double e : {0.5, 1e-3, 1e-9}) {
      const double scaled = rho(dilate(p.first, e, w), dilate(p.second, e, w)) / e;
      CHECK_THAT(scaled, Catch::Matchers::WithinRel(rho(p.first, p.second), 1e-10));
    }
}

TEST_CASE("evaluation failures mark pairs inconclusive", "[quasimetric]") {
  const Weights w{1, 1};
  const DistanceFn d{[](const Vec& x, const Vec& y) {
                       if (x[0] < 1e-3) throw EvaluationFailure("too small");
                       return (x - y).norm();
                     },
                     Provenance::Explicit, "flaky"};
  const auto r = cone_limit(d, w, {{vec({0.5, 0}), vec({0, 0.5})}});
  CHECK(r.report.verdict == Verdict::Inconclusive);
  CHECK_FALSE(r.report.traces[0].failure.empty());
}

TEST_CASE("isometry check", "[quasimetric]") {
  const Weights w{1, 2};
  const auto d = sqrt_metric();
  const auto pairs = pair_grid(w, 0.4, 10);
  const auto cone = cone_limit(d, w, pairs);
  const auto id = isometry_check(cone.table, cone.table, [](const Vec& x) { return x; }, pairs);
  CHECK(id.max_discrepancy == 0.0);
  CHECK(id.pairs == 10);

  // delta_2 images: d_hat(delta_2 u, delta_2 v) = 2 d_hat(u, v), so the mismatch is d_hat itself
  std::vector<PointPair> scaled;
  for (const auto& p : pairs) scaled.emplace_back(dilate(p.first, 2, w), dilate(p.second, 2, w));
  const auto cone2 = cone_limit(d, w, scaled);
  const auto neg = isometry_check(cone2.table, cone.table, [&](const Vec& x) { return dilate(x, 2, w); }, pairs);
  double max_dhat = 0.0;
  for (const auto& row : cone.table.rows) max_dhat = std::max(max_dhat, row.value);
  CHECK(neg.max_discrepancy == Catch::Approx(max_dhat).epsilon(1e-9));

  CHECK_THROWS_AS(isometry_check(cone.table, cone.table, [&](const Vec& x) { return dilate(x, 3, w); }, pairs),
                  MissingSample);
}

TEST_CASE("cone CSV layout", "[quasimetric]") {
  const Weights w{1, 2};
  const auto r = cone_limit(sqrt_metric(), w, {{vec({0.1, 0}), vec({0.2, 0.1})}}, Schedule{1.0, 0.5, 3});
  std::ostringstream out;
  write_cone_csv(out, r);
  const std::string s = out.str();
  CHECK(s.rfind("pair_id,x,y,eps,value,verdict\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 4);
  CHECK(s.find("0,0.10000000000000001 0,0.20000000000000001 0.10000000000000001,1,") != std::string::npos);
}
