#include <catch_amalgamated.hpp>

#include <cmath>

#include "carnot/nilpotent.hpp"

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

WeightedFrame perturbed_heisenberg() {
  return WeightedFrame({VectorField::parse({"1", "0", "x1^2 - x2/2"}), VectorField::parse({"0", "1", "x1/2 + x1*x2"}),
                        VectorField::parse({"0", "0", "1 + x1"})},
                       Weights{1, 1, 2});
}

WeightedFrame engel() {
  return WeightedFrame({VectorField::parse({"1", "0", "0", "0"}), VectorField::parse({"0", "1", "x1", "x1^2/2"}),
                        VectorField::parse({"0", "0", "1", "x1"}), VectorField::parse({"0", "0", "0", "1"})},
                       Weights{1, 1, 2, 3});
}

std::vector<ControlSegment> controls() {
  return {{0, 0.25, vec({1, 0.5, 0.3})},
          {0.25, 0.5, vec({-0.3, 1, 0})},
          {0.5, 0.75, vec({-1, -0.2, -0.5})},
          {0.75, 1, vec({0.4, -1, 0.2})}};
}

double maxabs(const Vec& v) { return v.lpNorm<Eigen::Infinity>(); }
}  // namespace

TEST_CASE("rescaling leaves homogeneous fields unchanged", "[nilpotent][property]") {
  const auto H = heisenberg();
  BoxSampler s(H.weights(), 0.5, 21);
  for (int i = 0; i < 50; ++i) {
    const Vec x = s();
    for (int k = 0; k < 3; ++k)
      for (double e : {1.0, 0.5, 1e-3, 1e-8})
        CHECK(maxabs(rescale_field(H.field(k), H.weights()[k], e, H.weights())(x) - H.field(k)(x)) < 1e-12);
  }
  CHECK_THROWS_AS(rescale_field(H.field(0), 1, 0.0, H.weights()), NonpositiveEpsilon);
}

TEST_CASE("rescaled perturbation decays linearly", "[nilpotent]") {
  // X1 third component at eps: eps^{1-2} (eps^2 x1^2 - eps^2 x2/2) = eps x1^2 - x2/2
  const auto P = perturbed_heisenberg();
  const Vec x = vec({0.4, 0.2, 0.1});
  for (double e : {0.5, 0.125, 1e-4})
    CHECK_THAT(rescale_field(P.field(0), 1, e, P.weights())(x)[2], Catch::Matchers::WithinAbs(e * 0.16 - 0.1, 1e-14));
}

TEST_CASE("symbolic nilpotentization", "[nilpotent]") {
  const auto H = heisenberg();
  const auto Hh = nilpotentize_symbolic(H);
  const auto Ph = nilpotentize_symbolic(perturbed_heisenberg());
  BoxSampler s(H.weights(), 0.5, 22);
  for (int i = 0; i < 30; ++i) {
    const Vec x = s();
    for (int k = 0; k < 3; ++k) {
      CHECK(maxabs(Hh.field(k)(x) - H.field(k)(x)) < 1e-15);
      CHECK(maxabs(Ph.field(k)(x) - H.field(k)(x)) < 1e-15);
    }
  }

  const WeightedFrame rough({VectorField::parse({"1", "abs(x1)"}), VectorField::parse({"0", "1"})}, Weights{1, 2});
  CHECK_THROWS_AS(nilpotentize_symbolic(rough), NonsmoothInput);

  const WeightedFrame invalid({VectorField::parse({"1", "0", "0", "0"}), VectorField::parse({"0", "1", "0", "x1^2/2"}),
                               VectorField::parse({"0", "0", "1", "0"}), VectorField::parse({"0", "0", "0", "1"})},
                              Weights{1, 1, 2, 3});
  CHECK_THROWS_AS(nilpotentize_symbolic(invalid), InvalidFrame);
  CHECK_THROWS_AS(nilpotentize_numeric(invalid, box_grid(invalid.weights(), 0.5, 4)), InvalidFrame);
}

TEST_CASE("numeric limits agree with the symbolic fields", "[nilpotent]") {
  const auto P = perturbed_heisenberg();
  const auto Ph = nilpotentize_symbolic(P);
  const auto grid = limit_grid(P.weights(), 32, 0.5);
  const auto r = nilpotentize_numeric(P, grid);
  CHECK(r.report.verdict == Verdict::Converged);
  CHECK(r.skipped == 0);
  double worst = 0.0;
  for (int k = 0; k < 3; ++k)
    for (std::size_t g = 0; g < r.points.size(); ++g)
      worst = std::max(worst, maxabs(r.limits[static_cast<std::size_t>(k)][g] - Ph.field(k)(r.points[g])));
  CHECK(worst < 1e-6);
}

TEST_CASE("numeric nilpotentization of an oscillating field diverges", "[nilpotent]") {
  // pushforward of d/dx under (x, y + x^3 sin(1/x))
  const WeightedFrame F({VectorField::parse({"1", "3*x1^2*sin(1/x1) - x1*cos(1/x1)"}), VectorField::parse({"0", "1"})},
                        Weights{1, 2});
  const auto r = nilpotentize_numeric(F, limit_grid(F.weights(), 32, 0.5));
  CHECK(r.report.verdict == Verdict::Diverged);
  CHECK(r.skipped > 0);
}

TEST_CASE("graded structure of nilpotent frames", "[nilpotent]") {
  for (const auto& F : {perturbed_heisenberg(), engel()}) {
    const auto Fh = nilpotentize_symbolic(F);
    const auto g = check_graded_structure(Fh, F);
    CHECK(g.passed);
    CHECK(g.points == 50);
    CHECK(g.max_mismatch < 1e-9);
  }
  const auto g = check_graded_structure(nilpotentize_symbolic(perturbed_heisenberg()), perturbed_heisenberg());
  CHECK(g.hat(0, 1, 2) == Catch::Approx(1.0));
  CHECK(g.original(0, 1, 2) == Catch::Approx(1.0));
}

TEST_CASE("first-kind coordinates of nilpotent frames are the identity", "[nilpotent]") {
  const auto r = exp_identity_check(nilpotentize_symbolic(perturbed_heisenberg()));
  CHECK(r.holds);
  CHECK(r.samples == 100);
  CHECK_FALSE(exp_identity_check(engel()).holds);
}

TEST_CASE("curve divergence", "[nilpotent]") {
  const auto P = perturbed_heisenberg();
  const auto r = curve_divergence_experiment(P, nilpotentize_symbolic(P), controls());
  CHECK(r.eps.size() == 9);
  CHECK(r.slope > 1.05);
  CHECK(r.slope == Catch::Approx(1.5).margin(0.2));

  const auto H = heisenberg();
  const auto same = curve_divergence_experiment(H, nilpotentize_symbolic(H), controls());
  for (double d : same.distance) CHECK(d < 1e-12);
}
