#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "carnot/expr.hpp"

using namespace carnot;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double at(const Expr& e, std::vector<double> p) { return eval(e, p); }

// random polynomial in 3 variables with small integer exponents
Expr random_polynomial(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  std::uniform_int_distribution<int> power(0, 3), terms(1, 4);
  Expr p(0.0);
  for (int t = terms(rng); t > 0; --t) {
    std::vector<int> a{power(rng), power(rng), power(rng)};
    p = p + monomial(c(rng), a);
  }
  return p;
}

}  // namespace

TEST_CASE("parse and evaluate arithmetic", "[expr]") {
  CHECK(at(parse("x1 + 2*x2", 2), {1, 2}) == 5.0);
  CHECK(at(parse("-x2/2", 3), {0, 4, 0}) == -2.0);
  CHECK(at(parse("2^3^2", 1), {0}) == 512.0);
  CHECK(at(parse("-x1^2", 1), {3}) == -9.0);
  CHECK(at(parse("1.5e-1*x1", 1), {2}) == 0.3);
  CHECK(at(parse("exp(ln(x1)) + sqrt(abs(-x2))", 2), {2, 9}) == Catch::Approx(5.0));
  CHECK(at(parse("x1 - x2 - x1", 2), {3, 4}) == -4.0);
  CHECK(at(parse("x1 / x2 / 2", 2), {8, 2}) == 2.0);
}

TEST_CASE("counterexample functions parse", "[expr]") {
  const Expr f = parse("x1^3*sin(1/x1)", 2);
  CHECK(f.dimension() == 1);
  CHECK_THAT(at(f, {0.5, 0}), WithinRel(0.125 * std::sin(2.0), 1e-15));
  CHECK_FALSE(f.smooth_at_zero());

  const Expr g = parse("x1^2/2*sin(1/abs(x1)^0.75)", 2);
  CHECK_THAT(at(g, {0.1, 0}), WithinRel(0.005 * std::sin(std::pow(10.0, 0.75)), 1e-13));
}

TEST_CASE("syntax and variable errors", "[expr]") {
  CHECK_THROWS_AS(parse("(", 2), SyntaxError);
  CHECK_THROWS_AS(parse("x1 +", 2), SyntaxError);
  CHECK_THROWS_AS(parse("sin x1", 2), SyntaxError);
  CHECK_THROWS_AS(parse("foo(x1)", 2), SyntaxError);
  CHECK_THROWS_AS(parse("x1 x2", 2), SyntaxError);
  CHECK_THROWS_AS(parse("x3", 2), UnknownVariable);
  CHECK_THROWS_AS(parse("x0", 2), UnknownVariable);
  try {
    parse("x1 + * 2", 2);
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.position() == 5);
  }
}

TEST_CASE("domain errors name the node and the point", "[expr]") {
  CHECK_THROWS_AS(at(parse("1/x1", 2), {0, 0}), DomainError);
  CHECK_THROWS_AS(at(parse("ln(x1)", 1), {-1}), DomainError);
  CHECK_THROWS_AS(at(parse("sqrt(x1)", 1), {-1}), DomainError);
  CHECK_THROWS_AS(at(parse("x1^0.5", 1), {-1}), DomainError);
  try {
    at(parse("x2 + 1/x1", 2), {0, 3});
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(e.node() == "1/x1");
    CHECK(e.point() == std::vector<double>{0, 3});
  }
}

TEST_CASE("integer powers are exact products", "[expr]") {
  CHECK(at(parse("x1^3", 1), {-1.1}) == -1.1 * -1.1 * -1.1);
  CHECK(at(parse("x1^-2", 1), {4}) == 1.0 / 16.0);
  CHECK(at(parse("x1^0", 1), {0}) == 1.0);
}

TEST_CASE("symbolic derivatives", "[expr]") {
  const Expr f = parse("x1^3*sin(1/x1)", 2);
  const Expr df = derive(f, 0);
  for (double x : {0.3, -0.7, 1.9, 0.01}) {
    const double expected = 3 * x * x * std::sin(1 / x) - x * std::cos(1 / x);
    CHECK_THAT(at(df, {x, 0}), WithinAbs(expected, 1e-13));
  }
  CHECK(derive(Expr(3.0), 0).is_constant(0.0));
  CHECK(derive(f, 1).is_constant(0.0));
  const Expr d = derive(parse("x1*x2", 2), 1);
  CHECK(to_string(d) == "x1");
  CHECK_THAT(at(derive(parse("abs(x1)", 1), 0), {-2}), WithinAbs(-1.0, 0));
  CHECK_THROWS_AS(at(derive(parse("abs(x1)", 1), 0), {0}), DomainError);
  CHECK_THAT(at(derive(parse("2^x1", 1), 0), {1}), WithinRel(2 * std::log(2.0), 1e-14));
  CHECK_THAT(at(derive(parse("x1^x2", 2), 1), {2, 3}), WithinRel(8 * std::log(2.0), 1e-14));
  CHECK_THAT(at(derive(parse("sqrt(x1)", 1), 0), {4}), WithinRel(0.25, 1e-15));
}

TEST_CASE("derivative of a polynomial is a polynomial", "[expr]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Expr p = random_polynomial(rng);
    for (int v = 0; v < 3; ++v) CHECK(derive(p, v).smooth_at_zero());
  }
}

TEST_CASE("product rule on random polynomials", "[expr][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    const Expr p = random_polynomial(rng), q = random_polynomial(rng);
    for (int v = 0; v < 3; ++v) {
      const Expr lhs = derive(p * q, v);
      const Expr rhs = derive(p, v) * q + p * derive(q, v);
      for (int i = 0; i < 100; ++i) {
        std::vector<double> x{u(rng), u(rng), u(rng)};
        const double a = eval(lhs, x), b = eval(rhs, x);
        CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)));
      }
    }
  }
}

TEST_CASE("print then parse round-trips", "[expr][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.2, 1.5);
  std::vector<Expr> samples{
      parse("x1^2/2*sin(1/abs(x1)^0.75)", 3),
      parse("-(x1 - x2) - -x3", 3),
      parse("x1/(x2*x3)/(x1 + x2)", 3),
      parse("(x1^x2)^x3 + x1^x2^x3", 3),
      parse("(-x1)^3 - exp(-x2^2) + cos(x3)*ln(x1)", 3),
      parse("0.1 + 1e-300*x1 - 2.5e7/x2", 3),
      parse("x1 - (x2 - x3) + x1*(x2 + x3) - x1/(x2/x3)", 3),
  };
  for (int t = 0; t < 10; ++t) samples.push_back(random_polynomial(rng));
  for (const auto& e : samples) {
    const std::string text = to_string(e);
    const Expr back = parse(text, 3);
    INFO(text);
    CHECK(to_string(back) == text);
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x{u(rng), u(rng), u(rng)};
      const double a = eval(e, x), b = eval(back, x);
      CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(a)));
    }
  }
}

TEST_CASE("compiled evaluation matches the tree", "[expr]") {
  const Expr e = parse("x1^2/2*sin(1/abs(x1)^0.75) + x2*cos(x3) - 3", 3);
  const CompiledExpr c(e);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x{u(rng), u(rng), u(rng)};
    CHECK(c(x) == eval(e, x));
  }
  CHECK_THROWS_AS(c(std::vector<double>{0, 1, 1}), DomainError);
}

TEST_CASE("smoothness flags", "[expr]") {
  CHECK(parse("x1^2*x2 + sin(x1) + exp(x2)/(1 + x1^2)", 2).smooth_at_zero());
  CHECK_FALSE(parse("abs(x1)", 1).smooth_at_zero());
  CHECK_FALSE(parse("sqrt(x1^2 + 1)", 1).smooth_at_zero());
  CHECK_FALSE(parse("x1^0.5", 1).smooth_at_zero());
  CHECK_FALSE(parse("x1^-1", 1).smooth_at_zero());
  CHECK_FALSE(parse("1/x1", 1).smooth_at_zero());
  CHECK_FALSE(parse("ln(1 + x1)", 1).smooth_at_zero());
  CHECK(parse("2^x1", 1).smooth_at_zero());
  CHECK(parse("sqrt(2)*x1 + abs(-3)", 1).smooth_at_zero());
}

TEST_CASE("partials at the origin", "[expr]") {
  const Expr e = parse("x1^2*x2", 2);
  CHECK(partial_at_zero(e, std::vector<int>{2, 1}) == 2.0);
  CHECK(partial_at_zero(e, std::vector<int>{1, 0}) == 0.0);
  CHECK_THROWS_AS(partial_at_zero(parse("x1^3*sin(1/x1)", 2), std::vector<int>{1, 0}), NonsmoothInput);
  CHECK_THAT(partial_at_zero(parse("sin(x1)", 1), std::vector<int>{3}), WithinAbs(-1.0, 1e-15));
}

TEST_CASE("partial of a monomial is c times beta factorial", "[expr][property]") {
  const std::vector<std::vector<int>> betas{{0, 0, 0}, {1, 0, 2}, {3, 1, 0}, {2, 2, 1}};
  for (const auto& beta : betas) {
    const Expr m = monomial(1.75, beta);
    double fact = 1.0;
    for (int b : beta)
      for (int j = 2; j <= b; ++j) fact *= j;
    for (const auto& alpha : betas) {
      const double expected = alpha == beta ? 1.75 * fact : 0.0;
      CHECK(partial_at_zero(m, alpha) == expected);
    }
  }
}

TEST_CASE("substitution", "[expr]") {
  const Expr e = parse("x1*x2 + x2", 2);
  const std::vector<Expr> rep{parse("x1 + 1", 2), parse("2*x2", 2)};
  CHECK(at(substitute(e, rep), {1, 3}) == 2 * 6 + 6);
}
