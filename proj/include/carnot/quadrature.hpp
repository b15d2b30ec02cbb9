#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

namespace carnot {

namespace detail {
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth, int min_depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || (min_depth <= 0 && std::fabs(delta) <= 15 * tol)) return left + right + delta / 15;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1, min_depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1, min_depth - 1);
}
}  // namespace detail

/// Adaptive Simpson with absolute tolerance, a recursion cap and a forced
/// minimum depth (guards against coarse samples agreeing by accident).
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-12,
                               int max_depth = 50, int min_depth = 4) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, min_depth);
}

/// f(x) = int_0^x t sin(1/t) dt, as x^3 cos(1/x) + 3 x^4 sin(1/x) - 12 int_0^x t^3 sin(1/t) dt.
inline double integral_t_sin_inv(double x) {
  if (x == 0.0) return 0.0;
  const auto g = [](double t) { return t == 0.0 ? 0.0 : t * t * t * std::sin(1.0 / t); };
  // dyadic panels toward 0; the panel [b/2, b] contributes at most b^4
  double rest = 0.0;
  for (double b = x; std::fabs(b) > 1e-300; b /= 2) {
    const double piece = adaptive_simpson(g, b / 2, b, 1e-14);
    rest += piece;
    if (b * b * b * b < 1e-17 * std::max(1e-300, std::fabs(rest))) break;
  }
  return x * x * x * std::cos(1.0 / x) + 3 * x * x * x * x * std::sin(1.0 / x) - 12 * rest;
}

}  // namespace carnot
