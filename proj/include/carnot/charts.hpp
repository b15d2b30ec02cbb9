#pragma once

// Flow-based coordinates: exp maps of frozen field combinations, first-kind
// and grouped (second-kind) charts, and their Newton inverses.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "carnot/error.hpp"
#include "carnot/frames.hpp"
#include "carnot/geometry.hpp"

namespace carnot {

struct FlowOptions {
  int steps = 256;             // RK4 steps per unit time
  double escape_factor = 4.0;  // trajectories must stay in Box(escape_factor * r0) around p
};

namespace detail {

inline void check_state(const WeightedFrame& F, const Vec& x, const FlowOptions& opt) {
  if (!x.allFinite()) throw StepFailure("flow produced a non-finite state");
  if (quasinorm(x - F.base_point(), F.weights()) > opt.escape_factor * F.radius())
    throw TrajectoryEscape("trajectory left the working box");
}

/// Classical RK4 for x' = rhs(x) over time T.
template <class Rhs>
Vec rk4(const WeightedFrame& F, Rhs&& rhs, Vec x, double T, int steps, const FlowOptions& opt) {
  const double h = T / steps;
  try {
    for (int s = 0; s < steps; ++s) {
      const Vec k1 = rhs(x);
      const Vec k2 = rhs(x + 0.5 * h * k1);
      const Vec k3 = rhs(x + 0.5 * h * k2);
      const Vec k4 = rhs(x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      check_state(F, x, opt);
    }
  } catch (const DomainError& e) {
    throw StepFailure(std::string("field not evaluable along the flow: ") + e.what());
  }
  return x;
}

}  // namespace detail

/// Value at time T (default 1) of the integral curve of sum u_i X_i from start.
inline Vec exp_map(const WeightedFrame& F, const Vec& u, const Vec& start, double T = 1.0, const FlowOptions& opt = {}) {
  if (u.size() != F.dim() || start.size() != F.dim()) throw InputError("exp_map: dimension mismatch");
  if (u.isZero(0.0) || T == 0.0) return start;
  const int steps = std::max(1, static_cast<int>(std::ceil(opt.steps * std::fabs(T))));
  return detail::rk4(F, [&](const Vec& x) { return F.combination(u, x); }, start, T, steps, opt);
}

/// theta_p(u) = exp(sum u_i X_i)(p).
inline Vec theta1(const WeightedFrame& F, const Vec& u, const FlowOptions& opt = {}) {
  return exp_map(F, u, F.base_point(), 1.0, opt);
}

struct NewtonOptions {
  double fd_step = 1e-6;  // relative to the weighted scale of each coordinate
  int max_iter = 50;
  double tight = 1e-14;
  double accept = 1e-10;
};

/// Solves f(u) = target from `guess`. Residuals and finite-difference steps are
/// weighted by scale^{sigma_k} so that tiny (dilated) problems keep their
/// relative accuracy; scale is the quasinorm size of the problem.
inline Vec newton_solve(const std::function<Vec(const Vec&)>& f, const Vec& target, const Weights& w, double scale,
                        Vec guess, const NewtonOptions& opt = {}) {
  const int n = w.dim();
  scale = std::max(scale, 1e-100);
  Vec s(n);
  for (int k = 0; k < n; ++k) s[k] = std::pow(scale, w[k]);
  auto residual = [&](const Vec& u, Vec& r) {
    r = f(u) - target;
    return (r.array() / s.array()).abs().maxCoeff();
  };
  Vec u = std::move(guess), r;
  double res = residual(u, r);
  for (int it = 0; it < opt.max_iter && res > opt.tight; ++it) {
    Mat J(n, n);
    for (int i = 0; i < n; ++i) {
      const double h = opt.fd_step * s[i];
      Vec up = u, um = u;
      up[i] += h;
      um[i] -= h;
      J.col(i) = (f(up) - f(um)) / (2.0 * h);
    }
    Eigen::PartialPivLU<Mat> lu(J);
    const Vec du = lu.solve(-r);
    if (!du.allFinite()) break;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      Vec trial = u + t * du, rt;
      double rest;
      try {
        rest = residual(trial, rt);
      } catch (const TrajectoryEscape&) {
        continue;
      }
      if (rest < res) {
        u = std::move(trial);
        r = std::move(rt);
        res = rest;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (!(res < opt.accept))
    throw NewtonDivergence("Newton inverse did not converge (weighted residual " + std::to_string(res) + ")");
  return u;
}

/// First-kind coordinates of y centered at x: the u with exp(sum u_i X_i)(x) = y.
inline Vec theta1_inv(const WeightedFrame& F, const Vec& x, const Vec& y, const FlowOptions& flow = {},
                      const NewtonOptions& opt = {}) {
  const double scale = quasinorm(y - x, F.weights());
  if (scale == 0.0) return Vec::Zero(F.dim());
  return newton_solve([&](const Vec& u) { return exp_map(F, u, x, 1.0, flow); }, y, F.weights(), scale,
                      Vec::Zero(F.dim()), opt);
}

using Partition = std::vector<std::vector<int>>;

/// Checks that groups (0-based) are a disjoint cover of 0..n-1.
inline void validate_partition(const Partition& groups, int n) {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& g : groups) {
    if (g.empty()) throw BadPartition("empty group");
    for (int i : g) {
      if (i < 0 || i >= n) throw BadPartition("index out of range in partition");
      if (seen[static_cast<std::size_t>(i)]++) throw BadPartition("index repeated in partition");
    }
  }
  for (int c : seen)
    if (!c) throw BadPartition("partition does not cover every index");
}

inline Partition singletons(int n) {
  Partition p;
  for (int i = 0; i < n; ++i) p.push_back({i});
  return p;
}

inline Partition single_group(int n) {
  Partition p(1);
  for (int i = 0; i < n; ++i) p[0].push_back(i);
  return p;
}

/// Composition of group exponentials; the first group acts on p first.
inline Vec phi_grouped(const WeightedFrame& F, const Partition& groups, const Vec& u, const FlowOptions& opt = {}) {
  validate_partition(groups, F.dim());
  Vec x = F.base_point();
  for (const auto& g : groups) {
    Vec v = Vec::Zero(F.dim());
    for (int i : g) v[i] = u[i];
    x = exp_map(F, v, x, 1.0, opt);
  }
  return x;
}

enum class ChartKind { FirstKind, Grouped };

/// A coordinate system given by a forward flow map and a Newton inverse.
class Chart {
 public:
  static Chart first_kind(WeightedFrame F) { return Chart(std::move(F), ChartKind::FirstKind, {}); }

  static Chart grouped(WeightedFrame F, Partition groups) {
    validate_partition(groups, F.dim());
    return Chart(std::move(F), ChartKind::Grouped, std::move(groups));
  }

  static Chart second_kind(WeightedFrame F) {
    const int n = F.dim();
    return grouped(std::move(F), singletons(n));
  }

  ChartKind kind() const noexcept { return kind_; }
  const Partition& partition() const noexcept { return groups_; }
  const WeightedFrame& frame() const noexcept { return F_; }

  Vec forward(const Vec& u) const {
    return kind_ == ChartKind::FirstKind ? theta1(F_, u, flow_) : phi_grouped(F_, groups_, u, flow_);
  }

  Vec inverse(const Vec& x) const {
    if (kind_ == ChartKind::FirstKind) return theta1_inv(F_, F_.base_point(), x, flow_);
    const double scale = quasinorm(x - F_.base_point(), F_.weights());
    if (scale == 0.0) return Vec::Zero(F_.dim());
    return newton_solve([this](const Vec& u) { return forward(u); }, x, F_.weights(), scale, Vec::Zero(F_.dim()));
  }

 private:
  Chart(WeightedFrame F, ChartKind kind, Partition groups) : F_(std::move(F)), kind_(kind), groups_(std::move(groups)) {}

  WeightedFrame F_;
  ChartKind kind_;
  Partition groups_;
  FlowOptions flow_;
};

/// Piecewise-constant control b(t) = b on [t0, t1).
struct ControlSegment {
  double t0 = 0.0, t1 = 1.0;
  Vec b;
};

inline void validate_controls(const std::vector<ControlSegment>& controls, int n) {
  if (controls.empty()) throw InputError("controls must cover [0, 1]");
  double t = 0.0;
  for (const auto& c : controls) {
    if (c.b.size() != n) throw InputError("control vector has the wrong dimension");
    if (std::fabs(c.t0 - t) > 1e-12 || !(c.t1 > c.t0)) throw InputError("control segments must tile [0, 1] in order");
    t = c.t1;
  }
  if (std::fabs(t - 1.0) > 1e-12) throw InputError("controls must end at t = 1");
}

/// b_i -> eps^{sigma_i} b_i
inline std::vector<ControlSegment> scale_controls(std::vector<ControlSegment> controls, double eps, const Weights& w) {
  for (auto& c : controls) c.b = dilate(c.b, eps, w);
  return controls;
}

/// gamma(1) for gamma' = sum b_i(t) X_i(gamma).
inline Vec curve_endpoint(const WeightedFrame& F, const std::vector<ControlSegment>& controls, const Vec& start,
                          const FlowOptions& opt = {}) {
  validate_controls(controls, F.dim());
  Vec x = start;
  for (const auto& c : controls) {
    const double T = c.t1 - c.t0;
    const int steps = std::max(1, static_cast<int>(std::ceil(opt.steps * T)));
    if (c.b.isZero(0.0)) continue;
    x = detail::rk4(F, [&](const Vec& y) { return F.combination(c.b, y); }, x, T, steps, opt);
  }
  return x;
}

/// Endpoints of the original and the approximating system under the same controls.
inline std::pair<Vec, Vec> curve_pair(const WeightedFrame& F, const WeightedFrame& Fhat,
                                      const std::vector<ControlSegment>& controls, const Vec& start,
                                      const FlowOptions& opt = {}) {
  return {curve_endpoint(F, controls, start, opt), curve_endpoint(Fhat, controls, start, opt)};
}

}  // namespace carnot
