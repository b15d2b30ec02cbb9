#pragma once

// Conditions on a transition map Phi between coordinate systems:
// C1 box sandwich, C2 map limit, C3 Jacobian limit, and the Taylor test.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "carnot/charts.hpp"
#include "carnot/convergence.hpp"
#include "carnot/expr.hpp"
#include "carnot/frames.hpp"
#include "carnot/geometry.hpp"
#include "carnot/nilpotent.hpp"
#include "carnot/parallel.hpp"
#include "carnot/sampling.hpp"

namespace carnot {

enum class Condition { BoxSandwich, MapLimit, JacobianLimit, TaylorVanishing };
enum class Status { Pass, Fail, Inconclusive };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::BoxSandwich: return "C1";
    case Condition::MapLimit: return "C2";
    case Condition::JacobianLimit: return "C3";
    default: return "Taylor";
  }
}

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    default: return "inconclusive";
  }
}

inline Status status_of(Verdict v) {
  return v == Verdict::Converged ? Status::Pass : v == Verdict::Diverged ? Status::Fail : Status::Inconclusive;
}

/// Display word per condition: holds/fails, converged/diverged, pass/fail.
inline std::string condition_label(Condition c, Status s) {
  if (s == Status::Inconclusive) return "inconclusive";
  switch (c) {
    case Condition::BoxSandwich: return s == Status::Pass ? "holds" : "fails";
    case Condition::MapLimit:
    case Condition::JacobianLimit: return s == Status::Pass ? "converged" : "diverged";
    default: return s == Status::Pass ? "pass" : "fail";
  }
}

/// Reads expected labels for --expect style checks.
inline std::optional<Status> parse_status(const std::string& word) {
  if (word == "holds" || word == "converged" || word == "pass") return Status::Pass;
  if (word == "fails" || word == "diverged" || word == "fail") return Status::Fail;
  if (word == "inconclusive") return Status::Inconclusive;
  return std::nullopt;
}

struct ConditionVerdict {
  Condition condition = Condition::BoxSandwich;
  Status status = Status::Inconclusive;
  std::vector<std::string> notes;

  std::string label() const { return condition_label(condition, status); }
};

/// Phi: R^N -> R^N with Phi(0) = 0, given by N expressions or an evaluator.
class TransitionMap {
 public:
  using Fn = std::function<Vec(const Vec&)>;

  static TransitionMap symbolic(std::vector<Expr> components, std::optional<std::vector<Expr>> inverse = std::nullopt,
                                std::string description = "") {
    TransitionMap m;
    m.n_ = static_cast<int>(components.size());
    if (m.n_ == 0) throw InputError("transition map needs at least one component");
    for (const auto& c : components)
      if (c.dimension() > m.n_) throw InputError("component uses a variable beyond x" + std::to_string(m.n_));
    for (const auto& c : components) m.compiled_.emplace_back(c);
    for (int k = 0; k < m.n_; ++k)
      for (int l = 0; l < m.n_; ++l) m.partials_.emplace_back(derive(components[static_cast<std::size_t>(k)], l));
    m.components_ = std::move(components);
    if (inverse) {
      if (static_cast<int>(inverse->size()) != m.n_) throw InputError("inverse has the wrong number of components");
      std::vector<CompiledExpr> inv;
      for (const auto& c : *inverse) inv.emplace_back(c);
      m.inverse_ = [inv](const Vec& y) { return eval_all(inv, y); };
      m.inverse_components_ = std::move(*inverse);
    }
    m.description_ = std::move(description);
    m.check_origin();
    return m;
  }

  static TransitionMap opaque(int n, Fn forward, Fn inverse = {}, std::string description = "") {
    TransitionMap m;
    if (n <= 0) throw InputError("transition map needs positive dimension");
    m.n_ = n;
    m.forward_ = std::move(forward);
    m.inverse_ = std::move(inverse);
    m.description_ = std::move(description);
    m.check_origin();
    return m;
  }

  int dim() const noexcept { return n_; }
  bool is_symbolic() const noexcept { return !components_.empty(); }
  bool has_inverse() const noexcept { return static_cast<bool>(inverse_); }
  bool origin_by_continuity() const noexcept { return origin_by_continuity_; }
  const std::vector<Expr>& components() const noexcept { return components_; }
  const std::vector<Expr>& inverse_components() const noexcept { return inverse_components_; }
  const std::string& description() const noexcept { return description_; }

  Vec operator()(const Vec& x) const { return forward_ ? forward_(x) : eval_all(compiled_, x); }

  Vec inverse(const Vec& y) const {
    if (!inverse_) throw InputError("transition map has no inverse");
    return inverse_(y);
  }

  /// d Phi_k / d x_l at x.
  double partial(int k, int l, const Vec& x) const {
    if (!is_symbolic()) throw NonsmoothInput("opaque map has no symbolic partials");
    return partials_[static_cast<std::size_t>(k * n_ + l)](std::span<const double>(x.data(), static_cast<std::size_t>(n_)));
  }

  Mat jacobian(const Vec& x) const {
    Mat J(n_, n_);
    for (int k = 0; k < n_; ++k)
      for (int l = 0; l < n_; ++l) J(k, l) = partial(k, l, x);
    return J;
  }

 private:
  TransitionMap() = default;

  static Vec eval_all(const std::vector<CompiledExpr>& c, const Vec& x) {
    Vec out(static_cast<int>(c.size()));
    const std::span<const double> p(x.data(), static_cast<std::size_t>(x.size()));
    for (std::size_t k = 0; k < c.size(); ++k) out[static_cast<int>(k)] = c[k](p);
    return out;
  }

  void check_origin() {
    const Vec zero = Vec::Zero(n_);
    try {
      const Vec v = (*this)(zero);
      if (v.size() != n_) throw InputError("map returns a vector of the wrong dimension");
      if (!(v.lpNorm<Eigen::Infinity>() < 1e-12)) throw InputError("transition map must fix the origin");
      return;
    } catch (const DomainError&) {
    }
    // defined by continuity at 0: shrink along a generic direction
    Vec dir(n_);
    for (int k = 0; k < n_; ++k) dir[k] = 1.0 - 0.29 * k / n_;
    double last = std::numeric_limits<double>::infinity();
    for (double t : {1e-6, 1e-9, 1e-12}) {
      double size;
      try {
        size = (*this)(t * dir).lpNorm<Eigen::Infinity>();
      } catch (const DomainError& e) {
        throw InputError(std::string("transition map is not evaluable near the origin: ") + e.what());
      }
      if (!(size < last)) throw InputError("transition map does not tend to 0 at the origin");
      last = size;
    }
    if (!(last < 1e-5)) throw InputError("transition map does not tend to 0 at the origin");
    origin_by_continuity_ = true;
  }

  int n_ = 0;
  std::vector<Expr> components_, inverse_components_;
  std::vector<CompiledExpr> compiled_, partials_;
  Fn forward_, inverse_;
  std::string description_;
  bool origin_by_continuity_ = false;
};

/// delta_eps^{-1} Phi delta_eps (x).
inline Vec rescale_map(const TransitionMap& phi, const Weights& w, double eps, const Vec& x) {
  return undilate(phi(dilate(x, eps, w)), eps, w);
}

/// Entry (k, l) is eps^{sigma_l - sigma_k} d_l Phi_k(delta_eps x).
inline Mat rescale_jacobian(const TransitionMap& phi, const Weights& w, double eps, const Vec& x) {
  Mat J = phi.jacobian(dilate(x, eps, w));
  for (int k = 0; k < J.rows(); ++k)
    for (int l = 0; l < J.cols(); ++l) J(k, l) *= std::pow(eps, w[l] - w[k]);
  return J;
}

namespace detail {
inline void require_dims(const TransitionMap& phi, const Weights& w) {
  if (phi.dim() != w.dim()) throw InputError("map dimension does not match the number of weights");
}

inline std::vector<Vec> evaluable_points(const std::vector<Vec>& grid, const std::function<void(const Vec&)>& probe,
                                         int& skipped) {
  std::vector<Vec> kept;
  for (const auto& x : grid) {
    try {
      probe(x);
      kept.push_back(x);
    } catch (const DomainError&) {
      ++skipped;
    }
  }
  return kept;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// C1

struct BoxSandwichResult {
  ConditionVerdict verdict{Condition::BoxSandwich, Status::Inconclusive, {}};
  std::vector<double> eps, c1, c2;  // per-eps min and max of ||Phi(x)|| / eps on ||x|| = eps
  double C1 = 0.0, C2 = 0.0;
  double drift = 0.0;               // worst window-to-window factor
  int skipped = 0;                  // direction evaluations that failed
};

/// Samples the quasinorm sphere at each eps; holds iff C1 > 0 and both bounds settle.
inline BoxSandwichResult check_box_sandwich(const TransitionMap& phi, const Weights& w, const Schedule& schedule = {},
                                            const std::vector<Vec>& directions = {}, const TolerancePolicy& tol = {}) {
  detail::require_dims(phi, w);
  const auto dirs = directions.empty() ? sphere_directions(w) : directions;
  BoxSandwichResult r;
  r.eps = schedule.values();
  const std::size_t E = r.eps.size();
  r.c1.assign(E, std::numeric_limits<double>::infinity());
  r.c2.assign(E, 0.0);
  std::vector<int> skipped(E, 0);
  parallel_for(E, [&](std::size_t i) {
    const double e = r.eps[i];
    for (const auto& d : dirs) {
      double q;
      try {
        q = quasinorm(phi(dilate(d, e, w)), w) / e;
      } catch (const DomainError&) {
        ++skipped[i];
        continue;
      }
      if (!std::isfinite(q)) {
        ++skipped[i];
        continue;
      }
      r.c1[i] = std::min(r.c1[i], q);
      r.c2[i] = std::max(r.c2[i], q);
    }
  });
  for (int s : skipped) r.skipped += s;
  r.verdict.notes.push_back("sampled on " + std::to_string(dirs.size()) + " sphere directions");
  if (!phi.has_inverse()) r.verdict.notes.push_back("assuming homeomorphism");
  if (r.skipped > 0) r.verdict.notes.push_back(std::to_string(r.skipped) + " singular direction evaluations skipped");
  for (std::size_t i = 0; i < E; ++i)
    if (!std::isfinite(r.c1[i])) {
      r.verdict.status = Status::Inconclusive;
      r.verdict.notes.push_back("no evaluable direction at some eps");
      return r;
    }
  r.C1 = *std::min_element(r.c1.begin(), r.c1.end());
  r.C2 = *std::max_element(r.c2.begin(), r.c2.end());
  const int wdw = tol.diverge_window;
  if (static_cast<int>(E) < 2 * wdw) {
    r.verdict.status = r.C1 > 0.0 ? Status::Inconclusive : Status::Fail;
    r.verdict.notes.push_back("schedule too short to judge drift");
    return r;
  }
  auto window_min = [&](const std::vector<double>& v, std::size_t from) {
    return *std::min_element(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(from) + wdw);
  };
  auto window_max = [&](const std::vector<double>& v, std::size_t from) {
    return *std::max_element(v.begin() + static_cast<long>(from), v.begin() + static_cast<long>(from) + wdw);
  };
  const std::size_t last = E - static_cast<std::size_t>(wdw), prev = E - 2 * static_cast<std::size_t>(wdw);
  if (r.C1 > 0.0) {
    const double up = window_max(r.c2, last) / window_max(r.c2, prev);
    const double down = window_min(r.c1, prev) / window_min(r.c1, last);
    r.drift = std::max({up, 1.0 / up, down, 1.0 / down});
  } else {
    r.drift = std::numeric_limits<double>::infinity();
  }
  r.verdict.status = (r.C1 > 0.0 && r.drift <= tol.bracket_drift) ? Status::Pass : Status::Fail;
  return r;
}

// ---------------------------------------------------------------------------
// C2

struct MapLimitResult {
  ConditionVerdict verdict{Condition::MapLimit, Status::Inconclusive, {}};
  std::vector<Vec> points;
  std::vector<Vec> limits;   // L(x) per point
  ConvergenceReport report;  // traces ordered point, component
  HomogeneityCheck homogeneity;
  int skipped = 0;
};

/// Component k of the sequence is eps^{-sigma_k} Phi_k(delta_eps x).
inline MapLimitResult map_limit(const TransitionMap& phi, const Weights& w, const std::vector<Vec>& grid,
                                const Schedule& schedule = {}, const TolerancePolicy& tol = {}) {
  detail::require_dims(phi, w);
  const int n = w.dim();
  const auto eps = schedule.values();
  MapLimitResult r;
  r.points = detail::evaluable_points(grid, [&](const Vec& x) { (void)phi(x); }, r.skipped);
  const std::size_t P = r.points.size();
  std::vector<SampleTrace> traces(P * static_cast<std::size_t>(n));
  parallel_for(P, [&](std::size_t g) {
    std::vector<std::vector<double>> seq(static_cast<std::size_t>(n));
    std::string failure;
    for (double e : eps) {
      Vec v;
      try {
        v = rescale_map(phi, w, e, r.points[g]);
      } catch (const DomainError& err) {
        v = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
        if (failure.empty()) failure = err.what();
      }
      for (int k = 0; k < n; ++k) seq[static_cast<std::size_t>(k)].push_back(v[k]);
    }
    for (int k = 0; k < n; ++k) {
      auto& t = traces[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
      t.label = "point " + std::to_string(g) + " component " + std::to_string(k + 1);
      t.values = std::move(seq[static_cast<std::size_t>(k)]);
      t.failure = failure;
      classify(t, tol, schedule.ratio);
    }
  });
  r.report = aggregate(eps, std::move(traces));
  for (std::size_t g = 0; g < P; ++g) {
    Vec L(n);
    for (int k = 0; k < n; ++k) L[k] = r.report.traces[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)].limit;
    r.limits.push_back(L);
  }
  r.verdict.status = status_of(r.report.verdict);
  if (r.skipped > 0) r.verdict.notes.push_back(std::to_string(r.skipped) + " grid points not evaluable, skipped");

  // L(delta_t x) = delta_t L(x), probed at the finest scale
  if (r.report.verdict == Verdict::Converged) {
    const double e = eps.back();
    std::vector<double> err(P, 0.0);
    parallel_for(P, [&](std::size_t g) {
      for (double t : {0.5, 0.25}) {
        try {
          const Vec a = rescale_map(phi, w, e, dilate(r.points[g], t, w));
          err[g] = std::max(err[g], (a - dilate(r.limits[g], t, w)).lpNorm<Eigen::Infinity>());
        } catch (const DomainError&) {
          err[g] = std::numeric_limits<double>::infinity();
        }
      }
    });
    r.homogeneity.checked = true;
    for (double v : err) r.homogeneity.max_relative_error = std::max(r.homogeneity.max_relative_error, v);
    r.homogeneity.holds = r.homogeneity.max_relative_error < 1e-6;
    if (!r.homogeneity.holds) r.verdict.notes.push_back("limit map failed the homogeneity probe");
  }
  return r;
}

struct InverseLimitResult {
  ConvergenceReport report;
  double max_error = 0.0;  // against a Newton inverse of L
  bool matches = false;
  int points = 0;
};

/// eps^{-sigma_k} Phi^{-1}_k(delta_eps y) must converge to L^{-1}(y).
inline InverseLimitResult inverse_map_limit(const TransitionMap& phi, const Weights& w, const std::vector<Vec>& grid,
                                            const MapLimitResult& forward, const Schedule& schedule = {},
                                            const TolerancePolicy& tol = {}) {
  if (!phi.has_inverse()) throw InputError("inverse map limit needs an inverse");
  if (forward.report.verdict != Verdict::Converged) throw InputError("inverse map limit needs a converged map limit");
  const int n = w.dim();
  const auto eps = schedule.values();
  const double finest = eps.back();
  const auto L = [&](const Vec& x) { return rescale_map(phi, w, finest, x); };
  int skipped = 0;
  const auto pts = detail::evaluable_points(grid, [&](const Vec& y) { (void)phi.inverse(y); }, skipped);
  std::vector<SampleTrace> traces(pts.size() * static_cast<std::size_t>(n));
  std::vector<Vec> solved(pts.size());
  parallel_for(pts.size(), [&](std::size_t g) {
    std::vector<std::vector<double>> seq(static_cast<std::size_t>(n));
    for (double e : eps) {
      Vec v;
      try {
        v = undilate(phi.inverse(dilate(pts[g], e, w)), e, w);
      } catch (const DomainError&) {
        v = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
      }
      for (int k = 0; k < n; ++k) seq[static_cast<std::size_t>(k)].push_back(v[k]);
    }
    for (int k = 0; k < n; ++k) {
      auto& t = traces[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];
      t.label = "point " + std::to_string(g) + " component " + std::to_string(k + 1);
      t.values = std::move(seq[static_cast<std::size_t>(k)]);
      classify(t, tol, schedule.ratio);
    }
    try {
      solved[g] = newton_solve(L, pts[g], w, std::max(quasinorm(pts[g], w), 1e-3), pts[g]);
    } catch (const NewtonDivergence& e) {
      throw NonInvertibleL(std::string("cannot invert the limit map: ") + e.what());
    }
    Mat J(n, n);
    for (int l = 0; l < n; ++l) {
      Vec a = solved[g], b = solved[g];
      a[l] += 1e-6;
      b[l] -= 1e-6;
      J.col(l) = (L(a) - L(b)) / 2e-6;
    }
    if (!(std::fabs(J.determinant()) > 1e-10)) throw NonInvertibleL("limit map has a singular Jacobian at a sample");
  });
  InverseLimitResult r;
  r.report = aggregate(eps, std::move(traces));
  r.points = static_cast<int>(pts.size());
  for (std::size_t g = 0; g < pts.size(); ++g) {
    Vec lim(n);
    for (int k = 0; k < n; ++k) lim[k] = r.report.traces[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)].limit;
    r.max_error = std::max(r.max_error, (lim - solved[g]).lpNorm<Eigen::Infinity>());
  }
  r.matches = r.report.verdict == Verdict::Converged && r.max_error < 1e-5;
  return r;
}

// ---------------------------------------------------------------------------
// C3

struct JacobianLimitResult {
  ConditionVerdict verdict{Condition::JacobianLimit, Status::Inconclusive, {}};
  std::vector<Vec> points;
  std::vector<Mat> lambda;   // per point
  ConvergenceReport report;  // traces ordered point, row, column
  bool dl_checked = false;
  bool dl_holds = false;
  double dl_max_error = 0.0;
  int skipped = 0;
};

/// Entries eps^{sigma_l - sigma_k} d_l Phi_k(delta_eps x); with a converged map limit also checks lambda = DL.
inline JacobianLimitResult jacobian_limit(const TransitionMap& phi, const Weights& w, const std::vector<Vec>& grid,
                                          const Schedule& schedule = {}, const TolerancePolicy& tol = {},
                                          const MapLimitResult* map = nullptr) {
  detail::require_dims(phi, w);
  if (!phi.is_symbolic()) throw NonsmoothInput("Jacobian limit needs symbolic components");
  const int n = w.dim();
  const std::size_t nn = static_cast<std::size_t>(n * n);
  const auto eps = schedule.values();
  JacobianLimitResult r;
  r.points = detail::evaluable_points(grid, [&](const Vec& x) { (void)phi.jacobian(x); }, r.skipped);
  const std::size_t P = r.points.size();
  std::vector<SampleTrace> traces(P * nn);
  parallel_for(P, [&](std::size_t g) {
    std::vector<std::vector<double>> seq(nn);
    std::string failure;
    for (double e : eps) {
      Mat J;
      try {
        J = rescale_jacobian(phi, w, e, r.points[g]);
      } catch (const DomainError& err) {
        J = Mat::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
        if (failure.empty()) failure = err.what();
      }
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) seq[static_cast<std::size_t>(k * n + l)].push_back(J(k, l));
    }
    for (std::size_t q = 0; q < nn; ++q) {
      auto& t = traces[g * nn + q];
      t.label = "point " + std::to_string(g) + " entry (" + std::to_string(q / static_cast<std::size_t>(n) + 1) + "," +
                std::to_string(q % static_cast<std::size_t>(n) + 1) + ")";
      t.values = std::move(seq[q]);
      t.failure = failure;
      classify(t, tol, schedule.ratio);
    }
  });
  r.report = aggregate(eps, std::move(traces));
  for (std::size_t g = 0; g < P; ++g) {
    Mat lam(n, n);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) lam(k, l) = r.report.traces[g * nn + static_cast<std::size_t>(k * n + l)].limit;
    r.lambda.push_back(lam);
  }
  r.verdict.status = status_of(r.report.verdict);
  if (r.skipped > 0) r.verdict.notes.push_back(std::to_string(r.skipped) + " grid points not evaluable, skipped");

  if (map && map->report.verdict == Verdict::Converged && r.report.verdict == Verdict::Converged) {
    const double e = eps.back(), h = 1e-5;
    std::vector<double> err(P, 0.0);
    parallel_for(P, [&](std::size_t g) {
      for (int l = 0; l < n; ++l) {
        Vec a = r.points[g], b = r.points[g];
        a[l] += h;
        b[l] -= h;
        try {
          const Vec col = (rescale_map(phi, w, e, a) - rescale_map(phi, w, e, b)) / (2 * h);
          err[g] = std::max(err[g], (col - r.lambda[g].col(l)).lpNorm<Eigen::Infinity>());
        } catch (const DomainError&) {
          err[g] = std::numeric_limits<double>::infinity();
        }
      }
    });
    r.dl_checked = true;
    for (double v : err) r.dl_max_error = std::max(r.dl_max_error, v);
    r.dl_holds = r.dl_max_error < 1e-4;
    if (!r.dl_holds) r.verdict.notes.push_back("lambda differs from DL");
  }
  return r;
}

/// lambda(0) at the finest scale; near-origin probe when Phi is only continuous there.
inline Mat lambda_at_origin(const TransitionMap& phi, const Weights& w, const Schedule& schedule = {}) {
  const double e = schedule.values().back();
  const int n = w.dim();
  try {
    return rescale_jacobian(phi, w, e, Vec::Zero(n));
  } catch (const DomainError&) {
  }
  Vec x(n);
  for (int k = 0; k < n; ++k) x[k] = 1.0 - 0.29 * k / n;
  return rescale_jacobian(phi, w, e, dilate(x, 1e-6, w));
}

// ---------------------------------------------------------------------------
// Taylor test

struct TaylorOffender {
  int component = 0;  // 0-based
  MultiIndex alpha;
  double value = 0.0;
};

struct TaylorResult {
  ConditionVerdict verdict{Condition::TaylorVanishing, Status::Inconclusive, {}};
  std::vector<TaylorOffender> offenders;
  std::vector<Expr> L;  // weighted-homogeneous Taylor part, emitted on pass
};

/// D^alpha Phi_k(0) = 0 for every sigma(alpha) < sigma_k.
inline TaylorResult taylor_vanishing_test(const TransitionMap& phi, const Weights& w, const TolerancePolicy& tol = {}) {
  detail::require_dims(phi, w);
  if (!phi.is_symbolic()) throw NonsmoothInput("Taylor test needs symbolic components");
  for (const auto& c : phi.components())
    if (!c.smooth_at_zero()) throw NonsmoothInput("component '" + to_string(c) + "' is not symbolically smooth at the origin");
  TaylorResult r;
  const int n = w.dim();
  for (int k = 0; k < n; ++k)
    for (const auto& alpha : multiindices_below(w, w[k])) {
      const double v = partial_at_zero(phi.components()[static_cast<std::size_t>(k)], alpha.alpha);
      if (std::fabs(v) >= tol.taylor_zero) r.offenders.push_back({k, alpha, v});
    }
  r.verdict.status = r.offenders.empty() ? Status::Pass : Status::Fail;
  if (r.offenders.empty())
    for (int k = 0; k < n; ++k) r.L.push_back(homogeneous_part(phi.components()[static_cast<std::size_t>(k)], w, w[k]));
  return r;
}

// ---------------------------------------------------------------------------
// All four conditions on random polynomial maps

struct EnsembleMember {
  std::vector<Expr> components;
  bool planted = false;
};

/// Identity plus random monomials. Weight-sigma_k terms only use lower-weight variables
/// or earlier same-weight coordinates linearly, so L stays invertible. Members with odd
/// index get one sub-weight term c x^alpha, 1 <= sigma(alpha) < sigma_k, |c| in [1/2, 1].
inline std::vector<EnsembleMember> random_polynomial_maps(const Weights& w, int count,
                                                          std::uint64_t seed = kDefaultSeed) {
  const int n = w.dim();
  const double top = w.depth() + 1.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0), big(0.5, 1.0);
  auto pick = [&](std::size_t size) { return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng); };
  const auto all = detail::enumerate_below(w, top + 0.5);

  std::vector<std::vector<MultiIndex>> same(static_cast<std::size_t>(n)), higher(static_cast<std::size_t>(n)),
      lower(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k)
    for (const auto& a : all) {
      const double s = a.weight(w);
      if (s == 0.0 || s > top + 1e-12) continue;
      if (std::fabs(s - w[k]) < 1e-12) {
        bool ok = true;
        for (int j = 0; j < n; ++j)
          if (a.alpha[static_cast<std::size_t>(j)] > 0 && w[j] >= w[k]) ok = ok && a.order() == 1 && j < k;
        if (ok) same[static_cast<std::size_t>(k)].push_back(a);
      } else if (s > w[k]) {
        higher[static_cast<std::size_t>(k)].push_back(a);
      } else if (s >= 1.0) {
        lower[static_cast<std::size_t>(k)].push_back(a);
      }
    }
  std::vector<int> plantable;
  for (int k = 0; k < n; ++k)
    if (w[k] >= 2.0 && !lower[static_cast<std::size_t>(k)].empty()) plantable.push_back(k);

  std::vector<EnsembleMember> out;
  for (int m = 0; m < count; ++m) {
    EnsembleMember e;
    e.planted = (m % 2 == 1) && !plantable.empty();
    for (int k = 0; k < n; ++k) {
      Expr c = Expr::variable(k);
      for (const auto* pool : {&same[static_cast<std::size_t>(k)], &higher[static_cast<std::size_t>(k)]})
        for (int t = 0; t < 2 && !pool->empty(); ++t) c = c + monomial(coeff(rng), (*pool)[pick(pool->size())].alpha);
      e.components.push_back(c);
    }
    if (e.planted) {
      const int k = plantable[pick(plantable.size())];
      const auto& pool = lower[static_cast<std::size_t>(k)];
      const double c = big(rng) * (coeff(rng) < 0.0 ? -1.0 : 1.0);
      auto& comp = e.components[static_cast<std::size_t>(k)];
      comp = comp + monomial(c, pool[pick(pool.size())].alpha);
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct EquivalenceRow {
  EnsembleMember member;
  std::array<Status, 4> status{Status::Inconclusive, Status::Inconclusive, Status::Inconclusive, Status::Inconclusive};
  bool agree = false;  // all four equal and decided
};

struct EquivalenceReport {
  std::vector<EquivalenceRow> rows;
  int agreements = 0;
  int matches_construction = 0;  // planted -> fail, otherwise pass
};

/// Runs C1, C2, C3 and the Taylor test on each member; Inconclusive counts as disagreement.
inline EquivalenceReport equivalence_experiment(const Weights& w, const std::vector<EnsembleMember>& members,
                                                const std::vector<Vec>& grid, const Schedule& schedule = {},
                                                const TolerancePolicy& tol = {}) {
  EquivalenceReport rep;
  rep.rows.resize(members.size());
  parallel_for(members.size(), [&](std::size_t i) {
    auto& row = rep.rows[i];
    row.member = members[i];
    const auto phi = TransitionMap::symbolic(members[i].components);
    row.status[0] = check_box_sandwich(phi, w, schedule, {}, tol).verdict.status;
    row.status[1] = map_limit(phi, w, grid, schedule, tol).verdict.status;
    row.status[2] = jacobian_limit(phi, w, grid, schedule, tol).verdict.status;
    row.status[3] = taylor_vanishing_test(phi, w, tol).verdict.status;
    row.agree = row.status[0] != Status::Inconclusive && row.status[0] == row.status[1] &&
                row.status[1] == row.status[2] && row.status[2] == row.status[3];
  });
  for (const auto& row : rep.rows) {
    rep.agreements += row.agree ? 1 : 0;
    const Status want = row.member.planted ? Status::Fail : Status::Pass;
    rep.matches_construction += (row.agree && row.status[0] == want) ? 1 : 0;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Pushforward of a field through Phi

struct PushforwardResult {
  bool refused = false;
  std::string reason;
  double det_lambda0 = std::numeric_limits<double>::quiet_NaN();
  ConvergenceReport yhat;   // rescaled Phi_* X at y = L(x)
  ConvergenceReport xhat;   // rescaled X at x
  double max_discrepancy = 0.0;
  int points = 0;
};

/// Compares the limit of (delta_eps^{-1})_* eps^r (Phi_* X)(delta_eps L(x)) with lambda(x) X_hat(x).
inline PushforwardResult pushforward_limit_check(const TransitionMap& phi, const VectorField& X, double r,
                                                 const Weights& w, const std::vector<Vec>& grid,
                                                 const Schedule& schedule = {}, const TolerancePolicy& tol = {}) {
  detail::require_dims(phi, w);
  if (X.dim() != w.dim()) throw InputError("field dimension does not match the number of weights");
  PushforwardResult out;
  const auto jac = jacobian_limit(phi, w, grid, schedule, tol);
  if (jac.report.verdict != Verdict::Converged) {
    out.refused = true;
    out.reason = std::string("Jacobian limit ") + to_string(jac.report.verdict) + ", no lambda to push forward with";
    return out;
  }
  const Mat lam0 = lambda_at_origin(phi, w, schedule);
  out.det_lambda0 = lam0.determinant();
  if (!(std::fabs(out.det_lambda0) >= 1e-12)) throw SingularLambda("det lambda(0) vanishes");
  const auto map = map_limit(phi, w, jac.points, schedule, tol);
  if (map.report.verdict != Verdict::Converged) {
    out.refused = true;
    out.reason = std::string("map limit ") + to_string(map.report.verdict);
    return out;
  }

  const int n = w.dim();
  const auto eps = schedule.values();
  const std::size_t P = map.points.size();
  std::vector<SampleTrace> ty(P * static_cast<std::size_t>(n)), tx(P * static_cast<std::size_t>(n));
  parallel_for(P, [&](std::size_t g) {
    const Vec& x = map.points[g];
    const Vec y = map.limits[g];
    std::vector<std::vector<double>> sy(static_cast<std::size_t>(n)), sx(static_cast<std::size_t>(n));
    std::string failure;
    for (double e : eps) {
      Vec vy, vx;
      try {
        const Vec target = dilate(y, e, w);
        const Vec z = phi.has_inverse()
                          ? phi.inverse(target)
                          : newton_solve([&](const Vec& u) { return phi(u); }, target, w, std::max(quasinorm(target, w), 1e-300),
                                         dilate(x, e, w));
        vy = phi.jacobian(z) * X(z);
        for (int k = 0; k < n; ++k) vy[k] *= std::pow(e, r - w[k]);
      } catch (const Error& err) {
        vy = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
        if (failure.empty()) failure = err.what();
      }
      try {
        vx = rescale_field(X, r, e, w)(x);
      } catch (const DomainError&) {
        vx = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
      }
      for (int k = 0; k < n; ++k) {
        sy[static_cast<std::size_t>(k)].push_back(vy[k]);
        sx[static_cast<std::size_t>(k)].push_back(vx[k]);
      }
    }
    for (int k = 0; k < n; ++k) {
      const std::size_t q = g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k);
      ty[q].label = tx[q].label = "point " + std::to_string(g) + " component " + std::to_string(k + 1);
      ty[q].values = std::move(sy[static_cast<std::size_t>(k)]);
      ty[q].failure = failure;
      tx[q].values = std::move(sx[static_cast<std::size_t>(k)]);
      classify(ty[q], tol, schedule.ratio);
      classify(tx[q], tol, schedule.ratio);
    }
  });
  out.yhat = aggregate(eps, std::move(ty));
  out.xhat = aggregate(eps, std::move(tx));
  out.points = static_cast<int>(P);
  for (std::size_t g = 0; g < P; ++g) {
    std::size_t j = 0;
    while (j < jac.points.size() && jac.points[j] != map.points[g]) ++j;
    if (j == jac.points.size()) continue;
    Vec yh(n), xh(n);
    for (int k = 0; k < n; ++k) {
      yh[k] = out.yhat.traces[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)].limit;
      xh[k] = out.xhat.traces[g * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)].limit;
    }
    const double d = (yh - jac.lambda[j] * xh).lpNorm<Eigen::Infinity>();
    out.max_discrepancy = std::max(out.max_discrepancy, std::isfinite(d) ? d : std::numeric_limits<double>::infinity());
  }
  return out;
}

}  // namespace carnot
