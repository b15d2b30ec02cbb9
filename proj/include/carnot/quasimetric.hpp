#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "carnot/charts.hpp"
#include "carnot/convergence.hpp"
#include "carnot/expr.hpp"
#include "carnot/frames.hpp"
#include "carnot/geometry.hpp"
#include "carnot/parallel.hpp"
#include "carnot/sampling.hpp"

namespace carnot {

/// d_inf(x, y): quasinorm of the first-kind coordinates of y centered at x.
inline double d_inf(const WeightedFrame& F, const Vec& x, const Vec& y) {
  return quasinorm(theta1_inv(F, x, y), F.weights());
}

enum class Provenance { BoxQuasimetric, Explicit, PulledBack };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::BoxQuasimetric: return "box_quasimetric";
    case Provenance::Explicit: return "explicit";
    default: return "pulled_back";
  }
}

struct DistanceFn {
  std::function<double(const Vec&, const Vec&)> eval;
  Provenance provenance = Provenance::Explicit;
  std::string description;

  double operator()(const Vec& x, const Vec& y) const { return eval(x, y); }
};

inline DistanceFn box_quasimetric(WeightedFrame F) {
  return {[F = std::move(F)](const Vec& x, const Vec& y) { return d_inf(F, x, y); }, Provenance::BoxQuasimetric,
          "d_inf of the frame"};
}

/// One expression in 2N variables: x1..xN the first point, xN+1..x2N the second.
inline DistanceFn explicit_metric(const Expr& e, int n) {
  if (e.dimension() > 2 * n) throw InputError("metric expression uses more than 2N variables");
  CompiledExpr c(e);
  return {[c, n](const Vec& x, const Vec& y) {
            std::vector<double> p(static_cast<std::size_t>(2 * n));
            for (int k = 0; k < n; ++k) {
              p[static_cast<std::size_t>(k)] = x[k];
              p[static_cast<std::size_t>(n + k)] = y[k];
            }
            return c(p);
          },
          Provenance::Explicit, to_string(e)};
}

inline DistanceFn euclidean_metric() {
  return {[](const Vec& x, const Vec& y) { return (x - y).norm(); }, Provenance::Explicit, "euclidean"};
}

/// rho(u, v) = inner(map(u), map(v)).
inline DistanceFn pulled_back(std::function<Vec(const Vec&)> map, DistanceFn inner, std::string what = "") {
  std::string desc = "pullback of " + inner.description + (what.empty() ? "" : " by " + what);
  return {[map = std::move(map), inner = std::move(inner)](const Vec& u, const Vec& v) { return inner(map(u), map(v)); },
          Provenance::PulledBack, std::move(desc)};
}

struct QuasimetricConstants {
  double Q = 1.0, C = 1.0;          // reported lower bounds (at least 1)
  double raw_Q = 0.0, raw_C = 0.0;  // empirical maxima
  int triples_used = 0, skipped = 0;
};

using Triple = std::array<Vec, 3>;

/// Empirical max of d(x,z)/(d(x,y)+d(y,z)) and d(x,y)/d(y,x).
inline QuasimetricConstants estimate_quasimetric_constants(const DistanceFn& d, const std::vector<Triple>& triples) {
  struct Slot {
    bool ok = false;
    double q = 0.0, c = 0.0;
  };
  std::vector<Slot> slots(triples.size());
  parallel_for(triples.size(), [&](std::size_t i) {
    const auto& [x, y, z] = triples[i];
    if ((x - y).norm() == 0.0 || (y - z).norm() == 0.0 || (x - z).norm() == 0.0) return;
    const double dxy = d(x, y), dyz = d(y, z), dxz = d(x, z), dyx = d(y, x);
    if (!(dxy > 0.0) || !(dyx > 0.0) || !(dyz > 0.0)) return;
    slots[i] = {true, dxz / (dxy + dyz), dxy / dyx};
  });
  QuasimetricConstants r;
  for (const auto& s : slots) {
    if (!s.ok) {
      ++r.skipped;
      continue;
    }
    ++r.triples_used;
    r.raw_Q = std::max(r.raw_Q, s.q);
    r.raw_C = std::max(r.raw_C, s.c);
  }
  if (r.triples_used < 100)
    throw DegenerateSample("need at least 100 non-degenerate triples, got " + std::to_string(r.triples_used));
  r.Q = std::max(1.0, r.raw_Q);
  r.C = std::max(1.0, r.raw_C);
  return r;
}

/// Triples of seeded uniform points in Box(radius).
inline std::vector<Triple> random_triples(const Weights& w, double radius, int count, std::uint64_t seed = kDefaultSeed) {
  BoxSampler s(w, radius, seed);
  std::vector<Triple> t;
  for (int i = 0; i < count; ++i) {
    Vec a = s(), b = s(), c = s();
    t.push_back({a, b, c});
  }
  return t;
}

struct DistanceBounds {
  double C1 = 0.0, C2 = 0.0;
  int used = 0;
};

/// C1 = min d(0,x)/|x|, C2 = max over samples in Box(r0).
inline DistanceBounds fit_distance_bounds(const DistanceFn& d, const Weights& w, double r0, const std::vector<Vec>& samples) {
  const Vec origin = Vec::Zero(w.dim());
  DistanceBounds b{std::numeric_limits<double>::infinity(), 0.0, 0};
  for (const auto& x : samples) {
    const double q = quasinorm(x, w);
    if (q == 0.0 || q > r0) continue;
    const double ratio = d(origin, x) / q;
    b.C1 = std::min(b.C1, ratio);
    b.C2 = std::max(b.C2, ratio);
    ++b.used;
  }
  if (b.used == 0) throw DegenerateSample("no nonzero samples inside Box(r0)");
  if (!(b.C1 > 0.0) || !std::isfinite(b.C2) || b.C2 / b.C1 > 1e6)
    throw UnboundedRatio("distance to the origin is not comparable with the quasinorm (C2/C1 = " +
                         std::to_string(b.C2 / b.C1) + ")");
  return b;
}

/// Converged values of a limit object on sample pairs.
struct LimitTable {
  struct Row {
    Vec x, y;
    double value;
  };
  std::vector<Row> rows;

  const Row* find(const Vec& x, const Vec& y, double tol = 1e-12) const {
    for (const auto& r : rows)
      if ((r.x - x).lpNorm<Eigen::Infinity>() <= tol && (r.y - y).lpNorm<Eigen::Infinity>() <= tol) return &r;
    return nullptr;
  }
};

struct HomogeneityCheck {
  bool checked = false;
  bool holds = false;
  double max_relative_error = 0.0;
};

struct ConeResult {
  ConvergenceReport report;
  LimitTable table;
  HomogeneityCheck homogeneity;
  std::vector<PointPair> pairs;
};

/// v_n = d(delta_eps x, delta_eps y) / eps along the schedule, per pair.
inline ConeResult cone_limit(const DistanceFn& d, const Weights& w, const std::vector<PointPair>& pairs,
                             const Schedule& schedule = {}, const TolerancePolicy& tol = {}) {
  const auto eps = schedule.values();
  std::vector<SampleTrace> traces(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    auto& t = traces[i];
    t.label = "pair " + std::to_string(i);
    t.values.reserve(eps.size());
    for (double e : eps) {
      try {
        t.values.push_back(d(dilate(pairs[i].first, e, w), dilate(pairs[i].second, e, w)) / e);
      } catch (const Error& err) {
        t.values.push_back(std::numeric_limits<double>::quiet_NaN());
        if (t.failure.empty()) t.failure = std::string("evaluation failure at eps = ") + std::to_string(e) + ": " + err.what();
      }
    }
    classify(t, tol, schedule.ratio);
  });
  ConeResult r;
  r.pairs = pairs;
  r.report = aggregate(eps, std::move(traces));
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (r.report.traces[i].verdict == Verdict::Converged)
      r.table.rows.push_back({pairs[i].first, pairs[i].second, r.report.traces[i].limit});

  // homogeneity of the limit, probed at the finest scale with delta_t-scaled pairs
  if (r.report.verdict == Verdict::Converged) {
    const double e = eps.back();
    std::vector<double> err(pairs.size() * 2, 0.0);
    parallel_for(pairs.size(), [&](std::size_t i) {
      const double base = r.report.traces[i].limit;
      int slot = 0;
      for (double t : {0.5, 0.25}) {
        double rel;
        try {
          const double scaled = d(dilate(dilate(pairs[i].first, t, w), e, w), dilate(dilate(pairs[i].second, t, w), e, w)) / e;
          rel = base > 0.0 ? std::fabs(scaled - t * base) / (t * base) : std::fabs(scaled);
        } catch (const Error&) {
          rel = std::numeric_limits<double>::infinity();
        }
        err[2 * i + static_cast<std::size_t>(slot++)] = rel;
      }
    });
    r.homogeneity.checked = true;
    for (double v : err) r.homogeneity.max_relative_error = std::max(r.homogeneity.max_relative_error, v);
    r.homogeneity.holds = r.homogeneity.max_relative_error < 1e-6;
  }
  return r;
}

struct IsometryReport {
  double max_discrepancy = 0.0;
  int pairs = 0;
  int worst_pair = -1;
};

/// max |rho_hat(u, v) - d_hat(L u, L v)| over the pairs.
inline IsometryReport isometry_check(const LimitTable& d_hat, const LimitTable& rho_hat,
                                     const std::function<Vec(const Vec&)>& L, const std::vector<PointPair>& pairs,
                                     double match_tol = 1e-12) {
  IsometryReport r;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto* rho = rho_hat.find(pairs[i].first, pairs[i].second, match_tol);
    if (!rho) throw MissingSample("rho_hat has no converged value for pair " + std::to_string(i));
    const Vec a = L(pairs[i].first), b = L(pairs[i].second);
    const auto* dh = d_hat.find(a, b, match_tol);
    if (!dh) throw MissingSample("d_hat has no converged value at the image of pair " + std::to_string(i));
    const double diff = std::fabs(rho->value - dh->value);
    if (r.worst_pair < 0 || diff > r.max_discrepancy) {
      r.max_discrepancy = diff;
      r.worst_pair = static_cast<int>(i);
    }
    ++r.pairs;
  }
  return r;
}

namespace detail {
inline std::string join(const Vec& v) {
  std::ostringstream s;
  s.precision(17);
  for (int i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
  return s.str();
}
}  // namespace detail

/// Columns pair_id, x, y, eps, value, verdict; coordinates are space separated.
inline void write_cone_csv(std::ostream& out, const ConeResult& r) {
  out << "pair_id,x,y,eps,value,verdict\n";
  out.precision(17);
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    const auto& t = r.report.traces[i];
    for (std::size_t n = 0; n < r.report.eps.size(); ++n)
      out << i << ',' << detail::join(r.pairs[i].first) << ',' << detail::join(r.pairs[i].second) << ','
          << r.report.eps[n] << ',' << t.values[n] << ',' << to_string(t.verdict) << '\n';
  }
}

}  // namespace carnot
