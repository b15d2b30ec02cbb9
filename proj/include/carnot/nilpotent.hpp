#pragma once

// Homogeneous approximation of vector fields under anisotropic dilations.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "carnot/charts.hpp"
#include "carnot/convergence.hpp"
#include "carnot/frames.hpp"
#include "carnot/geometry.hpp"
#include "carnot/parallel.hpp"
#include "carnot/quasimetric.hpp"
#include "carnot/sampling.hpp"

namespace carnot {

/// x -> (delta_eps^{-1})_* eps^r X(delta_eps x); component j is eps^{r - sigma_j} a_j(delta_eps x).
class RescaledField {
 public:
  RescaledField(VectorField X, double r, double eps, Weights w) : X_(std::move(X)), r_(r), eps_(eps), w_(std::move(w)) {
    if (!(eps_ > 0.0)) throw NonpositiveEpsilon("rescaling needs eps > 0");
  }

  Vec operator()(const Vec& x) const {
    Vec v = X_(dilate(x, eps_, w_));
    for (int j = 0; j < v.size(); ++j) v[j] *= std::pow(eps_, r_ - w_[j]);
    return v;
  }

  double eps() const noexcept { return eps_; }
  double weight() const noexcept { return r_; }

 private:
  VectorField X_;
  double r_, eps_;
  Weights w_;
};

inline RescaledField rescale_field(const VectorField& X, double r, double eps, const Weights& w) {
  return RescaledField(X, r, eps, w);
}

/// Refuses frames whose commutator table breaks the filtration.
inline void require_valid_frame(const WeightedFrame& F) {
  const auto report = verify_commutator_table(F, box_grid(F.weights(), F.radius() / 2, 12));
  if (!report.valid)
    throw InvalidFrame("commutator table violates the filtration (residual " + std::to_string(report.max_violation) + ")");
}

struct NumericNilpotentization {
  std::vector<Vec> points;                 // grid points that were evaluable
  std::vector<std::vector<Vec>> limits;    // [field][point], meaningful where converged
  ConvergenceReport report;                // traces ordered field, point, component
  int skipped = 0;
};

inline NumericNilpotentization nilpotentize_numeric(const WeightedFrame& F, const std::vector<Vec>& grid,
                                                    const Schedule& schedule = {}, const TolerancePolicy& tol = {}) {
  require_valid_frame(F);
  const int n = F.dim();
  const auto& w = F.weights();
  const auto eps = schedule.values();
  NumericNilpotentization out;
  for (const auto& x : grid) {
    try {
      for (const auto& f : F.fields()) (void)f(x);
      out.points.push_back(x);
    } catch (const DomainError&) {
      ++out.skipped;
    }
  }
  const std::size_t P = out.points.size();
  std::vector<SampleTrace> traces(static_cast<std::size_t>(n) * P * static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n) * P, [&](std::size_t idx) {
    const int k = static_cast<int>(idx / P);
    const std::size_t g = idx % P;
    std::vector<std::vector<double>> seq(static_cast<std::size_t>(n));
    std::string failure;
    for (double e : eps) {
      Vec v;
      try {
        v = rescale_field(F.field(k), w[k], e, w)(out.points[g]);
      } catch (const DomainError& err) {
        v = Vec::Constant(n, std::numeric_limits<double>::quiet_NaN());
        if (failure.empty()) failure = err.what();
      }
      for (int j = 0; j < n; ++j) seq[static_cast<std::size_t>(j)].push_back(v[j]);
    }
    for (int j = 0; j < n; ++j) {
      auto& t = traces[idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
      t.label = "X" + std::to_string(k + 1) + " point " + std::to_string(g) + " component " + std::to_string(j + 1);
      t.values = std::move(seq[static_cast<std::size_t>(j)]);
      t.failure = failure;
      classify(t, tol, schedule.ratio);
    }
  });
  out.limits.assign(static_cast<std::size_t>(n), std::vector<Vec>(P, Vec::Zero(n)));
  for (int k = 0; k < n; ++k)
    for (std::size_t g = 0; g < P; ++g)
      for (int j = 0; j < n; ++j)
        out.limits[static_cast<std::size_t>(k)][g][j] =
            traces[(static_cast<std::size_t>(k) * P + g) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)].limit;
  out.report = aggregate(eps, std::move(traces));
  return out;
}

/// Weighted-homogeneous Taylor part of a coefficient: sum over sigma(alpha) = degree of D^alpha a(0)/alpha! x^alpha.
inline Expr homogeneous_part(const Expr& a, const Weights& w, double degree) {
  if (degree < -1e-12) return Expr(0.0);
  Expr out(0.0);
  for (const auto& alpha : multiindices_of_weight(w, degree)) {
    const double c = partial_at_zero(a, alpha.alpha) / alpha.factorial();
    if (c != 0.0) out = out + monomial(c, alpha.alpha);
  }
  return out;
}

/// X_hat_k: the d_j-coefficient keeps the Taylor terms of weight sigma_j - sigma_k.
inline WeightedFrame nilpotentize_symbolic(const WeightedFrame& F) {
  const int n = F.dim();
  const auto& w = F.weights();
  for (const auto& f : F.fields())
    for (const auto& c : f.coeffs())
      if (!c.smooth_at_zero())
        throw NonsmoothInput("coefficient '" + to_string(c) + "' is not symbolically smooth at the origin");
  if (!F.base_point().isZero(0.0)) throw InputError("translate the frame to the origin first");
  require_valid_frame(F);
  std::vector<VectorField> fields;
  for (int k = 0; k < n; ++k) {
    std::vector<Expr> c;
    for (int j = 0; j < n; ++j) c.push_back(homogeneous_part(F.field(k).coeff(j), w, w[j] - w[k]));
    fields.emplace_back(std::move(c));
  }
  return WeightedFrame(std::move(fields), w, Vec::Zero(n), F.radius());
}

struct GradedReport {
  bool passed = false;
  double max_variance = 0.0;   // spread of on-slot constants across the grid
  double max_off_slot = 0.0;   // largest constant with sigma_k != sigma_i + sigma_j
  double max_mismatch = 0.0;   // on-slot constant versus c_ijk(p) of the original frame
  int points = 0;
  StructureConstants hat;      // nilpotent constants at the first grid point
  StructureConstants original; // c_ijk(p) of the original frame
};

/// Brackets of F_hat must be constant combinations of the graded slot, equal to c_ijk(p).
inline GradedReport check_graded_structure(const WeightedFrame& Fhat, const WeightedFrame& F, int grid_points = 50,
                                           double threshold = 1e-10, double match_tol = 1e-6) {
  const int n = Fhat.dim();
  const auto& w = Fhat.weights();
  const auto table = verify_commutator_table(Fhat, box_grid(w, 0.5, grid_points));
  GradedReport r;
  r.points = static_cast<int>(table.points.size());
  r.hat = table.constants.front();
  r.original = structure_constants_at(F, F.base_point());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const bool graded = std::fabs(w[k] - (w[i] + w[j])) < 1e-12;
        double mean = 0.0;
        for (const auto& sc : table.constants) mean += sc(i, j, k);
        mean /= static_cast<double>(table.constants.size());
        double var = 0.0, peak = 0.0;
        for (const auto& sc : table.constants) {
          var += (sc(i, j, k) - mean) * (sc(i, j, k) - mean);
          peak = std::max(peak, std::fabs(sc(i, j, k)));
        }
        var /= static_cast<double>(table.constants.size());
        if (graded) {
          r.max_variance = std::max(r.max_variance, var);
          r.max_mismatch = std::max(r.max_mismatch, std::fabs(mean - r.original(i, j, k)));
        } else {
          r.max_off_slot = std::max(r.max_off_slot, peak);
        }
      }
  r.passed = r.max_variance < threshold && r.max_off_slot < threshold && r.max_mismatch < match_tol;
  return r;
}

struct ExpIdentityReport {
  bool holds = false;
  double max_error = 0.0;
  int samples = 0;
};

/// exp(sum u_i X_i)(0) = u for seeded random u in Box(radius).
inline ExpIdentityReport exp_identity_check(const WeightedFrame& Fhat, int samples = 100, double radius = 0.5,
                                            double tol = 1e-8, std::uint64_t seed = kDefaultSeed) {
  BoxSampler s(Fhat.weights(), radius, seed);
  const auto us = s.take(samples);
  std::vector<double> err(us.size());
  parallel_for(us.size(), [&](std::size_t i) {
    err[i] = (exp_map(Fhat, us[i], Vec::Zero(Fhat.dim())) - us[i]).lpNorm<Eigen::Infinity>();
  });
  ExpIdentityReport r;
  r.samples = samples;
  for (double e : err) r.max_error = std::max(r.max_error, e);
  r.holds = r.max_error < tol;
  return r;
}

struct CurveDivergenceReport {
  std::vector<double> eps;
  std::vector<double> distance;  // d_inf(gamma(1), gamma_hat(1))
  double slope = std::numeric_limits<double>::quiet_NaN();
};

/// Drives F and F_hat with controls scaled by eps^{sigma_i} and fits log d against log eps.
inline CurveDivergenceReport curve_divergence_experiment(const WeightedFrame& F, const WeightedFrame& Fhat,
                                                         const std::vector<ControlSegment>& controls,
                                                         const Schedule& schedule = Schedule::range(2, 10)) {
  CurveDivergenceReport r;
  r.eps = schedule.values();
  r.distance.assign(r.eps.size(), 0.0);
  const Vec start = F.base_point();
  parallel_for(r.eps.size(), [&](std::size_t i) {
    const auto scaled = scale_controls(controls, r.eps[i], F.weights());
    const auto [a, b] = curve_pair(F, Fhat, scaled, start);
    r.distance[i] = d_inf(F, a, b);
  });
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < r.eps.size(); ++i) {
    if (!(r.distance[i] > 0.0)) continue;
    const double x = std::log(r.eps[i]), y = std::log(r.distance[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
  }
  if (m >= 2) r.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return r;
}

}  // namespace carnot
