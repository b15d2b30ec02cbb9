#pragma once

// Classification of eps-indexed sequences into Converged / Diverged /
// Inconclusive, shared by every limit engine.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "carnot/error.hpp"

namespace carnot {

enum class Verdict { Converged, Diverged, Inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Converged: return "converged";
    case Verdict::Diverged: return "diverged";
    default: return "inconclusive";
  }
}

/// eps_n = eps0 * ratio^n, n = 0..count-1.
struct Schedule {
  double eps0 = 1.0;
  double ratio = 0.5;
  int count = 31;

  void validate() const {
    if (!(eps0 > 0.0)) throw NonpositiveEpsilon("schedule eps0 must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("schedule ratio must lie in (0, 1)");
    if (count < 2) throw InputError("schedule needs at least two points");
  }

  std::vector<double> values() const {
    validate();
    std::vector<double> eps(static_cast<std::size_t>(count));
    double e = eps0;
    for (auto& v : eps) {
      v = e;
      e *= ratio;
    }
    return eps;
  }

  static Schedule range(int first, int last) {
    return Schedule{std::ldexp(1.0, -first), 0.5, last - first + 1};
  }
};

struct TolerancePolicy {
  double cauchy_tol = 1e-6;
  int cauchy_window = 4;
  double diverge_amp = 1e-2;
  int diverge_window = 8;
  double bracket_drift = 2.0;
  double taylor_zero = 1e-12;
};

struct SampleTrace {
  std::string label;
  std::vector<double> values;  // NaN marks an evaluation failure
  Verdict verdict = Verdict::Inconclusive;
  double limit = std::numeric_limits<double>::quiet_NaN();
  double tail_delta = std::numeric_limits<double>::infinity();  // max scaled Cauchy step in window
  double amplitude = 0.0;                                          // peak-to-peak in divergence window
  double rate = std::numeric_limits<double>::quiet_NaN();          // observed order in eps
  std::string failure;
};

/// Fills verdict, limit, tail_delta, amplitude, rate of a trace from its values.
inline void classify(SampleTrace& t, const TolerancePolicy& tol = {}, double ratio = 0.5) {
  const auto& v = t.values;
  const int n = static_cast<int>(v.size());
  for (double x : v)
    if (!std::isfinite(x)) {
      t.verdict = Verdict::Inconclusive;
      if (t.failure.empty()) t.failure = "evaluation failure";
      return;
    }
  if (n < 2) {
    t.verdict = Verdict::Inconclusive;
    return;
  }
  t.limit = v.back();

  const int cw = std::min(tol.cauchy_window, n - 1);
  t.tail_delta = 0.0;
  for (int i = n - 1 - cw; i < n - 1; ++i)
    t.tail_delta = std::max(t.tail_delta, std::fabs(v[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i + 1)]) /
                                              std::max(1.0, std::fabs(v[static_cast<std::size_t>(i)])));

  const int dw = std::min(tol.diverge_window, n);
  const auto first = v.end() - dw;
  const auto [lo, hi] = std::minmax_element(first, v.end());
  t.amplitude = *hi - *lo;

  std::vector<double> diffs;
  for (int i = n - dw; i < n - 1; ++i)
    diffs.push_back(v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i)]);

  // observed order from the last two differences that stand above roundoff
  const double noise = 1e-12 * std::max(1.0, std::fabs(t.limit));
  for (int i = n - 2; i >= 1; --i) {
    const double a = std::fabs(v[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(i - 1)]);
    const double b = std::fabs(v[static_cast<std::size_t>(i + 1)] - v[static_cast<std::size_t>(i)]);
    if (a > noise && b > noise) {
      t.rate = std::log(a / b) / std::log(1.0 / ratio);
      break;
    }
  }

  if (t.tail_delta < tol.cauchy_tol) {
    t.verdict = Verdict::Converged;
    return;
  }
  if (t.amplitude > tol.diverge_amp) {
    bool up = true, down = true;
    for (double d : diffs) {
      if (d < 0.0) up = false;
      if (d > 0.0) down = false;
    }
    const bool monotone = up || down;
    const bool shrinking = std::fabs(diffs.back()) < std::fabs(diffs.front());
    if (!monotone || !shrinking) {
      t.verdict = Verdict::Diverged;
      return;
    }
  }
  t.verdict = Verdict::Inconclusive;
}

struct ConvergenceReport {
  std::vector<double> eps;
  std::vector<SampleTrace> traces;
  Verdict verdict = Verdict::Inconclusive;
  int worst_sample = -1;
  double max_tail_delta = 0.0;
  double max_amplitude = 0.0;
  double rate = std::numeric_limits<double>::quiet_NaN();  // slowest observed order among samples

  int count(Verdict v) const {
    return static_cast<int>(std::count_if(traces.begin(), traces.end(), [v](const SampleTrace& t) { return t.verdict == v; }));
  }
};

/// Uniformity: one Diverged sample makes the family Diverged; Converged needs all.
inline ConvergenceReport aggregate(std::vector<double> eps, std::vector<SampleTrace> traces) {
  ConvergenceReport r;
  r.eps = std::move(eps);
  r.traces = std::move(traces);
  if (r.traces.empty()) return r;
  bool all_converged = true, any_diverged = false;
  double worst_amp = -1.0, worst_delta = -1.0;
  int worst_div = -1, worst_other = -1;
  for (std::size_t i = 0; i < r.traces.size(); ++i) {
    const auto& t = r.traces[i];
    all_converged = all_converged && t.verdict == Verdict::Converged;
    if (t.verdict == Verdict::Diverged) {
      any_diverged = true;
      if (t.amplitude > worst_amp) worst_amp = t.amplitude, worst_div = static_cast<int>(i);
    }
    const double d = std::isfinite(t.tail_delta) ? t.tail_delta : std::numeric_limits<double>::max();
    if (d > worst_delta) worst_delta = d, worst_other = static_cast<int>(i);
    r.max_tail_delta = std::max(r.max_tail_delta, t.tail_delta);
    r.max_amplitude = std::max(r.max_amplitude, t.amplitude);
    if (std::isfinite(t.rate) && !(r.rate <= t.rate)) r.rate = t.rate;
  }
  r.verdict = any_diverged ? Verdict::Diverged : all_converged ? Verdict::Converged : Verdict::Inconclusive;
  r.worst_sample = any_diverged ? worst_div : worst_other;
  return r;
}

}  // namespace carnot
