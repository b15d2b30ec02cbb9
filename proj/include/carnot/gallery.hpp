#pragma once

// Built-in frames, maps and metrics with the verdicts they are known to produce.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "carnot/charts.hpp"
#include "carnot/io.hpp"
#include "carnot/nilpotent.hpp"
#include "carnot/quadrature.hpp"
#include "carnot/quasimetric.hpp"
#include "carnot/transition.hpp"

namespace carnot {

struct Truth {
  std::string name;
  std::string expected;
  std::string observed;
  bool passed = false;
};

struct GalleryReport {
  std::string entry;
  std::string summary;
  std::vector<Truth> truths;
  std::vector<std::string> notes;
  double seconds = 0.0;

  bool passed() const {
    return std::all_of(truths.begin(), truths.end(), [](const Truth& t) { return t.passed; });
  }
};

struct GalleryEntry {
  std::string name;
  std::string summary;
  std::optional<FrameSpec> frame;
  std::optional<MapSpec> map;
  std::optional<MetricSpec> metric;
  std::function<void(const GalleryEntry&, GalleryReport&)> run;
};

namespace detail {
inline std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

inline void add(GalleryReport& r, std::string name, std::string expected, std::string observed, bool passed) {
  r.truths.push_back({std::move(name), std::move(expected), std::move(observed), passed});
}

/// Runs one truth; an exception counts as a failed truth rather than aborting the entry.
inline void guard(GalleryReport& r, const std::string& name, const std::string& expected,
                  const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    add(r, name, expected, std::string("error: ") + e.what(), false);
  }
}

inline std::vector<Vec> vecs(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<Vec> out;
  for (const auto& row : rows) out.push_back(to_vec(std::vector<double>(row)));
  return out;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Shared experiments

/// Heisenberg group law: u = x^{-1} y, d_inf = max(|u1|, |u2|, |u3|^{1/2}).
inline double heisenberg_dinf_closed_form(const Vec& x, const Vec& y) {
  const double u1 = y[0] - x[0], u2 = y[1] - x[1];
  const double u3 = y[2] - x[2] - (x[0] * y[1] - x[1] * y[0]) / 2;
  return std::max({std::fabs(u1), std::fabs(u2), std::sqrt(std::fabs(u3))});
}

struct ChartIsometryResult {
  ConeResult first;   // cone of d_inf in first-kind coordinates, on the L-images
  ConeResult second;  // cone of d_inf in grouped coordinates, on the pairs
  IsometryReport isometry;
};

/// Tangent cone in grouped coordinates against the first-kind cone transported by L.
inline ChartIsometryResult chart_isometry_experiment(const WeightedFrame& F, const Partition& groups,
                                                     const std::function<Vec(const Vec&)>& L,
                                                     const std::vector<PointPair>& pairs, const Schedule& schedule = {}) {
  const auto& w = F.weights();
  const DistanceFn d1{[&F](const Vec& u, const Vec& v) { return d_inf(F, theta1(F, u), theta1(F, v)); },
                      Provenance::PulledBack, "d_inf in first-kind coordinates"};
  const DistanceFn d2{[&F, groups](const Vec& u, const Vec& v) {
                        return d_inf(F, phi_grouped(F, groups, u), phi_grouped(F, groups, v));
                      },
                      Provenance::PulledBack, "d_inf in grouped coordinates"};
  std::vector<PointPair> images;
  for (const auto& p : pairs) images.emplace_back(L(p.first), L(p.second));
  ChartIsometryResult r;
  r.first = cone_limit(d1, w, images, schedule);
  r.second = cone_limit(d2, w, pairs, schedule);
  r.isometry = isometry_check(r.first.table, r.second.table, L, pairs);
  return r;
}

inline Vec heisenberg_L(const Vec& u) {
  Vec v = u;
  v[2] = u[2] + u[0] * u[1] / 2;
  return v;
}

inline Vec engel_L(const Vec& u) {
  Vec v = u;
  v[2] = u[2] + u[0] * u[1] / 2;
  v[3] = u[3] + u[0] * u[2] / 2 + u[0] * u[0] * u[1] / 12;
  return v;
}

inline std::vector<ControlSegment> default_controls() {
  return {{0.0, 0.25, detail::to_vec({1, 0.5, 0.3})},
          {0.25, 0.5, detail::to_vec({-0.3, 1, 0})},
          {0.5, 0.75, detail::to_vec({-1, -0.2, -0.5})},
          {0.75, 1.0, detail::to_vec({0.4, -1, 0.2})}};
}

/// (x1, x2 + f(x1)) with f(x) = int_0^x t sin(1/t) dt.
inline TransitionMap sin1_c11_map() {
  return TransitionMap::opaque(
      2, [](const Vec& x) { return detail::to_vec({x[0], x[1] + integral_t_sin_inv(x[0])}); }, {},
      "(x1, x2 + int_0^x1 t sin(1/t) dt)");
}

// ---------------------------------------------------------------------------
// Entries

namespace detail {
inline FrameSpec heisenberg_spec() { return {{1, 1, 2}, {{"1", "0", "-x2/2"}, {"0", "1", "x1/2"}, {"0", "0", "1"}}, {0, 0, 0}, 1.0, ""}; }

inline FrameSpec engel_spec() {
  return {{1, 1, 2, 3},
          {{"1", "0", "0", "0"}, {"0", "1", "x1", "x1^2/2"}, {"0", "0", "1", "x1"}, {"0", "0", "0", "1"}},
          {0, 0, 0, 0},
          1.0,
          ""};
}

inline FrameSpec perturbed_heisenberg_spec() {
  return {{1, 1, 2}, {{"1", "0", "x1^2 - x2/2"}, {"0", "1", "x1/2 + x1*x2"}, {"0", "0", "1 + x1"}}, {0, 0, 0}, 1.0, ""};
}

inline FrameSpec swapped_spec() { return {{1, 1, 2}, {{"1", "0", "x1/2"}, {"0", "1", "-x2/2"}, {"0", "0", "1"}}, {0, 0, 0}, 1.0, ""}; }

inline const char* kSin1Metric = "sqrt((x1 - x3)^2 + abs(x2 - x4))";

inline void isometry_truth(GalleryReport& r, const WeightedFrame& F, const std::function<Vec(const Vec&)>& L) {
  guard(r, "second-kind cone isometric to first-kind cone", "discrepancy < 1e-4", [&] {
    const auto res = chart_isometry_experiment(F, singletons(F.dim()), L, pair_grid(F.weights(), 0.5, 50));
    const bool ok = res.first.report.verdict == Verdict::Converged && res.second.report.verdict == Verdict::Converged &&
                    res.isometry.max_discrepancy < 1e-4;
    add(r, "second-kind cone isometric to first-kind cone", "discrepancy < 1e-4",
        std::string("cones ") + to_string(res.first.report.verdict) + "/" + to_string(res.second.report.verdict) +
            ", discrepancy " + num(res.isometry.max_discrepancy),
        ok);
  });
}

inline void run_heisenberg(const GalleryEntry& e, GalleryReport& r) {
  const auto F = build_frame(*e.frame);
  guard(r, "exp identity", "max error < 1e-8", [&] {
    const auto x = exp_identity_check(F);
    add(r, "exp identity", "max error < 1e-8", num(x.max_error), x.holds);
  });
  guard(r, "self-nilpotency", "F_hat = F", [&] {
    const auto Fh = nilpotentize_symbolic(F);
    double worst = 0.0;
    for (const auto& x : box_grid(F.weights(), 0.5, 50))
      for (int k = 0; k < F.dim(); ++k) worst = std::max(worst, (Fh.field(k)(x) - F.field(k)(x)).lpNorm<Eigen::Infinity>());
    add(r, "self-nilpotency", "F_hat = F", "max difference " + num(worst), worst < 1e-14);
  });
  guard(r, "c123 = 1", "1", [&] {
    const double c = structure_constants_at(F, F.base_point())(0, 1, 2);
    add(r, "c123 = 1", "1", num(c), std::fabs(c - 1.0) < 1e-12);
  });
  guard(r, "d_inf group-law oracle", "error < 1e-6 on 100 pairs", [&] {
    BoxSampler s(F.weights(), 0.5);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Vec x = s(), y = s();
      worst = std::max(worst, std::fabs(d_inf(F, x, y) - heisenberg_dinf_closed_form(x, y)));
    }
    add(r, "d_inf group-law oracle", "error < 1e-6 on 100 pairs", num(worst), worst < 1e-6);
  });
  isometry_truth(r, F, heisenberg_L);
}

inline void run_engel(const GalleryEntry& e, GalleryReport& r) {
  const auto F = build_frame(*e.frame);
  guard(r, "commutator table", "[X1,X2] = X3, [X1,X3] = X4, others 0", [&] {
    double worst = 0.0;
    for (const auto& x : box_grid(F.weights(), 0.5, 50))
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
          Vec want = Vec::Zero(4);
          if (i == 0 && j == 1) want = F.field(2)(x);
          if (i == 0 && j == 2) want = F.field(3)(x);
          worst = std::max(worst, (commutator(F.field(i), F.field(j))(x) - want).lpNorm<Eigen::Infinity>());
        }
    add(r, "commutator table", "[X1,X2] = X3, [X1,X3] = X4, others 0", "max residual " + num(worst), worst < 1e-12);
  });
  guard(r, "graded structure", "passes", [&] {
    const auto g = check_graded_structure(nilpotentize_symbolic(F), F);
    add(r, "graded structure", "passes",
        "variance " + num(g.max_variance) + ", off-slot " + num(g.max_off_slot) + ", mismatch " + num(g.max_mismatch), g.passed);
  });
  guard(r, "first-kind closed form", "error < 1e-10", [&] {
    BoxSampler s(F.weights(), 0.5);
    double worst = 0.0;
    for (int i = 0; i < 30; ++i) {
      const Vec u = s();
      const Vec want = to_vec({u[0], u[1], u[2] + u[0] * u[1] / 2, u[3] + u[0] * u[2] / 2 + u[0] * u[0] * u[1] / 6});
      worst = std::max(worst, (theta1(F, u) - want).lpNorm<Eigen::Infinity>());
    }
    add(r, "first-kind closed form", "error < 1e-10", num(worst), worst < 1e-10);
  });
  isometry_truth(r, F, engel_L);
}

inline void cone_diverges_truth(GalleryReport& r, const DistanceFn& rho) {
  const std::string name = "cone diverged on (1,0)-(2,0)", want = "diverged, amplitude >= 0.1";
  guard(r, name, want, [&] {
    const auto c = cone_limit(rho, Weights{1, 2}, {{to_vec({1, 0}), to_vec({2, 0})}});
    const auto& t = c.report.traces[0];
    add(r, name, want, std::string(to_string(c.report.verdict)) + ", amplitude " + num(t.amplitude),
        c.report.verdict == Verdict::Diverged && t.amplitude >= 0.1);
  });
}

inline void run_sin1_beta(const GalleryEntry& e, GalleryReport& r) {
  const Weights w(e.map->weights);
  const auto phi = build_map(*e.map);
  guard(r, "C1 holds", "holds, constants in [0.9/sqrt2, 1.1 sqrt2]", [&] {
    const auto b = check_box_sandwich(phi, w);
    const bool ok = b.verdict.status == Status::Pass && b.C1 >= 0.9 / std::sqrt(2.0) && b.C2 <= 1.1 * std::sqrt(2.0);
    add(r, "C1 holds", "holds, constants in [0.9/sqrt2, 1.1 sqrt2]",
        b.verdict.label() + ", C1 = " + num(b.C1) + ", C2 = " + num(b.C2), ok);
  });
  cone_diverges_truth(r, build_metric(*e.metric));
}

inline void run_sin1_c11(const GalleryEntry& e, GalleryReport& r) {
  const auto phi = sin1_c11_map();
  const auto inner = explicit_metric(parse(kSin1Metric, 4), 2);
  cone_diverges_truth(r, pulled_back([phi](const Vec& x) { return phi(x); }, inner, e.name));
  r.notes.push_back("f(x) = x^3 cos(1/x) + O(x^4), so the rescaled distances tend to the base metric");
}

inline void run_sin2(const GalleryEntry& e, GalleryReport& r) {
  const Weights w(e.map->weights);
  const auto phi = build_map(*e.map);
  const auto grid = limit_grid(w);
  guard(r, "C2 converged to identity", "converged, deviation < 1e-6", [&] {
    const auto m = map_limit(phi, w, grid);
    double dev = 0.0;
    for (std::size_t g = 0; g < m.points.size(); ++g) dev = std::max(dev, (m.limits[g] - m.points[g]).lpNorm<Eigen::Infinity>());
    add(r, "C2 converged to identity", "converged, deviation < 1e-6", m.verdict.label() + ", deviation " + num(dev),
        m.verdict.status == Status::Pass && dev < 1e-6);
  });
  guard(r, "C3 diverged", "diverged, amplitude >= 0.5", [&] {
    const auto j = jacobian_limit(phi, w, grid);
    add(r, "C3 diverged", "diverged, amplitude >= 0.5", j.verdict.label() + ", amplitude " + num(j.report.max_amplitude),
        j.verdict.status == Status::Fail && j.report.max_amplitude >= 0.5);
  });
  guard(r, "pushforward of d/dx refused", "refused", [&] {
    const auto p = pushforward_limit_check(phi, VectorField::parse({"1", "0"}), 1.0, w, limit_grid(w, 12, 0.5));
    add(r, "pushforward of d/dx refused", "refused", p.refused ? "refused: " + p.reason : "not refused", p.refused);
  });
}

inline void run_spiral(const GalleryEntry& e, GalleryReport& r) {
  const Weights w(e.map->weights);
  const auto phi = build_map(*e.map);
  guard(r, "pulled-back metric homogeneous", "relative error < 1e-10 on 50 pairs", [&] {
    const auto rho = build_metric(*e.metric);
    double worst = 0.0;
    for (const auto& p : pair_grid(w, 0.5, 50)) {
      const double base = rho(p.first, p.second);
      for (double eps : {0.5, 1e-3, 1e-6, 1e-9})
        worst = std::max(worst, std::fabs(rho(dilate(p.first, eps, w), dilate(p.second, eps, w)) / eps - base) / base);
    }
    add(r, "pulled-back metric homogeneous", "relative error < 1e-10 on 50 pairs", num(worst), worst < 1e-10);
  });
  guard(r, "C2 diverged", "diverged", [&] {
    const auto m = map_limit(phi, w, limit_grid(w));
    add(r, "C2 diverged", "diverged", m.verdict.label(), m.verdict.status == Status::Fail);
  });
  r.notes.push_back("the two metrics are claimed not isometric; prose assertion, not verified");
}

inline void run_perturbed_heisenberg(const GalleryEntry& e, GalleryReport& r) {
  const auto F = build_frame(*e.frame);
  const auto H = build_frame(heisenberg_spec());
  guard(r, "nilpotentization is Heisenberg", "F_hat = Heisenberg frame", [&] {
    const auto Fh = nilpotentize_symbolic(F);
    double worst = 0.0;
    for (const auto& x : box_grid(F.weights(), 0.5, 50))
      for (int k = 0; k < 3; ++k) worst = std::max(worst, (Fh.field(k)(x) - H.field(k)(x)).lpNorm<Eigen::Infinity>());
    add(r, "nilpotentization is Heisenberg", "F_hat = Heisenberg frame", "max difference " + num(worst), worst < 1e-14);
  });
  guard(r, "graded structure", "residuals < 1e-6, constants match c_ijk(p)", [&] {
    const auto g = check_graded_structure(nilpotentize_symbolic(F), F);
    const bool ok = g.passed && g.max_variance < 1e-6 && g.max_off_slot < 1e-6 && g.max_mismatch < 1e-6;
    add(r, "graded structure", "residuals < 1e-6, constants match c_ijk(p)",
        "c123 hat " + num(g.hat(0, 1, 2)) + ", c123(p) " + num(g.original(0, 1, 2)), ok);
  });
  guard(r, "curve divergence slope", "slope > 1.05", [&] {
    const auto c = curve_divergence_experiment(F, nilpotentize_symbolic(F), default_controls());
    add(r, "curve divergence slope", "slope > 1.05", num(c.slope), c.slope > 1.05);
  });
}

inline void run_planted(const GalleryEntry& e, GalleryReport& r) {
  const Weights w(e.map->weights);
  const auto phi = build_map(*e.map);
  const auto grid = limit_grid(w, 16, 0.5);
  guard(r, "all four conditions fail", "C1 fails, C2 diverged, C3 diverged, Taylor fail", [&] {
    const auto c1 = check_box_sandwich(phi, w);
    const auto c2 = map_limit(phi, w, grid);
    const auto c3 = jacobian_limit(phi, w, grid);
    const auto t = taylor_vanishing_test(phi, w);
    const bool ok = c1.verdict.status == Status::Fail && c2.verdict.status == Status::Fail &&
                    c3.verdict.status == Status::Fail && t.verdict.status == Status::Fail;
    add(r, "all four conditions fail", "C1 fails, C2 diverged, C3 diverged, Taylor fail",
        c1.verdict.label() + ", " + c2.verdict.label() + ", " + c3.verdict.label() + ", " + t.verdict.label(), ok);
  });
}

inline void run_swapped(const GalleryEntry& e, GalleryReport& r) {
  const auto F = build_frame(*e.frame);
  guard(r, "exp identity fails", "max error >= 1e-8", [&] {
    const auto x = exp_identity_check(nilpotentize_symbolic(F));
    add(r, "exp identity fails", "max error >= 1e-8", num(x.max_error), !x.holds);
  });
}
}  // namespace detail

inline const std::vector<GalleryEntry>& gallery() {
  static const std::vector<GalleryEntry> entries = [] {
    using namespace detail;
    std::vector<GalleryEntry> g;
    g.push_back({"heisenberg", "Heisenberg frame in first-kind coordinates", heisenberg_spec(), {}, {}, run_heisenberg});
    g.push_back({"engel", "Engel frame, weights (1,1,2,3)", engel_spec(), {}, {}, run_engel});
    {
      MapSpec m{{1, 2}, {"x1", "x2 + x1^2/2*sin(1/abs(x1)^0.75)"}, {}};
      MetricSpec d{{1, 2}, "pulled_back", kSin1Metric, {}, m.components, {}};
      g.push_back({"sin1_beta", "sqrt(dx^2 + |dy|) pulled back by (x, y + x^2/2 sin(1/|x|^{3/4}))", {}, m, d, run_sin1_beta});
    }
    {
      MetricSpec d{{1, 2}, "explicit", kSin1Metric, {}, {}, {{to_vec({1, 0}), to_vec({2, 0})}}};
      g.push_back({"sin1_c11", "sqrt(dx^2 + |dy|) pulled back by (x, y + int_0^x t sin(1/t) dt)", {}, {}, d, run_sin1_c11});
    }
    g.push_back({"sin2", "(x, y + x^3 sin(1/x)), weights (1,2)", {}, MapSpec{{1, 2}, {"x1", "x2 + x1^3*sin(1/x1)"}, {}}, {},
                 run_sin2});
    {
      const std::string c = "cos(ln(sqrt(x1^2 + x2^2)))", s = "sin(ln(sqrt(x1^2 + x2^2)))";
      MapSpec m{{1, 1}, {"x1*" + c + " - x2*" + s, "x1*" + s + " + x2*" + c}, {}};
      MetricSpec d{{1, 1}, "pulled_back", "", {}, m.components, {}};
      g.push_back({"spiral", "r e^{i theta} -> r e^{i(theta + ln r)}", {}, m, d, run_spiral});
    }
    g.push_back({"perturbed_heisenberg", "Heisenberg frame with weight-raising perturbations", perturbed_heisenberg_spec(), {},
                 {}, run_perturbed_heisenberg});
    g.push_back({"planted", "negative control: sub-weight term x1 in the third component", {},
                 MapSpec{{1, 1, 2}, {"x1", "x2", "x3 + x1 + x1*x2/2"}, {}}, {}, run_planted});
    g.push_back({"swapped", "negative control: Heisenberg coefficients swapped", swapped_spec(), {}, {}, run_swapped});
    return g;
  }();
  return entries;
}

inline std::vector<std::string> gallery_list() {
  std::vector<std::string> names;
  for (const auto& e : gallery()) names.push_back(e.name);
  return names;
}

inline const GalleryEntry& gallery_entry(const std::string& name) {
  for (const auto& e : gallery())
    if (e.name == name) return e;
  throw UnknownEntry("no gallery entry named '" + name + "'");
}

inline GalleryReport gallery_run(const std::string& name) {
  const auto& e = gallery_entry(name);
  GalleryReport r;
  r.entry = e.name;
  r.summary = e.summary;
  const auto start = std::chrono::steady_clock::now();
  e.run(e, r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Every entry, run in parallel; reports keep list order.
inline std::vector<GalleryReport> gallery_run_all() {
  const auto names = gallery_list();
  std::vector<GalleryReport> out(names.size());
  parallel_for(names.size(), [&](std::size_t i) { out[i] = gallery_run(names[i]); });
  return out;
}

inline json gallery_export(const std::string& name) {
  const auto& e = gallery_entry(name);
  json j;
  j["name"] = e.name;
  j["summary"] = e.summary;
  if (e.frame) j["frame"] = to_json(*e.frame);
  if (e.map) j["map"] = to_json(*e.map);
  if (e.metric) j["metric"] = to_json(*e.metric);
  return j;
}

/// Timing is left out so that reports are reproducible byte for byte.
inline json to_json(const GalleryReport& r) {
  json j;
  j["entry"] = r.entry;
  j["summary"] = r.summary;
  j["passed"] = r.passed();
  json t = json::array();
  for (const auto& x : r.truths)
    t.push_back({{"truth", x.name}, {"expected", x.expected}, {"observed", x.observed}, {"passed", x.passed}});
  j["truths"] = t;
  j["notes"] = r.notes;
  return j;
}

}  // namespace carnot
