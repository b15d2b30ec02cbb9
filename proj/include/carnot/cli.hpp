#pragma once

// carnot_lab: dinf, cone, nilpotentize, check-transition, curve-divergence, gallery.
// Exit codes: 0 success, 1 verdict mismatch, 2 input error.

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carnot/gallery.hpp"
#include "carnot/io.hpp"
#include "carnot/nilpotent.hpp"
#include "carnot/quasimetric.hpp"
#include "carnot/transition.hpp"

namespace carnot::cli {

struct RunConfig {
  Schedule schedule;
  bool schedule_given = false;
  int grid = 0;  // 0: subcommand default
  double tol = 1e-6;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::vector<std::string> expect;

  TolerancePolicy policy() const {
    TolerancePolicy p;
    p.cauchy_tol = tol;
    return p;
  }
  int grid_or(int fallback) const { return grid > 0 ? grid : fallback; }
};

/// Observed labels keyed like --expect, e.g. {"C2": "converged"}.
using Observed = std::map<std::string, std::string>;

struct Outcome {
  json report;
  Observed observed;
  std::map<std::string, std::string> csv;  // file name -> contents
  bool failed = false;                     // gallery truths and other built-in checks
};

namespace detail {
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

inline json report_json(const ConvergenceReport& r) {
  json j;
  j["verdict"] = to_string(r.verdict);
  j["samples"] = r.traces.size();
  j["converged"] = r.count(Verdict::Converged);
  j["diverged"] = r.count(Verdict::Diverged);
  j["inconclusive"] = r.count(Verdict::Inconclusive);
  j["max_tail_delta"] = number(r.max_tail_delta);
  j["max_amplitude"] = number(r.max_amplitude);
  j["rate"] = number(r.rate);
  if (r.worst_sample >= 0) {
    const auto& t = r.traces[static_cast<std::size_t>(r.worst_sample)];
    j["worst_sample"] = {{"label", t.label}, {"verdict", to_string(t.verdict)}, {"amplitude", number(t.amplitude)},
                         {"tail_delta", number(t.tail_delta)}};
    if (!t.failure.empty()) j["worst_sample"]["failure"] = t.failure;
  }
  return j;
}

inline std::string traces_csv(const ConvergenceReport& r) {
  std::ostringstream s;
  s.precision(17);
  s << "sample,label,eps,value,verdict\n";
  for (std::size_t i = 0; i < r.traces.size(); ++i) {
    const auto& t = r.traces[i];
    for (std::size_t n = 0; n < t.values.size(); ++n)
      s << i << ',' << t.label << ',' << r.eps[n] << ',' << t.values[n] << ',' << to_string(t.verdict) << '\n';
  }
  return s.str();
}

inline Vec parse_point(const std::string& text, int n) {
  std::vector<double> v;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not a number: '" + item + "'");
    }
  }
  if (static_cast<int>(v.size()) != n) throw InputError("point '" + text + "' needs " + std::to_string(n) + " coordinates");
  return carnot::detail::to_vec(v);
}

inline std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, sep)) out.push_back(item);
  return out;
}

inline std::string verdict_word(bool ok, const char* yes, const char* no) { return ok ? yes : no; }

/// Compares observed labels with key=value expectations (values may be comma joined).
inline bool check_expectations(const std::vector<std::string>& expect, const Observed& observed, std::ostream& err) {
  bool ok = true;
  for (const auto& group : expect)
    for (const auto& item : split(group, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InputError("--expect needs key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq), want = item.substr(eq + 1);
      const auto it = observed.find(key);
      if (it == observed.end()) throw InputError("nothing to compare with --expect key '" + key + "'");
      const auto a = parse_status(want), b = parse_status(it->second);
      const bool same = (a && b) ? *a == *b : want == it->second;
      if (!same) {
        err << "mismatch: " << key << " expected " << want << ", observed " << it->second << '\n';
        ok = false;
      }
    }
  return ok;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline Outcome cmd_dinf(const RunConfig& cfg, const std::string& frame_path, const std::string& x, const std::string& y,
                        const std::string& pairs_path) {
  const auto F = build_frame(frame_spec_from_json(read_json_file(frame_path)));
  const int n = F.dim();
  std::vector<PointPair> pairs;
  if (!x.empty() || !y.empty()) pairs.emplace_back(detail::parse_point(x, n), detail::parse_point(y, n));
  if (!pairs_path.empty()) {
    const auto more = pairs_from_json(read_json_file(pairs_path), n);
    pairs.insert(pairs.end(), more.begin(), more.end());
  }
  if (pairs.empty()) pairs = pair_grid(F.weights(), F.radius() / 2, cfg.grid_or(16));
  Outcome o;
  json rows = json::array();
  for (const auto& p : pairs)
    rows.push_back({{"x", detail::vec_json(p.first)}, {"y", detail::vec_json(p.second)}, {"d_inf", detail::number(d_inf(F, p.first, p.second))}});
  o.report["subcommand"] = "dinf";
  o.report["distances"] = rows;
  return o;
}

inline Outcome cmd_cone(const RunConfig& cfg, const std::string& metric_path) {
  const auto spec = metric_spec_from_json(read_json_file(metric_path));
  const auto d = build_metric(spec);
  const Weights w(spec.weights);
  auto pairs = spec.pairs;
  const auto grid = pair_grid(w, 0.5, cfg.grid_or(64));
  pairs.insert(pairs.end(), grid.begin(), grid.end());
  const auto r = cone_limit(d, w, pairs, cfg.schedule, cfg.policy());

  Outcome o;
  o.report["subcommand"] = "cone";
  o.report["metric"] = {{"provenance", to_string(d.provenance)}, {"description", d.description}};
  o.report["cone"] = detail::report_json(r.report);
  o.report["homogeneity"] = {{"checked", r.homogeneity.checked}, {"holds", r.homogeneity.holds},
                             {"max_relative_error", detail::number(r.homogeneity.max_relative_error)}};
  try {
    const auto q = estimate_quasimetric_constants(d, random_triples(w, 0.5, 1000, cfg.seed));
    o.report["constants"] = {{"Q", q.Q}, {"C", q.C}, {"raw_Q", q.raw_Q}, {"raw_C", q.raw_C}, {"triples", q.triples_used}};
  } catch (const Error& e) {
    o.report["constants"] = {{"error", e.what()}};
  }
  try {
    const auto b = fit_distance_bounds(d, w, 0.5, box_grid(w, 0.5, 256));
    o.report["bounds"] = {{"C1", b.C1}, {"C2", b.C2}, {"samples", b.used}};
  } catch (const Error& e) {
    o.report["bounds"] = {{"error", e.what()}};
  }
  json table = json::array();
  for (const auto& row : r.table.rows)
    table.push_back({{"x", detail::vec_json(row.x)}, {"y", detail::vec_json(row.y)}, {"value", detail::number(row.value)}});
  o.report["limit_table"] = table;
  std::ostringstream csv;
  write_cone_csv(csv, r);
  o.csv["cone.csv"] = csv.str();
  o.observed["cone"] = to_string(r.report.verdict);
  if (r.homogeneity.checked) o.observed["homogeneity"] = detail::verdict_word(r.homogeneity.holds, "holds", "fails");
  return o;
}

inline Outcome cmd_nilpotentize(const RunConfig& cfg, const std::string& frame_path) {
  auto F = build_frame(frame_spec_from_json(read_json_file(frame_path)));
  if (!F.base_point().isZero(0.0)) F = translate_to_origin(F);
  const auto table = verify_commutator_table(F, box_grid(F.weights(), F.radius() / 2, cfg.grid_or(32)));
  Outcome o;
  o.report["subcommand"] = "nilpotentize";
  o.report["commutator_table"] = {{"valid", table.valid}, {"max_violation", table.max_violation},
                                  {"tolerance", table.tolerance}, {"skipped", table.skipped}};
  o.observed["table"] = table.valid ? "valid" : "invalid";
  if (!table.valid) {
    o.report["refused"] = "commutator table violates the filtration";
    return o;
  }
  const auto numeric = nilpotentize_numeric(F, limit_grid(F.weights(), cfg.grid_or(32), F.radius() / 2), cfg.schedule, cfg.policy());
  o.report["numeric_limit"] = detail::report_json(numeric.report);
  o.report["numeric_limit"]["skipped_points"] = numeric.skipped;
  o.observed["limit"] = to_string(numeric.report.verdict);
  o.csv["field_traces.csv"] = detail::traces_csv(numeric.report);
  try {
    const auto Fh = nilpotentize_symbolic(F);
    o.report["nilpotent_frame"] = to_json(frame_spec_of(Fh, "nilpotentize_symbolic"));
    const auto g = check_graded_structure(Fh, F);
    o.report["graded_structure"] = {{"passed", g.passed}, {"max_variance", g.max_variance},
                                    {"max_off_slot", g.max_off_slot}, {"max_mismatch", g.max_mismatch}};
    o.observed["graded"] = g.passed ? "pass" : "fail";
    const auto x = exp_identity_check(Fh, 100, 0.5, 1e-8, cfg.seed);
    o.report["exp_identity"] = {{"holds", x.holds}, {"max_error", x.max_error}, {"samples", x.samples}};
    o.observed["exp_identity"] = x.holds ? "holds" : "fails";
  } catch (const NonsmoothInput& e) {
    o.report["nilpotent_frame"] = {{"error", e.what()}};
  }
  return o;
}

inline Outcome cmd_check_transition(const RunConfig& cfg, const std::string& map_path, const std::string& field,
                                    double field_weight) {
  const auto spec = map_spec_from_json(read_json_file(map_path));
  const auto phi = build_map(spec);
  const Weights w(spec.weights);
  const auto pol = cfg.policy();
  const auto grid = limit_grid(w, cfg.grid_or(32), 0.5);
  Outcome o;
  o.report["subcommand"] = "check-transition";

  const auto c1 = check_box_sandwich(phi, w, cfg.schedule, {}, pol);
  o.report["C1"] = {{"verdict", c1.verdict.label()}, {"C1", c1.C1}, {"C2", c1.C2}, {"drift", detail::number(c1.drift)},
                    {"notes", c1.verdict.notes}};
  o.observed["C1"] = c1.verdict.label();
  {
    std::ostringstream s;
    s.precision(17);
    s << "eps,c1,c2\n";
    for (std::size_t i = 0; i < c1.eps.size(); ++i) s << c1.eps[i] << ',' << c1.c1[i] << ',' << c1.c2[i] << '\n';
    o.csv["c1_bounds.csv"] = s.str();
  }

  const auto c2 = map_limit(phi, w, grid, cfg.schedule, pol);
  o.report["C2"] = detail::report_json(c2.report);
  o.report["C2"]["verdict"] = c2.verdict.label();
  o.report["C2"]["notes"] = c2.verdict.notes;
  o.report["C2"]["homogeneity"] = {{"checked", c2.homogeneity.checked}, {"holds", c2.homogeneity.holds},
                                   {"max_error", detail::number(c2.homogeneity.max_relative_error)}};
  o.observed["C2"] = c2.verdict.label();
  o.csv["c2_traces.csv"] = detail::traces_csv(c2.report);

  const auto c3 = jacobian_limit(phi, w, grid, cfg.schedule, pol, &c2);
  o.report["C3"] = detail::report_json(c3.report);
  o.report["C3"]["verdict"] = c3.verdict.label();
  o.report["C3"]["notes"] = c3.verdict.notes;
  if (c3.dl_checked) o.report["C3"]["lambda_equals_DL"] = {{"holds", c3.dl_holds}, {"max_error", c3.dl_max_error}};
  o.observed["C3"] = c3.verdict.label();
  o.csv["c3_traces.csv"] = detail::traces_csv(c3.report);

  try {
    const auto t = taylor_vanishing_test(phi, w, pol);
    json off = json::array();
    for (const auto& x : t.offenders) off.push_back({{"component", x.component + 1}, {"alpha", x.alpha.alpha}, {"value", x.value}});
    json L = json::array();
    for (const auto& e : t.L) L.push_back(to_string(e));
    o.report["Taylor"] = {{"verdict", t.verdict.label()}, {"offenders", off}, {"L", L}};
    o.observed["Taylor"] = t.verdict.label();
  } catch (const NonsmoothInput& e) {
    o.report["Taylor"] = {{"verdict", "not applicable"}, {"reason", e.what()}};
  }

  if (phi.has_inverse() && c2.report.verdict == Verdict::Converged) {
    try {
      const auto inv = inverse_map_limit(phi, w, grid, c2, cfg.schedule, pol);
      o.report["inverse_limit"] = {{"verdict", to_string(inv.report.verdict)}, {"max_error", inv.max_error}, {"matches", inv.matches}};
      o.observed["inverse"] = inv.matches ? "pass" : "fail";
    } catch (const NonInvertibleL& e) {
      o.report["inverse_limit"] = {{"error", e.what()}};
      o.observed["inverse"] = "fail";
    }
  }

  if (!field.empty()) {
    std::vector<std::string> coeffs = detail::split(field, ',');
    const auto X = carnot::detail::guarded([&] { return VectorField::parse(coeffs); });
    try {
      const auto p = pushforward_limit_check(phi, X, field_weight, w, limit_grid(w, cfg.grid_or(12), 0.5), cfg.schedule, pol);
      if (p.refused) {
        o.report["pushforward"] = {{"refused", true}, {"reason", p.reason}};
        o.observed["pushforward"] = "refused";
      } else {
        const bool ok = p.yhat.verdict == Verdict::Converged && p.max_discrepancy < 1e-6;
        o.report["pushforward"] = {{"refused", false}, {"limit", detail::report_json(p.yhat)},
                                   {"max_discrepancy", detail::number(p.max_discrepancy)}, {"det_lambda0", p.det_lambda0}};
        o.observed["pushforward"] = ok ? "pass" : "fail";
      }
    } catch (const SingularLambda& e) {
      o.report["pushforward"] = {{"refused", true}, {"reason", e.what()}};
      o.observed["pushforward"] = "refused";
    }
  }
  return o;
}

inline Outcome cmd_ensemble(const RunConfig& cfg, const std::string& weights, int members) {
  std::vector<double> wv;
  for (const auto& s : detail::split(weights, ',')) wv.push_back(detail::parse_point(s, 1)[0]);
  const Weights w = carnot::detail::guarded([&] { return Weights(wv); });
  const auto rep = equivalence_experiment(w, random_polynomial_maps(w, members, cfg.seed), limit_grid(w, cfg.grid_or(16), 0.5),
                                          cfg.schedule, cfg.policy());
  Outcome o;
  o.report["subcommand"] = "check-transition --ensemble";
  o.report["weights"] = wv;
  o.report["members"] = members;
  o.report["agreements"] = rep.agreements;
  o.report["matches_construction"] = rep.matches_construction;
  json rows = json::array();
  for (const auto& r : rep.rows) {
    json comps = json::array();
    for (const auto& c : r.member.components) comps.push_back(to_string(c));
    rows.push_back({{"components", comps},
                    {"planted", r.member.planted},
                    {"C1", condition_label(Condition::BoxSandwich, r.status[0])},
                    {"C2", condition_label(Condition::MapLimit, r.status[1])},
                    {"C3", condition_label(Condition::JacobianLimit, r.status[2])},
                    {"Taylor", condition_label(Condition::TaylorVanishing, r.status[3])},
                    {"agree", r.agree}});
  }
  o.report["rows"] = rows;
  o.observed["agreement"] = rep.agreements == members ? "pass" : "fail";
  return o;
}

inline Outcome cmd_curve_divergence(const RunConfig& cfg, const std::string& frame_path, const std::string& controls_path) {
  auto F = build_frame(frame_spec_from_json(read_json_file(frame_path)));
  if (!F.base_point().isZero(0.0)) F = translate_to_origin(F);
  std::vector<ControlSegment> controls;
  if (!controls_path.empty()) {
    controls = controls_from_json(read_json_file(controls_path), F.dim());
  } else {
    if (F.dim() != 3) throw InputError("default controls are three-dimensional; pass --controls");
    controls = default_controls();
  }
  const auto Fh = nilpotentize_symbolic(F);
  const auto r = curve_divergence_experiment(F, Fh, controls, cfg.schedule_given ? cfg.schedule : Schedule::range(2, 10));
  Outcome o;
  o.report["subcommand"] = "curve-divergence";
  o.report["eps"] = r.eps;
  json d = json::array();
  for (double v : r.distance) d.push_back(detail::number(v));
  o.report["distance"] = d;
  o.report["slope"] = detail::number(r.slope);
  std::ostringstream s;
  s.precision(17);
  s << "eps,distance\n";
  for (std::size_t i = 0; i < r.eps.size(); ++i) s << r.eps[i] << ',' << r.distance[i] << '\n';
  o.csv["curve.csv"] = s.str();
  o.observed["superlinear"] = r.slope > 1.05 ? "holds" : "fails";
  return o;
}

inline Outcome cmd_gallery(const std::string& action, const std::string& name) {
  Outcome o;
  if (action == "list") {
    o.report["entries"] = gallery_list();
    return o;
  }
  if (name.empty()) throw InputError("gallery " + action + " needs an entry name");
  if (action == "export") {
    o.report = gallery_export(name);
    return o;
  }
  if (action != "run") throw InputError("gallery action must be list, run or export");
  std::vector<GalleryReport> reports;
  if (name == "all") {
    reports = gallery_run_all();
  } else {
    reports.push_back(gallery_run(name));
  }
  json a = json::array();
  for (const auto& r : reports) {
    a.push_back(to_json(r));
    o.observed[r.entry] = r.passed() ? "pass" : "fail";
    o.failed = o.failed || !r.passed();
  }
  o.report = name == "all" ? json{{"reports", a}} : a[0];
  return o;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"carnot_lab: canonical coordinates, nilpotent approximation and transition-map conditions"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&cfg](CLI::App* sub) {
    sub->add_option("--schedule-eps0", cfg.schedule.eps0, "first eps of the schedule")->check(CLI::PositiveNumber);
    sub->add_option("--schedule-ratio", cfg.schedule.ratio, "ratio between consecutive eps")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--schedule-count", cfg.schedule.count, "number of schedule points")->check(CLI::Range(2, 1000));
    sub->add_option("--grid", cfg.grid, "number of grid points or pairs")->check(CLI::Range(1, 100000));
    sub->add_option("--tol", cfg.tol, "Cauchy tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out, "directory for JSON and CSV output");
    sub->add_option("--expect", cfg.expect, "key=value verdicts to enforce")->allow_extra_args(false);
  };

  std::string frame, metric, map, x, y, pairs, controls, field, weights = "1,1,2", action, entry;
  double field_weight = 1.0;
  int members = 50;
  bool ensemble = false;

  auto* dinf = app.add_subcommand("dinf", "box quasimetric d_inf between points");
  dinf->add_option("frame", frame, "frame JSON")->required();
  dinf->add_option("--x", x, "first point, comma separated");
  dinf->add_option("--y", y, "second point, comma separated");
  dinf->add_option("--pairs", pairs, "pairs JSON");
  common(dinf);

  auto* cone = app.add_subcommand("cone", "tangent cone of a metric");
  cone->add_option("--metric", metric, "metric JSON")->required();
  common(cone);

  auto* nil = app.add_subcommand("nilpotentize", "homogeneous approximation of a frame");
  nil->add_option("frame", frame, "frame JSON")->required();
  common(nil);

  auto* ct = app.add_subcommand("check-transition", "conditions C1, C2, C3 and the Taylor test for a map");
  ct->add_option("map", map, "map JSON");
  ct->add_flag("--ensemble", ensemble, "run the four conditions on random polynomial maps");
  ct->add_option("--weights", weights, "weights for --ensemble");
  ct->add_option("--members", members, "ensemble size")->check(CLI::Range(1, 100000));
  ct->add_option("--field", field, "vector field coefficients, comma separated, for the pushforward check");
  ct->add_option("--field-weight", field_weight, "weight r of the field");
  common(ct);

  auto* cd = app.add_subcommand("curve-divergence", "distance between controlled curves of F and F_hat");
  cd->add_option("frame", frame, "frame JSON")->required();
  cd->add_option("--controls", controls, "controls JSON");
  common(cd);

  auto* gal = app.add_subcommand("gallery", "built-in examples");
  gal->add_option("action", action, "list, run or export")->required();
  gal->add_option("name", entry, "entry name (run accepts 'all')");
  common(gal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    cfg.schedule.validate();
    for (auto* sub : {dinf, cone, nil, ct, cd, gal})
      for (const char* name : {"--schedule-eps0", "--schedule-ratio", "--schedule-count"})
        if (sub->count(name) > 0) cfg.schedule_given = true;

    Outcome o;
    std::string stem;
    if (*dinf) o = cmd_dinf(cfg, frame, x, y, pairs), stem = "dinf";
    if (*cone) o = cmd_cone(cfg, metric), stem = "cone";
    if (*nil) o = cmd_nilpotentize(cfg, frame), stem = "nilpotentize";
    if (*ct) {
      if (ensemble) {
        o = cmd_ensemble(cfg, weights, members);
      } else {
        if (map.empty()) throw InputError("check-transition needs a map JSON or --ensemble");
        o = cmd_check_transition(cfg, map, field, field_weight);
      }
      stem = "check-transition";
    }
    if (*cd) o = cmd_curve_divergence(cfg, frame, controls), stem = "curve-divergence";
    if (*gal) o = cmd_gallery(action, entry), stem = "gallery";

    if (!o.observed.empty()) o.report["observed"] = o.observed;
    const bool expectations_met = detail::check_expectations(cfg.expect, o.observed, err);
    const std::string text = o.report.dump(2) + "\n";
    out << text;
    if (!cfg.out.empty()) {
      std::filesystem::create_directories(cfg.out);
      std::ofstream(std::filesystem::path(cfg.out) / (stem + ".json")) << text;
      for (const auto& [file, body] : o.csv) std::ofstream(std::filesystem::path(cfg.out) / file) << body;
    }
    if (o.failed) err << "declared truths failed\n";
    return (expectations_met && !o.failed) ? 0 : 1;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return 2;
  } catch (const UnknownEntry& e) {
    err << "input error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "output error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace carnot::cli
