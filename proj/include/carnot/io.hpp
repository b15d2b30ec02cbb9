#pragma once

// JSON forms of frames, maps, metrics, controls and point pairs.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "carnot/charts.hpp"
#include "carnot/error.hpp"
#include "carnot/expr.hpp"
#include "carnot/frames.hpp"
#include "carnot/geometry.hpp"
#include "carnot/quasimetric.hpp"
#include "carnot/sampling.hpp"
#include "carnot/transition.hpp"

namespace carnot {

using json = nlohmann::ordered_json;

struct FrameSpec {
  std::vector<double> weights;
  std::vector<std::vector<std::string>> fields;  // fields[i][j]: coefficient of d_j in X_i
  std::vector<double> base_point;
  double radius = 1.0;
  std::string provenance;

  int dim() const { return static_cast<int>(weights.size()); }
};

struct MapSpec {
  std::vector<double> weights;
  std::vector<std::string> components;
  std::vector<std::string> inverse;  // empty when absent

  int dim() const { return static_cast<int>(weights.size()); }
};

/// kind: "explicit" (expr in x1..x2N), "box_quasimetric" (frame), "pulled_back" (map + inner expr).
struct MetricSpec {
  std::vector<double> weights;
  std::string kind = "explicit";
  std::string expr;
  std::optional<FrameSpec> frame;
  std::vector<std::string> map;
  std::vector<PointPair> pairs;

  int dim() const { return static_cast<int>(weights.size()); }
};

namespace detail {
inline Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = v[i];
  return x;
}

inline std::vector<double> from_vec(const Vec& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

inline void check_dim(const json& j, std::size_t n) {
  if (j.contains("dim") && j.at("dim").get<std::size_t>() != n) throw InputError("\"dim\" does not match \"weights\"");
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InputError&) {
    throw;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  } catch (const Error& e) {
    throw InputError(e.what());
  }
}
}  // namespace detail

inline json to_json(const FrameSpec& f) {
  json j;
  j["dim"] = f.dim();
  j["weights"] = f.weights;
  j["fields"] = f.fields;
  j["base_point"] = f.base_point.empty() ? std::vector<double>(f.weights.size(), 0.0) : f.base_point;
  j["radius"] = f.radius;
  if (!f.provenance.empty()) j["provenance"] = f.provenance;
  return j;
}

inline FrameSpec frame_spec_from_json(const json& j) {
  return detail::guarded([&] {
    FrameSpec f;
    f.weights = j.at("weights").get<std::vector<double>>();
    detail::check_dim(j, f.weights.size());
    f.fields = j.at("fields").get<std::vector<std::vector<std::string>>>();
    if (f.fields.size() != f.weights.size()) throw InputError("frame needs one field per weight");
    for (const auto& row : f.fields)
      if (row.size() != f.weights.size()) throw InputError("each field needs one coefficient per coordinate");
    if (j.contains("base_point")) f.base_point = j.at("base_point").get<std::vector<double>>();
    if (j.contains("radius")) f.radius = j.at("radius").get<double>();
    if (j.contains("provenance")) f.provenance = j.at("provenance").get<std::string>();
    return f;
  });
}

inline WeightedFrame build_frame(const FrameSpec& f) {
  return detail::guarded([&] {
    std::vector<VectorField> fields;
    for (const auto& row : f.fields) fields.push_back(VectorField::parse(row));
    return WeightedFrame(std::move(fields), Weights(f.weights), detail::to_vec(f.base_point), f.radius);
  });
}

inline FrameSpec frame_spec_of(const WeightedFrame& F, std::string provenance = "") {
  FrameSpec f;
  f.weights = F.weights().values();
  for (const auto& X : F.fields()) f.fields.push_back(X.to_strings());
  f.base_point = detail::from_vec(F.base_point());
  f.radius = F.radius();
  f.provenance = std::move(provenance);
  return f;
}

inline json to_json(const MapSpec& m) {
  json j;
  j["dim"] = m.dim();
  j["weights"] = m.weights;
  j["components"] = m.components;
  if (!m.inverse.empty()) j["inverse"] = m.inverse;
  return j;
}

inline MapSpec map_spec_from_json(const json& j) {
  return detail::guarded([&] {
    MapSpec m;
    m.weights = j.at("weights").get<std::vector<double>>();
    detail::check_dim(j, m.weights.size());
    m.components = j.at("components").get<std::vector<std::string>>();
    if (m.components.size() != m.weights.size()) throw InputError("map needs one component per weight");
    if (j.contains("inverse")) {
      m.inverse = j.at("inverse").get<std::vector<std::string>>();
      if (m.inverse.size() != m.weights.size()) throw InputError("inverse needs one component per weight");
    }
    return m;
  });
}

inline TransitionMap build_map(const MapSpec& m) {
  return detail::guarded([&] {
    (void)Weights(m.weights);
    const int n = m.dim();
    std::vector<Expr> c, inv;
    for (const auto& s : m.components) c.push_back(parse(s, n));
    for (const auto& s : m.inverse) inv.push_back(parse(s, n));
    return TransitionMap::symbolic(std::move(c), inv.empty() ? std::nullopt : std::optional<std::vector<Expr>>(std::move(inv)));
  });
}

inline json to_json(const std::vector<PointPair>& pairs) {
  json a = json::array();
  for (const auto& p : pairs) a.push_back({{"x", detail::from_vec(p.first)}, {"y", detail::from_vec(p.second)}});
  return a;
}

inline std::vector<PointPair> pairs_from_json(const json& j, int n) {
  return detail::guarded([&] {
    std::vector<PointPair> pairs;
    const json& a = j.is_object() ? j.at("pairs") : j;
    for (const auto& p : a) {
      const auto x = p.at("x").get<std::vector<double>>(), y = p.at("y").get<std::vector<double>>();
      if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n) throw InputError("pair has the wrong dimension");
      pairs.emplace_back(detail::to_vec(x), detail::to_vec(y));
    }
    return pairs;
  });
}

inline json to_json(const MetricSpec& m) {
  json j;
  j["dim"] = m.dim();
  j["weights"] = m.weights;
  j["kind"] = m.kind;
  if (!m.expr.empty()) j["expr"] = m.expr;
  if (m.frame) j["frame"] = to_json(*m.frame);
  if (!m.map.empty()) j["map"] = m.map;
  if (!m.pairs.empty()) j["pairs"] = to_json(m.pairs);
  return j;
}

inline MetricSpec metric_spec_from_json(const json& j) {
  return detail::guarded([&] {
    MetricSpec m;
    m.weights = j.at("weights").get<std::vector<double>>();
    detail::check_dim(j, m.weights.size());
    m.kind = j.value("kind", std::string("explicit"));
    if (j.contains("expr")) m.expr = j.at("expr").get<std::string>();
    if (j.contains("frame")) m.frame = frame_spec_from_json(j.at("frame"));
    if (j.contains("map")) m.map = j.at("map").get<std::vector<std::string>>();
    if (j.contains("pairs")) m.pairs = pairs_from_json(j.at("pairs"), m.dim());
    if (m.kind == "explicit" && m.expr.empty()) throw InputError("explicit metric needs \"expr\"");
    if (m.kind == "box_quasimetric" && !m.frame) throw InputError("box_quasimetric needs \"frame\"");
    if (m.kind == "pulled_back" && m.map.size() != m.weights.size()) throw InputError("pulled_back needs one map component per weight");
    if (m.kind != "explicit" && m.kind != "box_quasimetric" && m.kind != "pulled_back")
      throw InputError("unknown metric kind '" + m.kind + "'");
    return m;
  });
}

inline DistanceFn build_metric(const MetricSpec& m) {
  return detail::guarded([&]() -> DistanceFn {
    const int n = m.dim();
    const Weights w(m.weights);
    if (m.kind == "box_quasimetric") {
      const auto F = build_frame(*m.frame);
      if (F.dim() != n) throw InputError("frame dimension does not match the metric");
      return box_quasimetric(F);
    }
    const DistanceFn inner = m.expr.empty() ? euclidean_metric() : explicit_metric(parse(m.expr, 2 * n), n);
    if (m.kind == "explicit") return inner;
    std::vector<Expr> comps;
    for (const auto& s : m.map) comps.push_back(parse(s, n));
    const auto phi = TransitionMap::symbolic(comps);
    return pulled_back([phi](const Vec& x) { return phi(x); }, inner, "map");
  });
}

inline json to_json(const std::vector<ControlSegment>& controls) {
  json a = json::array();
  for (const auto& c : controls) a.push_back({{"t0", c.t0}, {"t1", c.t1}, {"b", detail::from_vec(c.b)}});
  return a;
}

inline std::vector<ControlSegment> controls_from_json(const json& j, int n) {
  return detail::guarded([&] {
    std::vector<ControlSegment> out;
    const json& a = j.is_object() ? j.at("controls") : j;
    for (const auto& s : a)
      out.push_back({s.at("t0").get<double>(), s.at("t1").get<double>(), detail::to_vec(s.at("b").get<std::vector<double>>())});
    validate_controls(out, n);
    return out;
  });
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace carnot
