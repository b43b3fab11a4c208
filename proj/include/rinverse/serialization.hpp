#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rinverse/pipeline.hpp"

namespace rinverse {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// expressions and complex numbers

inline Json complex_to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const Json& j) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && (j.size() == 1 || j.size() == 2))
    return Complex(j[0].get<double>(), j.size() == 2 ? j[1].get<double>() : 0.0);
  throw ConfigError("expected a number or [re, im] pair");
}

inline Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  Vec v;
  for (const Json& e : j) v.push_back(e.get<double>());
  return v;
}

// ---------------------------------------------------------------------------
// descriptors: {dimension, direction, base_samples, phi, psi, surface}

inline Json bound_to_json(const BoundSpec& b) {
  if (b.tabulated()) return Json{{"table", b.table()}};
  return Json(b.expression().to_string());
}

inline BoundSpec bound_from_json(const Json& j) {
  if (j.is_string()) return BoundSpec(Expression::parse(j.get<std::string>()));
  if (j.is_object() && j.contains("table"))
    return BoundSpec(j.at("table").get<std::vector<double>>());
  throw ConfigError("bound must be an s-expression string or {\"table\": [...]}");
}

inline Json descriptor_to_json(const NormalSetDescriptor& d) {
  Json samples = Json::array();
  for (const Vec& p : d.base_samples) samples.push_back(p);
  return Json{{"dimension", d.dimension},     {"direction", d.direction},
              {"base_samples", samples},      {"phi", bound_to_json(d.phi)},
              {"psi", bound_to_json(d.psi)},  {"surface", d.surface.to_string()}};
}

inline NormalSetDescriptor descriptor_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("descriptor must be an object");
  const int dimension = j.at("dimension").get<int>();
  Vec direction = vec_from_json(j.at("direction"));
  if (static_cast<int>(direction.size()) != dimension)
    throw ConfigError("descriptor: direction length differs from dimension");
  std::vector<Vec> samples;
  for (const Json& p : j.at("base_samples")) samples.push_back(vec_from_json(p));
  return make_descriptor(std::move(direction), std::move(samples),
                         bound_from_json(j.at("phi")), bound_from_json(j.at("psi")),
                         Expression::parse(j.at("surface").get<std::string>()));
}

// ---------------------------------------------------------------------------
// smooth maps: {"orthogonal": rows} | {"shift": {axis, gamma}} | {"chain": [...]}

inline Json smooth_map_to_json(const SmoothMap& m) {
  switch (m.kind()) {
    case SmoothMap::Kind::Identity:
      return Json{{"identity", m.dimension()}};
    case SmoothMap::Kind::Orthogonal: {
      Json rows = Json::array();
      const Mat& a = m.as_orthogonal().matrix;
      for (int i = 0; i < a.n; ++i) {
        Json row = Json::array();
        for (int j = 0; j < a.n; ++j) row.push_back(a(i, j));
        rows.push_back(row);
      }
      return Json{{"orthogonal", rows}};
    }
    case SmoothMap::Kind::Shift:
      return Json{{"shift", Json{{"axis", m.as_shift().axis + 1},
                                 {"gamma", m.as_shift().gamma.to_string()}}}};
    case SmoothMap::Kind::Chain: {
      Json links = Json::array();
      for (const SmoothMap& link : m.as_chain()) links.push_back(smooth_map_to_json(link));
      return Json{{"chain", links}};
    }
  }
  throw ConfigError("unknown smooth map kind");
}

inline SmoothMap smooth_map_from_json(const Json& j, int dimension) {
  if (!j.is_object()) throw ConfigError("smooth map must be an object");
  if (j.contains("identity")) return SmoothMap::identity(dimension);
  if (j.contains("orthogonal")) {
    const Json& rows = j.at("orthogonal");
    Mat a(dimension);
    if (static_cast<int>(rows.size()) != dimension)
      throw ConfigError("orthogonal map: row count differs from dimension");
    for (int i = 0; i < dimension; ++i)
      for (int k = 0; k < dimension; ++k) a(i, k) = rows[i][k].get<double>();
    OrthogonalMap om{a};
    if (om.defect() > 1e-10) throw ConfigError("orthogonal map: matrix is not orthogonal");
    return SmoothMap::orthogonal(om);
  }
  if (j.contains("shift")) {
    const Json& s = j.at("shift");
    return SmoothMap::shift(make_shift_map(
        dimension, s.at("axis").get<int>() - 1,
        Expression::parse(s.at("gamma").get<std::string>())));
  }
  if (j.contains("chain")) {
    std::vector<SmoothMap> links;
    for (const Json& link : j.at("chain")) links.push_back(smooth_map_from_json(link, dimension));
    return SmoothMap::chain(std::move(links));
  }
  throw ConfigError("smooth map: expected identity, orthogonal, shift, or chain");
}

// ---------------------------------------------------------------------------
// operators: {direction, lambda} | {"factors": [{direction, poly}]}

inline Json operator_to_json(const OperatorProduct& op) {
  Json factors = Json::array();
  for (const PolyFactor& f : op.factors) {
    Json poly = Json::array();
    for (const Complex& c : f.poly) poly.push_back(complex_to_json(c));
    factors.push_back(Json{{"direction", f.direction}, {"poly", poly}});
  }
  return Json{{"factors", factors}};
}

inline OperatorProduct operator_from_json(const Json& j) {
  OperatorProduct op;
  if (j.contains("factors")) {
    for (const Json& f : j.at("factors")) {
      PolyFactor factor;
      factor.direction = vec_from_json(f.at("direction"));
      for (const Json& c : f.at("poly")) factor.poly.push_back(complex_from_json(c));
      validate_factor(factor);
      op.factors.push_back(std::move(factor));
    }
    if (op.factors.empty()) throw ConfigError("operator: empty factor list");
    return op;
  }
  if (j.contains("direction")) {
    // Single first-order operator D_v - lambda as the factor (t - lambda).
    PolyFactor factor;
    factor.direction = vec_from_json(j.at("direction"));
    const Complex lambda =
        j.contains("lambda") ? complex_from_json(j.at("lambda")) : Complex(0.0, 0.0);
    factor.poly = {-lambda, Complex(1.0, 0.0)};
    validate_factor(factor);
    op.factors.push_back(std::move(factor));
    return op;
  }
  throw ConfigError("operator: expected {direction, lambda} or {factors: [...]}");
}

// ---------------------------------------------------------------------------
// jet fields: rows {point, multi_index, re, im} in graded-lex order

inline Json jet_field_to_json(const WhitneyJetField& field) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < field.jets.size(); ++i) {
    const Jet& jet = field.jets[i];
    for (std::size_t pos = 0; pos < jet.size(); ++pos) {
      rows.push_back(Json{{"point", field.cloud.points[i]},
                          {"multi_index", jet.layout().index(pos).entries()},
                          {"re", jet[pos].real()},
                          {"im", jet[pos].imag()}});
    }
  }
  return Json{{"order", field.order}, {"rows", rows}};
}

inline std::string jet_field_to_csv(const WhitneyJetField& field) {
  std::string out;
  const int dim = field.cloud.points.empty() ? 0 : static_cast<int>(field.cloud.points[0].size());
  for (int i = 0; i < dim; ++i) out += "x" + std::to_string(i + 1) + ",";
  for (int i = 0; i < dim; ++i) out += "alpha" + std::to_string(i + 1) + ",";
  out += "re,im\n";
  for (std::size_t i = 0; i < field.jets.size(); ++i) {
    const Jet& jet = field.jets[i];
    for (std::size_t pos = 0; pos < jet.size(); ++pos) {
      for (double c : field.cloud.points[i]) out += detail::format_double(c) + ",";
      for (int e : jet.layout().index(pos).entries()) out += std::to_string(e) + ",";
      out += detail::format_double(jet[pos].real()) + "," +
             detail::format_double(jet[pos].imag()) + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// provenance

inline Json provenance_to_json(const std::vector<StageProvenance>& stages) {
  Json arr = Json::array();
  for (const StageProvenance& s : stages) {
    arr.push_back(Json{{"direction", s.direction},
                       {"lambda", complex_to_json(s.lambda)},
                       {"rotation", s.rotation_skipped ? "skipped" : "orthogonal"},
                       {"shift", s.shift_skipped ? "skipped" : "flattening"},
                       {"integration_axis", s.integration_axis},
                       {"quad_tolerance", s.quad_tolerance},
                       {"post_scale", complex_to_json(s.post_scale)}});
  }
  return arr;
}

}  // namespace rinverse
