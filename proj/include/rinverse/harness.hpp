#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "rinverse/serialization.hpp"

namespace rinverse {

// ---------------------------------------------------------------------------
// parallel evaluation

/// Worker count: RINVERSE_THREADS caps hardware concurrency; at least 1.
inline unsigned worker_count() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("RINVERSE_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1 && static_cast<unsigned>(cap) < n) n = static_cast<unsigned>(cap);
  }
  return n;
}

/// Runs fn(i) for i in [0, count) on indexed slots; deterministic regardless
/// of the worker count.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// scenario

struct Scenario {
  std::string name;
  std::vector<NormalSetDescriptor> descriptors;  // active (match operator directions)
  OperatorProduct op;
  std::vector<Expression> corpus;
  int jet_order = 3;
  int per_segment = 5;
  QuadratureConfig quad;
  double tolerance = 1e-6;
  std::string corrupt;  // "", "rotation", "surface"
};

inline constexpr int kMaxJetOrder = 6;

namespace detail {

inline Vec normalized_direction(Vec v, const char* what) {
  const double n = norm(v);
  if (std::abs(n - 1.0) > 1e-9)
    throw ConfigError(std::string(what) + ": direction norm " + format_double(n) +
                      " is not 1 within 1e-9");
  for (double& c : v) c /= n;
  return v;
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  Scenario sc;
  try {
    sc.name = j.at("name").get<std::string>();

    sc.op = operator_from_json(j.at("operator"));
    for (PolyFactor& f : sc.op.factors)
      f.direction = detail::normalized_direction(f.direction, "operator");

    std::vector<NormalSetDescriptor> pool;
    if (j.contains("fixture")) {
      for (NormalSetDescriptor& d : fixture(j.at("fixture").get<std::string>()).descriptors)
        pool.push_back(std::move(d));
    }
    if (j.contains("descriptors"))
      for (const Json& dj : j.at("descriptors")) pool.push_back(descriptor_from_json(dj));
    if (j.contains("descriptor")) pool.push_back(descriptor_from_json(j.at("descriptor")));
    if (pool.empty()) throw ConfigError("scenario: no fixture or descriptors given");

    // Keep the descriptors the operator actually uses, in factor order.
    for (const PolyFactor& f : sc.op.factors) {
      bool found = false;
      for (const NormalSetDescriptor& d : pool) {
        if (norm(axpy(-1.0, f.direction, d.direction)) <= 1e-9) {
          bool already = false;
          for (const NormalSetDescriptor& have : sc.descriptors)
            if (norm(axpy(-1.0, have.direction, d.direction)) <= 1e-9) already = true;
          if (!already) sc.descriptors.push_back(d);
          found = true;
          break;
        }
      }
      if (!found)
        throw ConfigError("scenario: no descriptor matches an operator factor direction");
    }

    if (!j.contains("corpus") || j.at("corpus").empty())
      throw ConfigError("scenario: corpus must be a non-empty array");
    for (const Json& f : j.at("corpus"))
      sc.corpus.push_back(Expression::parse(f.get<std::string>()));

    sc.jet_order = j.value("jet_order", 3);
    sc.per_segment = j.value("per_segment", 5);
    sc.tolerance = j.value("tolerance", 1e-6);
    sc.corrupt = j.value("corrupt", std::string());
    if (j.contains("quadrature")) {
      const Json& q = j.at("quadrature");
      sc.quad.tolerance = q.value("tolerance", sc.quad.tolerance);
      sc.quad.nodes = q.value("nodes", sc.quad.nodes);
      sc.quad.initial_panels = q.value("initial_panels", sc.quad.initial_panels);
      sc.quad.max_depth = q.value("max_depth", sc.quad.max_depth);
    }

    if (sc.jet_order < 1 || sc.jet_order > kMaxJetOrder)
      throw ConfigError("scenario: jet_order must be in [1, " + std::to_string(kMaxJetOrder) +
                        "]");
    if (sc.jet_order < sc.op.total_degree())
      throw ConfigError("scenario: jet_order below the operator total degree");
    if (sc.per_segment < 1) throw ConfigError("scenario: per_segment must be >= 1");
    if (!sc.corrupt.empty() && sc.corrupt != "rotation" && sc.corrupt != "surface")
      throw ConfigError("scenario: corrupt must be \"rotation\" or \"surface\"");
    sc.quad.validate();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("scenario " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// evaluation cloud

namespace detail {

/// Points decomposable under every descriptor. With one descriptor this is
/// its fiber sampling; with several it intersects fibers through base-sample
/// pairs of the first two descriptors and filters against the rest.
inline SampleCloud evaluation_cloud(const std::vector<NormalSetDescriptor>& ds,
                                    int per_segment) {
  if (ds.empty()) throw ConfigError("evaluation_cloud: no descriptors");
  if (ds.size() == 1) return sample_set(ds[0], per_segment);

  const NormalSetDescriptor& a = ds[0];
  const NormalSetDescriptor& b = ds[1];
  const double c = dot(a.direction, b.direction);
  if (std::abs(1.0 - c * c) < 1e-12)
    throw ConfigError("evaluation_cloud: descriptor directions are parallel");

  SampleCloud cloud;
  for (const Vec& p : a.base_samples) {
    for (const Vec& q : b.base_samples) {
      const Vec diff = axpy(-1.0, p, q);  // q - p
      const double t = (dot(diff, a.direction) - c * dot(diff, b.direction)) / (1.0 - c * c);
      const Vec x = axpy(t, a.direction, p);
      bool inside = true;
      for (const NormalSetDescriptor& d : ds)
        if (!point_in_set(d, x, 1e-9)) {
          inside = false;
          break;
        }
      if (!inside) continue;
      bool duplicate = false;
      for (const Vec& seen : cloud.points)
        if (norm(axpy(-1.0, seen, x)) < 1e-12) {
          duplicate = true;
          break;
        }
      if (duplicate) continue;
      cloud.fibers.push_back(decompose_point(a, x, 1e-9));
      cloud.points.push_back(x);
    }
  }
  if (cloud.points.empty())
    throw ConfigError("evaluation_cloud: descriptors share no common sample points");
  return cloud;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// report

struct CheckRow {
  std::string name;
  bool pass = false;
  double max_deviation = 0.0;
  std::string note;

  bool operator==(const CheckRow&) const = default;
};

struct IdentityRow {
  std::string name;
  double tolerance = 0.0;
  double max_deviation = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string note;
  std::vector<double> per_point;

  bool operator==(const IdentityRow&) const = default;
};

struct ResidualReport {
  std::string scenario;
  std::size_t cloud_size = 0;
  std::vector<Vec> points;
  std::vector<CheckRow> checks;
  std::vector<IdentityRow> identities;
  double residual_max = 0.0;
  double residual_mean = 0.0;
  double residual_p50 = 0.0;
  double residual_p90 = 0.0;
  double residual_p99 = 0.0;
  Json provenance = Json::array();
  bool pass = false;
  double wall_seconds = 0.0;  // not part of the deterministic emission

  bool equivalent_to(const ResidualReport& other) const {
    return scenario == other.scenario && cloud_size == other.cloud_size &&
           points == other.points && checks == other.checks && identities == other.identities &&
           residual_max == other.residual_max && residual_mean == other.residual_mean &&
           residual_p50 == other.residual_p50 && residual_p90 == other.residual_p90 &&
           residual_p99 == other.residual_p99 && provenance == other.provenance &&
           pass == other.pass;
  }
};

inline Json report_to_json(const ResidualReport& r, bool include_timings = false) {
  Json checks = Json::array();
  for (const CheckRow& c : r.checks)
    checks.push_back(Json{{"name", c.name},
                          {"pass", c.pass},
                          {"max_deviation", c.max_deviation},
                          {"note", c.note}});
  Json identities = Json::array();
  for (const IdentityRow& row : r.identities)
    identities.push_back(Json{{"name", row.name},
                              {"tolerance", row.tolerance},
                              {"max_deviation", row.max_deviation},
                              {"pass", row.pass},
                              {"skipped", row.skipped},
                              {"note", row.note},
                              {"per_point", row.per_point}});
  Json points = Json::array();
  for (const Vec& p : r.points) points.push_back(p);
  Json out{{"scenario", r.scenario},
           {"cloud_size", r.cloud_size},
           {"points", points},
           {"checks", checks},
           {"identities", identities},
           {"residual",
            Json{{"max", r.residual_max},
                 {"mean", r.residual_mean},
                 {"p50", r.residual_p50},
                 {"p90", r.residual_p90},
                 {"p99", r.residual_p99}}},
           {"provenance", r.provenance},
           {"pass", r.pass}};
  if (include_timings) out["wall_seconds"] = r.wall_seconds;
  return out;
}

inline ResidualReport report_from_json(const Json& j) {
  ResidualReport r;
  r.scenario = j.at("scenario").get<std::string>();
  r.cloud_size = j.at("cloud_size").get<std::size_t>();
  for (const Json& p : j.at("points")) r.points.push_back(vec_from_json(p));
  for (const Json& c : j.at("checks"))
    r.checks.push_back(CheckRow{c.at("name").get<std::string>(), c.at("pass").get<bool>(),
                                c.at("max_deviation").get<double>(),
                                c.at("note").get<std::string>()});
  for (const Json& c : j.at("identities")) {
    IdentityRow row;
    row.name = c.at("name").get<std::string>();
    row.tolerance = c.at("tolerance").get<double>();
    row.max_deviation = c.at("max_deviation").get<double>();
    row.pass = c.at("pass").get<bool>();
    row.skipped = c.at("skipped").get<bool>();
    row.note = c.at("note").get<std::string>();
    row.per_point = c.at("per_point").get<std::vector<double>>();
    r.identities.push_back(std::move(row));
  }
  const Json& res = j.at("residual");
  r.residual_max = res.at("max").get<double>();
  r.residual_mean = res.at("mean").get<double>();
  r.residual_p50 = res.at("p50").get<double>();
  r.residual_p90 = res.at("p90").get<double>();
  r.residual_p99 = res.at("p99").get<double>();
  r.provenance = j.at("provenance");
  r.pass = j.at("pass").get<bool>();
  return r;
}

/// CSV: one row per (identity, point); row count = points x identities.
inline std::string report_to_csv(const ResidualReport& r) {
  const int dim = r.points.empty() ? 0 : static_cast<int>(r.points[0].size());
  std::string out = "identity,point_index";
  for (int i = 0; i < dim; ++i) out += ",x" + std::to_string(i + 1);
  out += ",deviation,tolerance,pass\n";
  for (const IdentityRow& row : r.identities) {
    for (std::size_t i = 0; i < row.per_point.size(); ++i) {
      out += row.name + "," + std::to_string(i);
      for (int k = 0; k < dim; ++k) out += "," + detail::format_double(r.points[i][k]);
      const bool point_pass = !row.skipped && row.per_point[i] <= row.tolerance;
      out += "," + detail::format_double(row.per_point[i]) + "," +
             detail::format_double(row.tolerance) + "," + (point_pass ? "true" : "false") + "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// scenario runner

namespace detail {

struct PointwiseResult {
  std::vector<double> deviations;
  std::string first_error;
};

/// Evaluates fn at each cloud point in parallel; numeric errors mark the
/// point with +inf and are reported once in the row note.
inline PointwiseResult evaluate_pointwise(const SampleCloud& cloud,
                                          const std::function<double(std::size_t)>& fn) {
  PointwiseResult result;
  result.deviations.assign(cloud.size(), 0.0);
  std::vector<std::string> errors(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) {
    try {
      result.deviations[i] = fn(i);
    } catch (const std::exception& e) {
      result.deviations[i] = std::numeric_limits<double>::infinity();
      errors[i] = e.what();
    }
  });
  for (const std::string& e : errors)
    if (!e.empty()) {
      result.first_error = e;
      break;
    }
  return result;
}

inline IdentityRow finish_row(std::string name, double tolerance, PointwiseResult r) {
  IdentityRow row;
  row.name = std::move(name);
  row.tolerance = tolerance;
  row.per_point = std::move(r.deviations);
  row.max_deviation = 0.0;
  for (double d : row.per_point) row.max_deviation = std::max(row.max_deviation, d);
  row.pass = row.max_deviation <= tolerance;
  row.note = r.first_error;
  return row;
}

inline IdentityRow skipped_row(std::string name, double tolerance, std::size_t points,
                               std::string note) {
  IdentityRow row;
  row.name = std::move(name);
  row.tolerance = tolerance;
  row.per_point.assign(points, std::numeric_limits<double>::infinity());
  row.max_deviation = std::numeric_limits<double>::infinity();
  row.pass = false;
  row.skipped = true;
  row.note = std::move(note);
  return row;
}

}  // namespace detail

/// Runs every check and identity of the scenario and aggregates the report.
/// Numeric failures are recorded per row; only configuration problems throw.
inline ResidualReport run_scenario(const Scenario& sc) {
  const auto start = std::chrono::steady_clock::now();
  ResidualReport report;
  report.scenario = sc.name;

  // Negative-control corruption of the surface happens before validation.
  std::vector<NormalSetDescriptor> descriptors = sc.descriptors;
  if (sc.corrupt == "surface") {
    for (NormalSetDescriptor& d : descriptors) {
      // Gamma := psi + 1, violating Gamma <= psi at every sample.
      if (d.psi.tabulated()) {
        double top = d.psi.table().front();
        for (double v : d.psi.table()) top = std::max(top, v);
        d.surface = cnum(top + 1.0);
      } else {
        d.surface = add(d.psi.expression(), cnum(1.0));
      }
    }
  }

  bool descriptors_valid = true;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    CheckRow check;
    check.name = "descriptor_validation[" + std::to_string(i) + "]";
    try {
      make_descriptor(descriptors[i].direction, descriptors[i].base_samples, descriptors[i].phi,
                      descriptors[i].psi, descriptors[i].surface);
      check.pass = true;
    } catch (const Error& e) {
      check.pass = false;
      check.note = e.what();
      descriptors_valid = false;
    }
    report.checks.push_back(std::move(check));
  }

  const int m = sc.jet_order;
  if (!descriptors_valid) {
    // Identities cannot run against an invalid set; record them as failed.
    report.cloud_size = 0;
    for (const char* name :
         {"residual_right_inverse", "restriction_commutation", "shift_commutation",
          "rotation_commutation", "derivative_propagation", "ideal_preservation",
          "extension_independence", "conjugation_identity", "linearity"})
      report.identities.push_back(
          detail::skipped_row(name, 0.0, 0, "descriptor validation failed"));
    report.pass = false;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  }

  ComposedRightInverse inverse = build_product_inverse(sc.descriptors, sc.op, sc.quad);
  if (sc.corrupt == "rotation") {
    for (InverseStage& stage : inverse.stages) {
      if (stage.rotation.kind() == SmoothMap::Kind::Orthogonal) {
        OrthogonalMap corrupted = stage.rotation.as_orthogonal();
        corrupted.matrix(0, 0) += 0.05;  // deliberately non-orthogonal
        stage.rotation = SmoothMap::orthogonal(corrupted);
      }
    }
  }
  report.provenance = provenance_to_json(inverse.provenance());

  const SampleCloud cloud = detail::evaluation_cloud(sc.descriptors, sc.per_segment);
  report.cloud_size = cloud.size();
  report.points = cloud.points;
  const InverseStage& stage0 = inverse.stages.front();
  const int dim = sc.descriptors[0].dimension;

  // Transform stack summary: orthogonality, direction alignment, shift round trip.
  {
    CheckRow check;
    check.name = "transform_stack";
    double dev = 0.0;
    for (const InverseStage& stage : inverse.stages) {
      if (stage.rotation.kind() == SmoothMap::Kind::Orthogonal) {
        const OrthogonalMap& a = stage.rotation.as_orthogonal();
        dev = std::max(dev, a.defect());
        Vec e1(dim, 0.0);
        e1[0] = 1.0;
        dev = std::max(dev, norm(axpy(-1.0, stage.direction, a.apply(e1))));
      }
      const SmoothMap round_trip = SmoothMap::chain({stage.shift, stage.shift.inverse()});
      for (const Vec& p : cloud.points)
        dev = std::max(dev, norm(axpy(-1.0, p, round_trip.apply(p))));
    }
    check.max_deviation = dev;
    check.pass = dev <= 1e-12;
    report.checks.push_back(std::move(check));
  }

  // Closed-form oracle for a single zero-lambda stage on the constant 1.
  if (inverse.stages.size() == 1 && stage0.lambda == Complex(0.0, 0.0)) {
    for (const Expression& f : sc.corpus) {
      if (!f.is_const() || f.node().value != Complex(1.0, 0.0)) continue;
      CheckRow check;
      check.name = "closed_form_unit_oracle";
      double dev = 0.0;
      try {
        const SmoothFunction s1 = right_inverse_function(inverse, SmoothFunction::symbolic(f));
        for (std::size_t i = 0; i < cloud.size(); ++i) {
          const double expected =
              cloud.fibers[i].t -
              sc.descriptors[0].surface_at(cloud.fibers[i].base_index);
          dev = std::max(dev, std::abs(s1.value(cloud.points[i]) - Complex(expected, 0.0)));
        }
        check.pass = dev <= 1e-10;
      } catch (const std::exception& e) {
        check.pass = false;
        check.note = e.what();
      }
      check.max_deviation = dev;
      report.checks.push_back(std::move(check));
      break;
    }
  }

  // --- pointwise identity rows ---------------------------------------------

  // P(D) (S f) = f on the cloud.
  {
    std::vector<SmoothFunction> outputs;
    outputs.reserve(sc.corpus.size());
    for (const Expression& f : sc.corpus)
      outputs.push_back(right_inverse_function(inverse, SmoothFunction::symbolic(f)));
    const int degree = sc.op.total_degree();
    auto residual = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      double worst = 0.0;
      for (std::size_t k = 0; k < sc.corpus.size(); ++k) {
        const Complex lhs = apply_operator(sc.op, outputs[k], cloud.points[i], degree).value();
        worst = std::max(worst, std::abs(lhs - sc.corpus[k].eval(cloud.points[i])));
      }
      return worst;
    });
    report.identities.push_back(
        detail::finish_row("residual_right_inverse", sc.tolerance, std::move(residual)));
  }

  // Restriction commutes with differentiation: jets of D_1 F against the
  // axis-shifted higher-order jets of F.
  {
    auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      double worst = 0.0;
      for (const Expression& f : sc.corpus) {
        const Jet high = f.jet(cloud.points[i], m + 1);
        const Jet shifted = jet_derivative(high, 0);
        const Jet direct = f.derivative(0).jet(cloud.points[i], m);
        worst = std::max(worst, jet_max_diff(shifted, direct));
      }
      return worst;
    });
    report.identities.push_back(
        detail::finish_row("restriction_commutation", 1e-12, std::move(r)));
  }

  // (D_j - lambda) commutes with composition by an axis-j shift.
  {
    const SmoothMap psi =
        stage0.shift_skipped
            ? SmoothMap::shift(make_shift_map(dim, 0, mul(cnum(0.2), sin(var(dim)))))
            : stage0.shift;
    const int axis = psi.as_shift().axis;
    const Complex lambda = stage0.lambda;
    auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      double worst = 0.0;
      for (const Expression& f : sc.corpus) {
        const Expression composed = pullback_expression(f, psi);
        const Jet g = composed.jet(cloud.points[i], m + 1);
        const Jet lhs = jet_sub(jet_derivative(g, axis), jet_scale(jet_truncate(g, m), lambda));
        const Expression rhs_expr =
            pullback_expression(sub(f.derivative(axis), mul(cnum(lambda), f)), psi);
        worst = std::max(worst, jet_max_diff(lhs, rhs_expr.jet(cloud.points[i], m)));
      }
      return worst;
    });
    report.identities.push_back(detail::finish_row("shift_commutation", 1e-12, std::move(r)));
  }

  // (D_v - lambda) o C_{A^-1} = C_{A^-1} o (D_1 - lambda).
  {
    SmoothMap rotation = stage0.rotation;
    if (stage0.rotation_skipped && sc.corrupt != "rotation") {
      Vec diag(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
      rotation = SmoothMap::orthogonal(orthogonal_map_to(diag));
    }
    if (rotation.kind() == SmoothMap::Kind::Orthogonal) {
      const OrthogonalMap& a = rotation.as_orthogonal();
      const Vec v = a.matrix.column(0);  // image of e_1
      const Complex lambda = stage0.lambda;
      const SmoothMap inv = rotation.inverse();
      auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
        double worst = 0.0;
        for (const Expression& f : sc.corpus) {
          const Expression composed = pullback_expression(f, inv);
          const Jet g = composed.jet(cloud.points[i], m + 1);
          const Jet lhs = jet_sub(jet_directional(g, v), jet_scale(jet_truncate(g, m), lambda));
          const Expression rhs_expr =
              pullback_expression(sub(f.derivative(0), mul(cnum(lambda), f)), inv);
          worst = std::max(worst, jet_max_diff(lhs, rhs_expr.jet(cloud.points[i], m)));
        }
        return worst;
      });
      report.identities.push_back(
          detail::finish_row("rotation_commutation", 1e-12, std::move(r)));
    } else {
      report.identities.push_back(detail::skipped_row("rotation_commutation", 1e-12,
                                                      cloud.size(), "no rotation stage"));
    }
  }

  // Derivative propagation through the transport integral, both identities,
  // |alpha| <= 2 with zero axis entry, axis orders 1..2.
  {
    const Complex lambda = stage0.lambda;
    const std::size_t corpus_count = std::min<std::size_t>(sc.corpus.size(), 3);
    auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      const Vec& x = cloud.points[i];
      double worst = 0.0;
      for (std::size_t k = 0; k < corpus_count; ++k) {
        const Expression& f = sc.corpus[k];
        const int probe_order = 4;
        const Jet t_jet = transport_jet(f, 0, lambda, x, probe_order, sc.quad);
        for (std::size_t pos = 0; pos < t_jet.size(); ++pos) {
          const MultiIndex& gamma = t_jet.layout().index(pos);
          const int b = gamma[0];
          std::vector<int> alpha_entries(gamma.entries());
          alpha_entries[0] = 0;
          const MultiIndex alpha(alpha_entries);
          if (alpha.order() > 2 || b > 2) continue;
          const Expression df = derivative(f, alpha);
          const Complex fiber = transport_apply(df, 0, lambda, x, sc.quad);
          Complex rhs;
          if (b == 0) {
            rhs = fiber;
          } else {
            Complex boundary(0.0, 0.0);
            Complex lpow(1.0, 0.0);
            for (int l = 0; l < b; ++l) {
              Expression term = df;
              for (int rep = 0; rep < b - l - 1; ++rep) term = term.derivative(0);
              boundary += lpow * term.eval(x);
              lpow *= lambda;
            }
            rhs = boundary + lpow * fiber;
          }
          worst = std::max(worst, std::abs(t_jet.derivative_value(gamma) - rhs));
        }
      }
      return worst;
    });
    report.identities.push_back(
        detail::finish_row("derivative_propagation", 1e-9, std::move(r)));
  }

  // Flat inputs stay flat: all jets of S applied to a cutoff vanish on the cloud.
  const CutoffResult cutoff = cutoff_flat(sc.descriptors[0], 0.05, std::max(4, m + 1));
  {
    const SmoothFunction s_cutoff =
        right_inverse_function(inverse, SmoothFunction::symbolic(cutoff.expr));
    auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      const Jet j = s_cutoff.jet_at(cloud.points[i], m);
      double worst = 0.0;
      for (std::size_t pos = 0; pos < j.size(); ++pos)
        worst = std::max(worst, std::abs(j[pos]));
      return worst;
    });
    report.identities.push_back(detail::finish_row("ideal_preservation", 1e-10, std::move(r)));
  }

  // S f must not depend on the extension: F against F + cutoff.
  {
    const Expression f = sc.corpus[0];
    const SmoothFunction s_plain =
        right_inverse_function(inverse, SmoothFunction::symbolic(f));
    const SmoothFunction s_extended =
        right_inverse_function(inverse, SmoothFunction::symbolic(add(f, cutoff.expr)));
    auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      return jet_max_diff(s_plain.jet_at(cloud.points[i], m),
                          s_extended.jet_at(cloud.points[i], m));
    });
    report.identities.push_back(
        detail::finish_row("extension_independence", 1e-9, std::move(r)));
  }

  // Conjugated stage at the rotated level: (D_1 - lambda) of the
  // shift-conjugated transport reproduces the input on the rotated cloud.
  {
    const SampleCloud rotated_cloud = sample_set(stage0.rotated, sc.per_segment);
    const Expression f_rot = pullback_expression(sc.corpus[0], stage0.rotation);
    SmoothFunction s2 = SmoothFunction::symbolic(f_rot);
    s2 = SmoothFunction::pullback(std::move(s2), stage0.shift);
    s2 = SmoothFunction::transport(std::move(s2), 0, stage0.lambda, stage0.quad);
    s2 = SmoothFunction::pullback(std::move(s2), stage0.shift.inverse());
    const std::size_t points =
        std::min<std::size_t>(rotated_cloud.size(), cloud.size());
    SampleCloud trimmed;
    trimmed.points.assign(rotated_cloud.points.begin(), rotated_cloud.points.begin() + points);
    trimmed.fibers.assign(rotated_cloud.fibers.begin(), rotated_cloud.fibers.begin() + points);
    auto r = detail::evaluate_pointwise(trimmed, [&](std::size_t i) {
      const Vec& y = trimmed.points[i];
      const Jet g = s2.jet_at(y, 1);
      const Complex lhs = g.derivative_value(MultiIndex::unit(dim, 0)) - stage0.lambda * g.value();
      return std::abs(lhs - f_rot.eval(y));
    });
    while (r.deviations.size() < cloud.size()) r.deviations.push_back(0.0);
    report.identities.push_back(
        detail::finish_row("conjugation_identity", sc.tolerance, std::move(r)));
  }

  // Linearity of S in the input.
  {
    const Expression f = sc.corpus.front();
    const Expression g = sc.corpus.back();
    const Complex ca(1.3, 0.0), cb(-0.7, 0.2);
    const Expression combo = add(mul(cnum(ca), f), mul(cnum(cb), g));
    const SmoothFunction s_f = right_inverse_function(inverse, SmoothFunction::symbolic(f));
    const SmoothFunction s_g = right_inverse_function(inverse, SmoothFunction::symbolic(g));
    const SmoothFunction s_combo =
        right_inverse_function(inverse, SmoothFunction::symbolic(combo));
    auto r = detail::evaluate_pointwise(cloud, [&](std::size_t i) {
      const Complex lhs = s_combo.value(cloud.points[i]);
      const Complex rhs = ca * s_f.value(cloud.points[i]) + cb * s_g.value(cloud.points[i]);
      return std::abs(lhs - rhs);
    });
    report.identities.push_back(detail::finish_row("linearity", 1e-10, std::move(r)));
  }

  // --- summary --------------------------------------------------------------

  std::vector<double> residuals = report.identities.front().per_point;
  if (!residuals.empty()) {
    double sum = 0.0;
    for (double d : residuals) sum += d;
    report.residual_mean = sum / residuals.size();
    std::sort(residuals.begin(), residuals.end());
    report.residual_max = residuals.back();
    auto percentile = [&](double q) {
      const std::size_t idx = static_cast<std::size_t>(
          std::min<double>(residuals.size() - 1.0, std::ceil(q * residuals.size()) - 1.0));
      return residuals[std::max<std::size_t>(idx, 0)];
    };
    report.residual_p50 = percentile(0.50);
    report.residual_p90 = percentile(0.90);
    report.residual_p99 = percentile(0.99);
  }

  report.pass = true;
  for (const CheckRow& c : report.checks) report.pass = report.pass && c.pass;
  for (const IdentityRow& row : report.identities) report.pass = report.pass && row.pass;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// The per-identity table only (no residual summary shortcut; same rows).
inline ResidualReport identity_suite(const Scenario& sc) { return run_scenario(sc); }

// ---------------------------------------------------------------------------
// emission

enum class ReportFormat { JsonFormat, CsvFormat };

/// Writes the report under dir; JSON is byte-stable across runs (timings are
/// excluded). Returns the written path.
inline std::string emit(const ResidualReport& report, const std::string& dir,
                        ReportFormat format) {
  std::filesystem::create_directories(dir);
  const std::string base = report.scenario.empty() ? "report" : report.scenario;
  if (format == ReportFormat::JsonFormat) {
    const std::string path = dir + "/" + base + "_report.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("emit: cannot write " + path);
    out << report_to_json(report).dump(2) << "\n";
    return path;
  }
  const std::string path = dir + "/" + base + "_identities.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("emit: cannot write " + path);
  out << report_to_csv(report);
  return path;
}

}  // namespace rinverse
