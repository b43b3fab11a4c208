#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rinverse/expression.hpp"
#include "rinverse/linalg.hpp"

namespace rinverse {

/// Hyperplane through 0 orthogonal to a unit normal, with an orthonormal
/// tangent frame.
struct Hyperplane {
  Vec normal;
  std::vector<Vec> frame;  // n-1 vectors spanning the hyperplane

  static Hyperplane orthogonal_to(const Vec& v) {
    const Mat basis = complete_orthonormal_basis(v);
    Hyperplane h;
    h.normal = v;
    for (int j = 1; j < basis.n; ++j) h.frame.push_back(basis.column(j));
    return h;
  }
};

/// Fiber bound: either a closed-form expression over the ambient coordinates
/// or values tabulated per base sample (for bounds with no in-grammar form).
class BoundSpec {
 public:
  BoundSpec() : expr_(cnum(0.0)) {}
  explicit BoundSpec(Expression e) : expr_(std::move(e)) {}
  explicit BoundSpec(std::vector<double> table) : table_(std::move(table)) {}

  bool tabulated() const { return table_.has_value(); }
  const Expression& expression() const {
    if (tabulated()) throw ConfigError("BoundSpec: tabulated bound has no expression");
    return expr_;
  }
  const std::vector<double>& table() const { return *table_; }

  double eval(const Vec& base_sample, std::size_t sample_index) const {
    if (tabulated()) {
      if (sample_index >= table_->size())
        throw DescriptorError("BoundSpec: table shorter than base sample list");
      return (*table_)[sample_index];
    }
    const Complex v = expr_.eval(base_sample);
    if (std::abs(v.imag()) > 1e-12)
      throw DescriptorError("BoundSpec: bound is not real-valued at a base sample");
    return v.real();
  }

  /// Bound minus the surface value at each sample (used by flattening).
  BoundSpec shifted_by(const Expression& gamma, const std::vector<Vec>& samples) const {
    if (!tabulated()) return BoundSpec(sub(expr_, gamma));
    std::vector<double> t(*table_);
    for (std::size_t i = 0; i < samples.size(); ++i) t[i] -= gamma.eval(samples[i]).real();
    return BoundSpec(std::move(t));
  }

  /// Pullback along a linear map given by coordinate expressions.
  BoundSpec substituted(const std::vector<Expression>& coords) const {
    if (tabulated()) return *this;  // tables are indexed by sample, not position
    return BoundSpec(expr_.substitute(coords));
  }

 private:
  Expression expr_;
  std::optional<std::vector<double>> table_;
};

/// A compact set described as { t*v + p : p a base sample, phi(p) <= t <= psi(p) }
/// together with a smooth surface expression Gamma, phi <= Gamma <= psi,
/// constant along the direction v.
struct NormalSetDescriptor {
  int dimension = 0;
  Vec direction;
  std::vector<Vec> base_samples;
  BoundSpec phi;
  BoundSpec psi;
  Expression surface;

  bool zero_surface() const { return surface.is_zero_const(); }

  double phi_at(std::size_t i) const { return phi.eval(base_samples[i], i); }
  double psi_at(std::size_t i) const { return psi.eval(base_samples[i], i); }
  double surface_at(std::size_t i) const { return surface.eval(base_samples[i]).real(); }
};

/// Decomposition of an ambient point as base_sample + t * direction.
struct FiberCoordinate {
  std::size_t base_index;
  double t;
};

/// Finite point sample of a normal set, each point tagged with its fiber.
struct SampleCloud {
  std::vector<Vec> points;
  std::vector<FiberCoordinate> fibers;

  std::size_t size() const { return points.size(); }
};

/// Projects x onto the descriptor decomposition; throws OutsideSetError when
/// the base offset exceeds tol or t leaves [phi, psi] by more than tol.
inline FiberCoordinate decompose_point(const NormalSetDescriptor& d, const Vec& x, double tol) {
  const double t = dot(x, d.direction);
  const Vec p = axpy(-t, d.direction, x);
  std::size_t best = 0;
  double best_dist = -1.0;
  for (std::size_t i = 0; i < d.base_samples.size(); ++i) {
    const Vec diff = axpy(-1.0, d.base_samples[i], p);
    const double dist = norm(diff);
    if (best_dist < 0.0 || dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  if (best_dist > tol)
    throw OutsideSetError("point is " + detail::format_double(best_dist) +
                          " away from the nearest base sample");
  const double lo = d.phi_at(best), hi = d.psi_at(best);
  if (t < lo - tol || t > hi + tol)
    throw OutsideSetError("fiber parameter " + detail::format_double(t) + " outside [" +
                          detail::format_double(lo) + ", " + detail::format_double(hi) + "]");
  return {best, t};
}

inline bool point_in_set(const NormalSetDescriptor& d, const Vec& x, double tol) {
  try {
    decompose_point(d, x, tol);
    return true;
  } catch (const OutsideSetError&) {
    return false;
  }
}

/// Validated constructor for NormalSetDescriptor.
inline NormalSetDescriptor make_descriptor(Vec direction, std::vector<Vec> base_samples,
                                           BoundSpec phi, BoundSpec psi, Expression surface) {
  NormalSetDescriptor d;
  d.dimension = static_cast<int>(direction.size());
  if (std::abs(norm(direction) - 1.0) > 1e-12)
    throw DescriptorError("make_descriptor: direction is not a unit vector");
  if (base_samples.empty()) throw DescriptorError("make_descriptor: no base samples");
  d.direction = std::move(direction);
  d.base_samples = std::move(base_samples);
  d.phi = std::move(phi);
  d.psi = std::move(psi);
  d.surface = std::move(surface);

  for (std::size_t i = 0; i < d.base_samples.size(); ++i) {
    const Vec& p = d.base_samples[i];
    if (static_cast<int>(p.size()) != d.dimension)
      throw DescriptorError("make_descriptor: base sample " + std::to_string(i) +
                            " has wrong dimension");
    if (std::abs(dot(p, d.direction)) > 1e-12)
      throw DescriptorError("make_descriptor: base sample " + std::to_string(i) +
                            " is not on the base hyperplane");
    const double lo = d.phi_at(i), hi = d.psi_at(i);
    const Complex g = d.surface.eval(p);
    if (std::abs(g.imag()) > 1e-12)
      throw DescriptorError("make_descriptor: surface is not real-valued at sample " +
                            std::to_string(i));
    if (g.real() < lo - 1e-12 || g.real() > hi + 1e-12)
      throw DescriptorError("make_descriptor: surface value " + detail::format_double(g.real()) +
                            " outside [phi, psi] = [" + detail::format_double(lo) + ", " +
                            detail::format_double(hi) + "] at sample " + std::to_string(i));
    // The surface must not vary along the direction.
    const Vec probe = axpy(0.37, d.direction, p);
    const double moved = d.surface.eval(probe).real();
    if (std::abs(moved - g.real()) > 1e-9)
      throw DescriptorError("make_descriptor: surface varies along the direction at sample " +
                            std::to_string(i));
  }
  return d;
}

/// Equally spaced fiber samples; a single point where phi == psi.
inline SampleCloud sample_set(const NormalSetDescriptor& d, int per_segment) {
  if (per_segment < 1) throw ConfigError("sample_set: per_segment must be >= 1");
  SampleCloud cloud;
  for (std::size_t i = 0; i < d.base_samples.size(); ++i) {
    const double lo = d.phi_at(i), hi = d.psi_at(i);
    if (hi < lo - 1e-12)
      throw DescriptorError("sample_set: degenerate interval (psi < phi) at sample " +
                            std::to_string(i));
    const Vec& p = d.base_samples[i];
    if (hi - lo <= 0.0 || per_segment == 1) {
      cloud.points.push_back(axpy(lo, d.direction, p));
      cloud.fibers.push_back({i, lo});
      continue;
    }
    for (int k = 0; k < per_segment; ++k) {
      const double t = lo + (hi - lo) * k / (per_segment - 1);
      cloud.points.push_back(axpy(t, d.direction, p));
      cloud.fibers.push_back({i, t});
    }
  }
  return cloud;
}

/// Axis-aligned bounding box of the set, from fiber endpoints, fiber samples
/// and the zero-surface point of each fiber when it lies inside.
struct BoundingBox {
  Vec lo, hi;

  void expand(const Vec& p) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
};

inline BoundingBox bounding_box(const NormalSetDescriptor& d) {
  BoundingBox box;
  box.lo.assign(d.dimension, std::numeric_limits<double>::infinity());
  box.hi.assign(d.dimension, -std::numeric_limits<double>::infinity());
  const SampleCloud cloud = sample_set(d, 9);
  for (const Vec& p : cloud.points) box.expand(p);
  for (std::size_t i = 0; i < d.base_samples.size(); ++i) {
    const double lo = d.phi_at(i), hi = d.psi_at(i);
    if (lo <= 0.0 && 0.0 <= hi) box.expand(d.base_samples[i]);
  }
  return box;
}

/// Symmetric Hausdorff distance between two finite point sets.
inline double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  auto directed = [](const std::vector<Vec>& from, const std::vector<Vec>& to) {
    double worst = 0.0;
    for (const Vec& p : from) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const Vec& q : to) nearest = std::min(nearest, norm(axpy(-1.0, q, p)));
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

// ---------------------------------------------------------------------------
// fixtures

struct FixtureSet {
  std::string name;
  std::string description;
  std::vector<NormalSetDescriptor> descriptors;  // primary presentation first
};

namespace fixtures {

/// 0 <= x1 <= 1, 0 <= x2 <= exp(-1/x1); direction e2, zero surface.
inline NormalSetDescriptor k1_e2() {
  std::vector<Vec> base;
  for (int k = 0; k <= 10; ++k) base.push_back({k / 10.0, 0.0});
  return make_descriptor({0.0, 1.0}, std::move(base), BoundSpec(cnum(0.0)),
                         BoundSpec(rexp(var(1))), cnum(0.0));
}

/// The same set fibered along e1. The lower bound -1/log(x2) has no
/// in-grammar closed form, so it is tabulated at the base samples.
inline NormalSetDescriptor k1_e1() {
  std::vector<Vec> base;
  std::vector<double> lower;
  const double top = std::exp(-1.0);
  for (int l = 0; l <= 10; ++l) {
    const double x2 = top * l / 10.0;
    base.push_back({0.0, x2});
    lower.push_back(l == 0 ? 0.0 : -1.0 / std::log(x2));
  }
  return make_descriptor({1.0, 0.0}, std::move(base), BoundSpec(std::move(lower)),
                         BoundSpec(cnum(1.0)), cnum(1.0));
}

/// 0 < x1 <= 1, x1^s <= x2 <= x1^s + exp(-1/x1) with s = sqrt(2); the surface
/// is the lower bound itself. Base samples stay off x1 = 0, where x1^s is
/// only finitely smooth.
inline NormalSetDescriptor k2() {
  const double s = std::sqrt(2.0);
  std::vector<Vec> base;
  for (int k = 1; k <= 10; ++k) base.push_back({k / 10.0, 0.0});
  const Expression lower = pow_real(var(1), s);
  return make_descriptor({0.0, 1.0}, std::move(base), BoundSpec(lower),
                         BoundSpec(add(lower, rexp(var(1)))), lower);
}

/// Graph of sin over [0, 1]: phi = psi = Gamma = sin(x1), every fiber a point.
inline NormalSetDescriptor graph() {
  std::vector<Vec> base;
  for (int k = 0; k <= 200; ++k) base.push_back({k / 200.0, 0.0});
  const Expression g = sin(var(1));
  return make_descriptor({0.0, 1.0}, std::move(base), BoundSpec(g), BoundSpec(g), g);
}

/// Axis-aligned band with a wavy surface, direction e2.
inline NormalSetDescriptor box_e2() {
  std::vector<Vec> base;
  for (int k = 0; k <= 20; ++k) base.push_back({-0.5 + k / 20.0, 0.0});
  return make_descriptor({0.0, 1.0}, std::move(base), BoundSpec(cnum(-0.3)),
                         BoundSpec(cnum(0.3)), mul(cnum(0.1), sin(var(1))));
}

/// The band above rotated so its fiber direction is (1,1)/sqrt(2); exercises
/// rotation, flattening and integration together.
inline NormalSetDescriptor rotated_box() {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Vec v = {inv_sqrt2, inv_sqrt2};
  const Mat basis = complete_orthonormal_basis(v);  // columns (v, w)
  Mat rot(2);                                       // rot * e2 = v
  for (int i = 0; i < 2; ++i) {
    rot(i, 0) = basis(i, 1);
    rot(i, 1) = basis(i, 0);
  }
  const NormalSetDescriptor box = box_e2();
  std::vector<Vec> base;
  for (const Vec& p : box.base_samples) base.push_back(rot.apply(p));
  // Pullback along rot^T: coordinate i of rot^T x is <column i of rot, x>.
  std::vector<Expression> coords;
  for (int i = 0; i < 2; ++i) {
    Expression c = cnum(0.0);
    for (int j = 0; j < 2; ++j) c = add(c, mul(cnum(rot(j, i)), var(j + 1)));
    coords.push_back(c);
  }
  return make_descriptor(v, std::move(base), BoundSpec(cnum(-0.3)), BoundSpec(cnum(0.3)),
                         box.surface.substitute(coords));
}

/// Band fibered along e1 with a nonzero surface, for conjugation tests.
inline NormalSetDescriptor band_e1() {
  std::vector<Vec> base;
  for (int k = 0; k <= 10; ++k) base.push_back({0.0, k / 10.0});
  return make_descriptor({1.0, 0.0}, std::move(base), BoundSpec(cnum(-0.2)),
                         BoundSpec(cnum(0.4)),
                         add(cnum(0.1), mul(cnum(0.2), sin(var(2)))));
}

}  // namespace fixtures

/// Named example sets. "K1" carries both fiber presentations, e2 first.
inline FixtureSet fixture(const std::string& name) {
  if (name == "K1")
    return {"K1", "subgraph of exp(-1/x1) over [0,1], e2 and e1 presentations",
            {fixtures::k1_e2(), fixtures::k1_e1()}};
  if (name == "K2")
    return {"K2", "band of width exp(-1/x1) above x1^sqrt(2)", {fixtures::k2()}};
  if (name == "graph")
    return {"graph", "graph of sin(x1) over [0,1]", {fixtures::graph()}};
  if (name == "rotated_box")
    return {"rotated_box", "band with wavy surface, fibers along (1,1)/sqrt(2)",
            {fixtures::rotated_box()}};
  if (name == "band")
    return {"band", "e1-fibered band with nonzero surface", {fixtures::band_e1()}};
  throw ConfigError("unknown fixture '" + name +
                    "' (available: K1, K2, graph, rotated_box, band)");
}

inline std::vector<std::string> fixture_names() {
  return {"K1", "K2", "graph", "rotated_box", "band"};
}

}  // namespace rinverse
