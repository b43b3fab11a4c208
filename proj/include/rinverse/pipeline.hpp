#pragma once

#include <algorithm>
#include <vector>

#include "rinverse/core_inverse.hpp"

namespace rinverse {

/// First order operator sum_j v_j D_j - lambda in a unit direction v.
struct DirectionalOperator {
  Vec direction;
  Complex lambda{0.0, 0.0};
};

inline DirectionalOperator make_directional_operator(Vec direction, Complex lambda) {
  if (std::abs(norm(direction) - 1.0) > 1e-12)
    throw ConfigError("directional operator: direction must be a unit vector");
  return {std::move(direction), lambda};
}

/// One factor of a product operator: a univariate polynomial P (ascending
/// coefficients, leading nonzero, degree >= 1) applied to D_v.
struct PolyFactor {
  Vec direction;
  std::vector<Complex> poly;

  int degree() const { return static_cast<int>(poly.size()) - 1; }
};

/// P(D) = P_1(D_{v_1}) o ... o P_k(D_{v_k}).
struct OperatorProduct {
  std::vector<PolyFactor> factors;

  int total_degree() const {
    int d = 0;
    for (const PolyFactor& f : factors) d += f.degree();
    return d;
  }
};

inline void validate_factor(const PolyFactor& f) {
  if (std::abs(norm(f.direction) - 1.0) > 1e-12)
    throw ConfigError("operator factor: direction must be a unit vector");
  if (f.poly.size() < 2) throw ConfigError("operator factor: polynomial degree must be >= 1");
  if (f.poly.back() == Complex(0.0, 0.0))
    throw ConfigError("operator factor: leading coefficient must be nonzero");
}

// ---------------------------------------------------------------------------
// polynomial roots

namespace detail {

inline Complex poly_eval(const std::vector<Complex>& coeffs, Complex z) {
  Complex r(0.0, 0.0);
  for (std::size_t i = coeffs.size(); i-- > 0;) r = r * z + coeffs[i];
  return r;
}

inline Complex poly_eval_derivative(const std::vector<Complex>& coeffs, Complex z) {
  Complex r(0.0, 0.0);
  for (std::size_t i = coeffs.size(); i-- > 1;) r = r * z + static_cast<double>(i) * coeffs[i];
  return r;
}

}  // namespace detail

/// Expands leading * prod (t - roots[i]) back to ascending coefficients.
inline std::vector<Complex> expand_from_roots(const std::vector<Complex>& roots,
                                              Complex leading) {
  std::vector<Complex> coeffs{leading};
  for (const Complex& r : roots) {
    std::vector<Complex> next(coeffs.size() + 1, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i + 1] += coeffs[i];
      next[i] -= r * coeffs[i];
    }
    coeffs = std::move(next);
  }
  return coeffs;
}

/// All complex roots (with multiplicity) by the Aberth-Ehrlich iteration with
/// deterministic initial points. The result is sorted by (re, im) and must
/// re-expand to the input within 1e-8 relative coefficient error.
inline std::vector<Complex> factor_polynomial(const std::vector<Complex>& coeffs) {
  if (coeffs.size() < 2) throw ConfigError("factor_polynomial: degree must be >= 1");
  if (coeffs.back() == Complex(0.0, 0.0))
    throw ConfigError("factor_polynomial: leading coefficient must be nonzero");
  const int n = static_cast<int>(coeffs.size()) - 1;

  std::vector<Complex> monic(coeffs);
  const Complex leading = coeffs.back();
  for (Complex& c : monic) c /= leading;

  double bound = 0.0;
  for (int i = 0; i < n; ++i) bound = std::max(bound, std::abs(monic[i]));
  const double radius = 1.0 + bound;  // Cauchy bound on root magnitude

  std::vector<Complex> z(n);
  for (int k = 0; k < n; ++k) {
    const double angle = 2.0 * M_PI * (k + 0.25) / n + 0.5;
    z[k] = radius * Complex(std::cos(angle), std::sin(angle));
  }

  const int max_iterations = 800;
  for (int iter = 0; iter < max_iterations; ++iter) {
    double movement = 0.0;
    for (int k = 0; k < n; ++k) {
      const Complex p = detail::poly_eval(monic, z[k]);
      const Complex dp = detail::poly_eval_derivative(monic, z[k]);
      if (p == Complex(0.0, 0.0)) continue;
      if (dp == Complex(0.0, 0.0)) {
        z[k] += Complex(1e-6, 1e-6);
        movement = 1.0;
        continue;
      }
      const Complex newton = p / dp;
      Complex repulsion(0.0, 0.0);
      for (int j = 0; j < n; ++j)
        if (j != k && z[k] != z[j]) repulsion += Complex(1.0, 0.0) / (z[k] - z[j]);
      const Complex denom = Complex(1.0, 0.0) - newton * repulsion;
      const Complex step = denom == Complex(0.0, 0.0) ? newton : newton / denom;
      z[k] -= step;
      movement = std::max(movement, std::abs(step) / std::max(1.0, std::abs(z[k])));
    }
    if (movement < 1e-15) break;
  }

  std::sort(z.begin(), z.end(), [](const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });

  const std::vector<Complex> expanded = expand_from_roots(z, leading);
  double scale = 0.0;
  for (const Complex& c : coeffs) scale = std::max(scale, std::abs(c));
  double err = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) err = std::max(err, std::abs(expanded[i] - coeffs[i]));
  if (err > 1e-8 * scale)
    throw NumericError("factor_polynomial: roots re-expand with relative error " +
                       detail::format_double(err / scale));
  return z;
}

// ---------------------------------------------------------------------------
// right inverse assembly

/// One transport stage: rotate the fiber direction onto e_1, flatten the
/// surface to zero, integrate along axis 1, then map back.
struct InverseStage {
  NormalSetDescriptor descriptor;  // as supplied
  Vec direction;
  Complex lambda{0.0, 0.0};
  SmoothMap rotation;              // maps rotated coordinates to original
  SmoothMap shift;                 // maps flattened coordinates to rotated
  NormalSetDescriptor rotated;     // e_1 presentation
  NormalSetDescriptor flattened;   // zero surface
  QuadratureConfig quad;
  Complex post_scale{1.0, 0.0};    // 1/leading coefficient on a factor's last stage
  bool rotation_skipped = false;
  bool shift_skipped = false;
};

/// Provenance of one stage, for audit output and construction equality tests.
struct StageProvenance {
  Vec direction;
  Complex lambda;
  bool rotation_skipped;
  bool shift_skipped;
  int integration_axis;  // 1-based, always 1 in the rotated frame
  double quad_tolerance;
  Complex post_scale;

  bool operator==(const StageProvenance& other) const {
    return direction == other.direction && lambda == other.lambda &&
           rotation_skipped == other.rotation_skipped && shift_skipped == other.shift_skipped &&
           integration_axis == other.integration_axis &&
           quad_tolerance == other.quad_tolerance && post_scale == other.post_scale;
  }
};

namespace detail {

inline bool is_first_axis(const Vec& v) {
  if (std::abs(v[0] - 1.0) > 1e-12) return false;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > 1e-12) return false;
  return true;
}

inline InverseStage build_stage(const NormalSetDescriptor& d, const Vec& direction,
                                Complex lambda, const QuadratureConfig& quad) {
  if (norm(axpy(-1.0, direction, d.direction)) > 1e-9)
    throw ConfigError("build_right_inverse: operator direction differs from the descriptor's");

  InverseStage stage;
  stage.descriptor = d;
  stage.direction = direction;
  stage.lambda = lambda;
  stage.quad = quad;

  if (is_first_axis(d.direction)) {
    stage.rotation = SmoothMap::identity(d.dimension);
    stage.rotation_skipped = true;
    stage.rotated = d;
  } else {
    const OrthogonalMap a = orthogonal_map_to(d.direction);
    stage.rotation = SmoothMap::orthogonal(a);
    const std::vector<Expression> coords = stage.rotation.coordinate_expressions();
    std::vector<Vec> base;
    base.reserve(d.base_samples.size());
    for (const Vec& p : d.base_samples) {
      Vec q = a.apply_inverse(p);
      q[0] = 0.0;  // exact: <p, v> = 0 up to roundoff
      base.push_back(std::move(q));
    }
    Vec e1(d.dimension, 0.0);
    e1[0] = 1.0;
    stage.rotated = make_descriptor(e1, std::move(base), d.phi.substituted(coords),
                                    d.psi.substituted(coords), d.surface.substitute(coords));
  }

  if (stage.rotated.zero_surface()) {
    stage.shift = SmoothMap::identity(d.dimension);
    stage.shift_skipped = true;
    stage.flattened = stage.rotated;
  } else {
    Flattening flat = flattening_map(stage.rotated);
    stage.shift = SmoothMap::shift(flat.shift);
    stage.flattened = std::move(flat.flattened);
  }
  return stage;
}

/// S G = (transport of G o A o Phi along axis 1) o Phi^-1 o A^-1, scaled.
inline SmoothFunction wrap_stage(const InverseStage& stage, SmoothFunction g) {
  g = SmoothFunction::pullback(std::move(g), stage.rotation);
  g = SmoothFunction::pullback(std::move(g), stage.shift);
  g = SmoothFunction::transport(std::move(g), 0, stage.lambda, stage.quad);
  g = SmoothFunction::pullback(std::move(g), stage.shift.inverse());
  g = SmoothFunction::pullback(std::move(g), stage.rotation.inverse());
  if (stage.post_scale != Complex(1.0, 0.0))
    g = SmoothFunction::scaled(std::move(g), stage.post_scale);
  return g;
}

inline StageProvenance stage_provenance(const InverseStage& s) {
  return {s.direction,       s.lambda,         s.rotation_skipped, s.shift_skipped,
          1,                 s.quad.tolerance, s.post_scale};
}

}  // namespace detail

/// Right inverse of D_v - lambda over one descriptor.
struct RightInverseOperator {
  InverseStage stage;

  std::vector<StageProvenance> provenance() const { return {detail::stage_provenance(stage)}; }
};

inline RightInverseOperator build_right_inverse(const NormalSetDescriptor& d,
                                                const DirectionalOperator& op,
                                                const QuadratureConfig& quad) {
  return {detail::build_stage(d, op.direction, op.lambda, quad)};
}

/// The operator output S f as a first-class smooth function; lets callers
/// evaluate jets anywhere and feed further stages.
inline SmoothFunction right_inverse_function(const RightInverseOperator& s,
                                             const SmoothFunction& f) {
  return detail::wrap_stage(s.stage, f);
}

/// Order-m jet of S f at a point of the set. The point must decompose per the
/// descriptor within 1e-9.
inline Jet apply_right_inverse(const RightInverseOperator& s, const SmoothFunction& f,
                               const Vec& x, int order) {
  decompose_point(s.stage.descriptor, x, 1e-9);
  return right_inverse_function(s, f).jet_at(x, order);
}

inline Jet apply_right_inverse(const RightInverseOperator& s, const Expression& f, const Vec& x,
                               int order) {
  return apply_right_inverse(s, SmoothFunction::symbolic(f), x, order);
}

// ---------------------------------------------------------------------------
// operator application (the P(D) side)

/// Jet of (D_v - lambda) F at x.
inline Jet apply_operator(const DirectionalOperator& op, const SmoothFunction& f, const Vec& x,
                          int order) {
  const Jet j = f.jet_at(x, order + 1);
  return jet_sub(jet_directional(j, op.direction), jet_scale(jet_truncate(j, order), op.lambda));
}

inline Jet apply_operator(const DirectionalOperator& op, const Expression& f, const Vec& x,
                          int order) {
  return apply_operator(op, SmoothFunction::symbolic(f), x, order);
}

/// Jet of P(D) F at x for a product operator; the jet order is raised
/// internally by the total degree.
inline Jet apply_operator(const OperatorProduct& op, const SmoothFunction& f, const Vec& x,
                          int order) {
  const int total = op.total_degree();
  if (order < total)
    throw InsufficientOrderError("apply_operator: jet order below operator total degree");
  for (const PolyFactor& factor : op.factors) validate_factor(factor);

  Jet current = f.jet_at(x, order + total);
  // Factors commute; apply right to left as written.
  for (std::size_t i = op.factors.size(); i-- > 0;) {
    const PolyFactor& factor = op.factors[i];
    const int deg = factor.degree();
    const int out_order = current.order() - deg;
    // powers[d] = D_v^d of the current jet
    std::vector<Jet> powers{current};
    for (int d = 1; d <= deg; ++d)
      powers.push_back(jet_directional(powers.back(), factor.direction));
    Jet acc = Jet::zero(current.dimension(), out_order, x);
    for (int d = 0; d <= deg; ++d) {
      if (factor.poly[d] == Complex(0.0, 0.0)) continue;
      acc = jet_add(acc, jet_scale(jet_truncate(powers[d], out_order), factor.poly[d]));
    }
    current = std::move(acc);
  }
  return current;
}

inline Jet apply_operator(const OperatorProduct& op, const Expression& f, const Vec& x,
                          int order) {
  return apply_operator(op, SmoothFunction::symbolic(f), x, order);
}

// ---------------------------------------------------------------------------
// product pipelines

/// Composition of single-factor right inverses per the factorization of the
/// product operator; stages are listed in application order.
struct ComposedRightInverse {
  std::vector<InverseStage> stages;
  std::vector<NormalSetDescriptor> descriptors;  // one per distinct direction

  std::vector<StageProvenance> provenance() const {
    std::vector<StageProvenance> p;
    p.reserve(stages.size());
    for (const InverseStage& s : stages) p.push_back(detail::stage_provenance(s));
    return p;
  }
};

namespace detail {

/// Largest nearest-neighbor gap within a cloud, a resolution estimate.
inline double cloud_mesh(const std::vector<Vec>& points) {
  double mesh = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      nearest = std::min(nearest, norm(axpy(-1.0, points[j], points[i])));
    }
    if (points.size() > 1) mesh = std::max(mesh, nearest);
  }
  return mesh;
}

/// Cross-check that two descriptors describe the same set: identical clouds
/// match to 1e-9; different presentations must still agree within the
/// sampling resolution.
inline void cross_check_same_set(const NormalSetDescriptor& a, const NormalSetDescriptor& b) {
  const SampleCloud ca = sample_set(a, 5), cb = sample_set(b, 5);
  const double h = hausdorff_distance(ca.points, cb.points);
  if (h <= 1e-9) return;
  const double bound = 2.0 * (cloud_mesh(ca.points) + cloud_mesh(cb.points)) + 1e-9;
  if (h > bound)
    throw DescriptorError(
        "build_product_inverse: descriptors disagree (Hausdorff distance " +
        format_double(h) + " exceeds the sampling resolution bound " + format_double(bound) +
        ")");
}

}  // namespace detail

inline ComposedRightInverse build_product_inverse(
    const std::vector<NormalSetDescriptor>& descriptors, const OperatorProduct& op,
    const QuadratureConfig& quad) {
  if (op.factors.empty()) throw ConfigError("build_product_inverse: no factors");
  if (descriptors.empty()) throw ConfigError("build_product_inverse: no descriptors");

  ComposedRightInverse composed;
  composed.descriptors = descriptors;
  for (std::size_t i = 0; i < descriptors.size(); ++i)
    for (std::size_t j = i + 1; j < descriptors.size(); ++j)
      detail::cross_check_same_set(descriptors[i], descriptors[j]);

  auto descriptor_for = [&](const Vec& direction) -> const NormalSetDescriptor& {
    for (const NormalSetDescriptor& d : descriptors)
      if (norm(axpy(-1.0, direction, d.direction)) <= 1e-9) return d;
    throw ConfigError("build_product_inverse: no descriptor for a factor direction");
  };

  // Count stages first so per-stage tolerances can tighten with nesting depth.
  int total_stages = 0;
  for (const PolyFactor& f : op.factors) {
    validate_factor(f);
    total_stages += f.degree();
  }

  int stage_index = 0;
  for (std::size_t fi = 0; fi < op.factors.size(); ++fi) {
    const PolyFactor& factor = op.factors[fi];
    const NormalSetDescriptor& d = descriptor_for(factor.direction);
    std::vector<Complex> roots;
    try {
      roots = factor_polynomial(factor.poly);
    } catch (const Error& e) {
      throw NumericError("build_product_inverse: factor " + std::to_string(fi + 1) + ": " +
                         e.what());
    }
    for (std::size_t ri = 0; ri < roots.size(); ++ri) {
      // Earlier stages sit deeper in the nested integrals; tighten them more.
      const double tol = quad.tolerance * std::pow(10.0, -(total_stages - 1 - stage_index));
      InverseStage stage;
      try {
        stage = detail::build_stage(d, factor.direction, roots[ri], quad.with_tolerance(tol));
      } catch (const Error& e) {
        throw ConfigError("build_product_inverse: stage " + std::to_string(stage_index + 1) +
                          ": " + e.what());
      }
      if (ri + 1 == roots.size()) stage.post_scale = Complex(1.0, 0.0) / factor.poly.back();
      composed.stages.push_back(std::move(stage));
      ++stage_index;
    }
  }
  return composed;
}

inline SmoothFunction right_inverse_function(const ComposedRightInverse& s,
                                             const SmoothFunction& f) {
  SmoothFunction g = f;
  for (const InverseStage& stage : s.stages) g = detail::wrap_stage(stage, g);
  return g;
}

inline Jet apply_right_inverse(const ComposedRightInverse& s, const SmoothFunction& f,
                               const Vec& x, int order) {
  for (const NormalSetDescriptor& d : s.descriptors) decompose_point(d, x, 1e-9);
  return right_inverse_function(s, f).jet_at(x, order);
}

inline Jet apply_right_inverse(const ComposedRightInverse& s, const Expression& f, const Vec& x,
                               int order) {
  return apply_right_inverse(s, SmoothFunction::symbolic(f), x, order);
}

}  // namespace rinverse
