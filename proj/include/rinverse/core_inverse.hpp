#pragma once

#include <string>
#include <vector>

#include "rinverse/smooth_function.hpp"

namespace rinverse {

/// Finite-order jet data of a function restricted to a sample cloud.
struct WhitneyJetField {
  SampleCloud cloud;
  int order = 0;
  std::vector<Jet> jets;  // one per cloud point, base = the point

  std::size_t size() const { return jets.size(); }
};

/// Fiber transport integral of F at x:
///   integral_0^{x_axis} F(x with x_axis = t) e^{lambda (x_axis - t)} dt,
/// oriented so that x_axis < 0 flips the sign.
inline Complex transport_apply(const Expression& f, int axis, Complex lambda, const Vec& x,
                               const QuadratureConfig& quad) {
  return SmoothFunction::transport(SmoothFunction::symbolic(f), axis, lambda, quad).value(x);
}

/// Full order-m jet of the transport integral at x. Coefficients with a zero
/// axis entry come from integrating the corresponding derivative of F along
/// the fiber; axis derivatives add the boundary terms of the propagation
/// identity.
inline Jet transport_jet(const Expression& f, int axis, Complex lambda, const Vec& x, int order,
                         const QuadratureConfig& quad) {
  return SmoothFunction::transport(SmoothFunction::symbolic(f), axis, lambda, quad)
      .jet_at(x, order);
}

/// Restriction of F to the cloud: order-m jets at every point.
inline WhitneyJetField restrict_field(const Expression& f, const SampleCloud& cloud, int order) {
  WhitneyJetField field;
  field.cloud = cloud;
  field.order = order;
  field.jets.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    try {
      field.jets.push_back(f.jet(cloud.points[i], order));
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " (cloud point " + std::to_string(i) + ")",
                            e.subtree);
    }
  }
  return field;
}

struct CutoffResult {
  Expression expr;
  /// True when the expression vanished on the whole probe grid (margin too
  /// large relative to the set); the caller should widen the grid or shrink
  /// margin.
  bool degenerate = false;
};

/// A C^smoothness function that vanishes identically on the margin-neighborhood
/// of the set's bounding box (hence is flat there to any order <= smoothness)
/// and saturates to 1 once any coordinate is more than 2*margin outside.
/// Built from polynomial ramp terms, one pair per coordinate.
inline CutoffResult cutoff_flat(const NormalSetDescriptor& d, double margin, int smoothness) {
  if (margin <= 0.0) throw ConfigError("cutoff_flat: margin must be > 0");
  if (smoothness < 1) throw ConfigError("cutoff_flat: smoothness must be >= 1");
  const BoundingBox box = bounding_box(d);

  Expression sum = cnum(0.0);
  for (int i = 0; i < d.dimension; ++i) {
    const Expression xi = var(i + 1);
    const Expression above =
        smoothstep(mul(cnum(1.0 / margin), sub(xi, cnum(box.hi[i] + margin))), smoothness);
    const Expression below =
        smoothstep(mul(cnum(1.0 / margin), sub(cnum(box.lo[i] - margin), xi)), smoothness);
    sum = add(sum, add(above, below));
  }
  CutoffResult result{smoothstep(sum, smoothness), false};

  // Probe an margin-independent grid around the set for any nonzero value.
  double diag = 0.0;
  for (int i = 0; i < d.dimension; ++i) diag += (box.hi[i] - box.lo[i]) * (box.hi[i] - box.lo[i]);
  const double pad = 0.5 * std::sqrt(diag) + 0.5;
  bool any_nonzero = false;
  std::vector<int> idx(d.dimension, 0);
  const int steps = 5;
  for (;;) {
    Vec p(d.dimension);
    for (int i = 0; i < d.dimension; ++i) {
      const double lo = box.lo[i] - pad, hi = box.hi[i] + pad;
      p[i] = lo + (hi - lo) * idx[i] / (steps - 1);
    }
    if (std::abs(result.expr.eval(p)) > 0.0) {
      any_nonzero = true;
      break;
    }
    int carry = 0;
    while (carry < d.dimension && ++idx[carry] == steps) idx[carry++] = 0;
    if (carry == d.dimension) break;
  }
  result.degenerate = !any_nonzero;
  return result;
}

}  // namespace rinverse
