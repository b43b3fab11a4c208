#pragma once

#include <memory>
#include <vector>

#include "rinverse/geometry.hpp"

namespace rinverse {

/// Orthogonal change of coordinates; the inverse is the transpose.
struct OrthogonalMap {
  Mat matrix;

  int dimension() const { return matrix.n; }
  Vec apply(const Vec& x) const { return matrix.apply(x); }
  Vec apply_inverse(const Vec& x) const { return matrix.transposed().apply(x); }

  /// max |(A^T A - I)|; 0 for exact orthogonality.
  double defect() const { return orthogonality_defect(matrix); }
};

/// Builds the orthogonal map A with A e_1 = v by completing v to an
/// orthonormal basis (Steinitz seed, then Gram-Schmidt).
inline OrthogonalMap orthogonal_map_to(const Vec& v) {
  if (std::abs(norm(v) - 1.0) > 1e-12)
    throw NumericError("orthogonal_map_to: direction must be a unit vector");
  OrthogonalMap a{complete_orthonormal_basis(v)};
  if (a.defect() > 1e-12) throw NumericError("orthogonal_map_to: orthogonality defect too large");
  return a;
}

/// Coordinate shift along one axis by an expression of the other coordinates:
/// x -> x + gamma(x with x_axis = 0) * e_axis.
struct ShiftMap {
  int dimension = 0;
  int axis = 0;
  Expression gamma;  // already independent of x_axis

  Vec apply(const Vec& x) const {
    Vec y(x);
    y[axis] += gamma.eval(x).real();
    return y;
  }
  Vec apply_inverse(const Vec& x) const {
    Vec y(x);
    y[axis] -= gamma.eval(x).real();
    return y;
  }
  bool is_identity() const { return gamma.is_zero_const(); }
};

inline ShiftMap make_shift_map(int dimension, int axis, const Expression& gamma) {
  if (axis < 0 || axis >= dimension) throw ConfigError("make_shift_map: axis out of range");
  if (gamma.min_dimension() > dimension)
    throw ConfigError("make_shift_map: shift expression uses too many variables");
  // Force independence of x_axis by evaluating the shift at x_axis = 0.
  std::vector<Expression> coords;
  for (int i = 0; i < dimension; ++i)
    coords.push_back(i == axis ? cnum(0.0) : var(i + 1));
  return ShiftMap{dimension, axis, gamma.substitute(coords)};
}

/// Invertible smooth change of variables: orthogonal, shift, or a chain of
/// maps applied left to right.
class SmoothMap {
 public:
  enum class Kind { Identity, Orthogonal, Shift, Chain };

  static SmoothMap identity(int dimension) {
    SmoothMap m;
    m.kind_ = Kind::Identity;
    m.dimension_ = dimension;
    return m;
  }
  static SmoothMap orthogonal(OrthogonalMap a) {
    SmoothMap m;
    m.kind_ = Kind::Orthogonal;
    m.dimension_ = a.dimension();
    m.orthogonal_ = std::move(a);
    return m;
  }
  static SmoothMap shift(ShiftMap s) {
    SmoothMap m;
    m.kind_ = Kind::Shift;
    m.dimension_ = s.dimension;
    m.shift_ = std::move(s);
    return m;
  }
  /// maps[k+1] is applied after maps[k].
  static SmoothMap chain(std::vector<SmoothMap> maps) {
    if (maps.empty()) throw ConfigError("SmoothMap::chain: empty chain");
    if (maps.size() == 1) return maps[0];
    SmoothMap m;
    m.kind_ = Kind::Chain;
    m.dimension_ = maps[0].dimension();
    for (const SmoothMap& link : maps)
      if (link.dimension() != m.dimension_)
        throw ConfigError("SmoothMap::chain: dimension mismatch");
    m.chain_ = std::move(maps);
    return m;
  }

  Kind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  const OrthogonalMap& as_orthogonal() const { return orthogonal_; }
  const ShiftMap& as_shift() const { return shift_; }
  const std::vector<SmoothMap>& as_chain() const { return chain_; }

  bool is_identity() const {
    switch (kind_) {
      case Kind::Identity: return true;
      case Kind::Shift: return shift_.is_identity();
      case Kind::Orthogonal:
      case Kind::Chain: return false;
    }
    return false;
  }

  Vec apply(const Vec& x) const {
    switch (kind_) {
      case Kind::Identity: return x;
      case Kind::Orthogonal: return orthogonal_.apply(x);
      case Kind::Shift: return shift_.apply(x);
      case Kind::Chain: {
        Vec y = x;
        for (const SmoothMap& link : chain_) y = link.apply(y);
        return y;
      }
    }
    return x;
  }

  SmoothMap inverse() const {
    switch (kind_) {
      case Kind::Identity:
        return *this;
      case Kind::Orthogonal:
        return orthogonal(OrthogonalMap{orthogonal_.matrix.transposed()});
      case Kind::Shift:
        return shift(ShiftMap{shift_.dimension, shift_.axis, neg(shift_.gamma)});
      case Kind::Chain: {
        std::vector<SmoothMap> rev;
        for (auto it = chain_.rbegin(); it != chain_.rend(); ++it) rev.push_back(it->inverse());
        return chain(std::move(rev));
      }
    }
    return *this;
  }

  /// Coordinate expressions of the map: component i of M(x) as an expression
  /// in x_1..x_n. Substituting them into F yields F o M.
  std::vector<Expression> coordinate_expressions() const {
    std::vector<Expression> coords;
    switch (kind_) {
      case Kind::Identity:
        for (int i = 0; i < dimension_; ++i) coords.push_back(var(i + 1));
        return coords;
      case Kind::Orthogonal: {
        for (int i = 0; i < dimension_; ++i) {
          Expression c = cnum(0.0);
          for (int j = 0; j < dimension_; ++j) {
            const double a = orthogonal_.matrix(i, j);
            if (a != 0.0) c = add(c, mul(cnum(a), var(j + 1)));
          }
          coords.push_back(c);
        }
        return coords;
      }
      case Kind::Shift: {
        for (int i = 0; i < dimension_; ++i) {
          if (i == shift_.axis)
            coords.push_back(add(var(i + 1), shift_.gamma));
          else
            coords.push_back(var(i + 1));
        }
        return coords;
      }
      case Kind::Chain: {
        // coords of (g o f) are g's coords with f's coords substituted in.
        coords = chain_.front().coordinate_expressions();
        for (std::size_t k = 1; k < chain_.size(); ++k) {
          const std::vector<Expression> outer = chain_[k].coordinate_expressions();
          std::vector<Expression> composed;
          for (const Expression& c : outer) composed.push_back(c.substitute(coords));
          coords = std::move(composed);
        }
        return coords;
      }
    }
    return coords;
  }

 private:
  Kind kind_ = Kind::Identity;
  int dimension_ = 0;
  OrthogonalMap orthogonal_;
  ShiftMap shift_;
  std::vector<SmoothMap> chain_;
};

inline Vec apply_map(const SmoothMap& m, const Vec& x) { return m.apply(x); }

/// F o M as an expression tree.
inline Expression pullback_expression(const Expression& f, const SmoothMap& m) {
  return f.substitute(m.coordinate_expressions());
}

/// Flattening of an axis-aligned descriptor: the shift moving the surface to
/// zero, plus the flattened descriptor (surface 0, bounds phi - Gamma and
/// psi - Gamma over the same base samples).
struct Flattening {
  ShiftMap shift;                 // maps the flattened set onto the original
  NormalSetDescriptor flattened;  // zero surface
};

inline Flattening flattening_map(const NormalSetDescriptor& d) {
  int axis = -1;
  for (int j = 0; j < d.dimension; ++j) {
    if (std::abs(d.direction[j] - 1.0) <= 1e-12) {
      axis = j;
      break;
    }
    if (std::abs(d.direction[j]) > 1e-12) break;
  }
  if (axis < 0)
    throw ConfigError("flattening_map: descriptor direction is not a coordinate axis");

  const ShiftMap shift = make_shift_map(d.dimension, axis, d.surface);
  NormalSetDescriptor flat = make_descriptor(
      d.direction, d.base_samples, d.phi.shifted_by(shift.gamma, d.base_samples),
      d.psi.shifted_by(shift.gamma, d.base_samples), cnum(0.0));
  return {shift, std::move(flat)};
}

/// Jets of F o M at every cloud point.
inline std::vector<Jet> restrict_composition(const Expression& f, const SmoothMap& m,
                                             const SampleCloud& cloud, int order) {
  const Expression composed = pullback_expression(f, m);
  std::vector<Jet> jets;
  jets.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    try {
      jets.push_back(composed.jet(cloud.points[i], order));
    } catch (const EvaluationError& e) {
      throw EvaluationError(std::string(e.what()) + " (cloud point " + std::to_string(i) + ")",
                            e.subtree);
    }
  }
  return jets;
}

}  // namespace rinverse
