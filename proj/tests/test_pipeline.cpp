#include <catch2/catch_amalgamated.hpp>

#include "rinverse/pipeline.hpp"

#include "oracles.hpp"

using namespace rinverse;

namespace {
const QuadratureConfig kQuad;

OperatorProduct single(const Vec& v, Complex lambda) {
  OperatorProduct op;
  op.factors.push_back({v, {-lambda, Complex(1.0, 0.0)}});
  return op;
}
}  // namespace

TEST_CASE("stage construction and provenance") {
  SECTION("axis-2 fibers with zero surface: rotation active, shift skipped") {
    const RightInverseOperator s = build_right_inverse(
        fixtures::k1_e2(), make_directional_operator({0.0, 1.0}, Complex(0.0, 0.0)), kQuad);
    const std::vector<StageProvenance> p = s.provenance();
    REQUIRE(p.size() == 1);
    CHECK_FALSE(p[0].rotation_skipped);
    CHECK(p[0].shift_skipped);
    CHECK(p[0].integration_axis == 1);
    CHECK(s.stage.flattened.zero_surface());
    // the rotation is the axis swap
    const Mat& a = s.stage.rotation.as_orthogonal().matrix;
    CHECK(a(1, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(a(0, 0) == Catch::Approx(0.0).margin(1e-15));
  }

  SECTION("graph set: nontrivial flattening shift") {
    const RightInverseOperator s = build_right_inverse(
        fixtures::graph(), make_directional_operator({0.0, 1.0}, Complex(1.0, 0.0)), kQuad);
    CHECK_FALSE(s.provenance()[0].rotation_skipped);
    CHECK_FALSE(s.provenance()[0].shift_skipped);
  }

  SECTION("first-axis fibers skip the rotation") {
    const RightInverseOperator s = build_right_inverse(
        fixtures::k1_e1(), make_directional_operator({1.0, 0.0}, Complex(0.0, 0.0)), kQuad);
    CHECK(s.provenance()[0].rotation_skipped);
    CHECK_FALSE(s.provenance()[0].shift_skipped);  // surface is the constant 1
  }

  SECTION("rotated box: all three stages active") {
    const double c = 1.0 / std::sqrt(2.0);
    const RightInverseOperator s = build_right_inverse(
        fixtures::rotated_box(), make_directional_operator({c, c}, Complex(1.0, 0.0)), kQuad);
    CHECK_FALSE(s.provenance()[0].rotation_skipped);
    CHECK_FALSE(s.provenance()[0].shift_skipped);
    CHECK(s.stage.flattened.zero_surface());
    // flattened bounds stay centered around zero
    for (std::size_t i = 0; i < s.stage.flattened.base_samples.size(); ++i) {
      CHECK(s.stage.flattened.phi_at(i) <= 1e-12);
      CHECK(s.stage.flattened.psi_at(i) >= -1e-12);
    }
  }

  SECTION("direction mismatch is rejected") {
    CHECK_THROWS_AS(build_right_inverse(fixtures::k1_e2(),
                                        make_directional_operator({1.0, 0.0}, Complex(0.0, 0.0)),
                                        kQuad),
                    ConfigError);
  }
}

TEST_CASE("applying the right inverse") {
  const NormalSetDescriptor d = fixtures::k1_e2();

  SECTION("unit input integrates to the fiber coordinate when lambda is zero") {
    const RightInverseOperator s =
        build_right_inverse(d, make_directional_operator({0.0, 1.0}, Complex(0.0, 0.0)), kQuad);
    for (double t : {0.0, 0.05, 0.12}) {
      const Vec x{0.5, t};
      const Jet j = apply_right_inverse(s, cnum(1.0), x, 0);
      CHECK(std::abs(j.value() - Complex(t, 0.0)) < 1e-12);
    }
  }

  SECTION("unit input at lambda 1 gives e^t - 1") {
    const RightInverseOperator s =
        build_right_inverse(d, make_directional_operator({0.0, 1.0}, Complex(1.0, 0.0)), kQuad);
    for (double t : {0.02, 0.1, 0.13}) {
      const Vec x{0.6, t};
      const Jet j = apply_right_inverse(s, cnum(1.0), x, 0);
      CHECK(std::abs(j.value() - Complex(std::exp(t) - 1.0, 0.0)) < 1e-11);
    }
  }

  SECTION("points outside the set are rejected") {
    const RightInverseOperator s =
        build_right_inverse(d, make_directional_operator({0.0, 1.0}, Complex(0.0, 0.0)), kQuad);
    CHECK_THROWS_AS(apply_right_inverse(s, cnum(1.0), Vec{2.0, 2.0}, 0), OutsideSetError);
  }

  SECTION("the output does not depend on the extension") {
    const RightInverseOperator s =
        build_right_inverse(d, make_directional_operator({0.0, 1.0}, Complex(1.0, 0.0)), kQuad);
    const Expression f = mul(exp(var(1)), sin(var(2)));
    const Expression extended = add(f, cutoff_flat(d, 0.05, 4).expr);
    const SampleCloud cloud = sample_set(d, 3);
    for (std::size_t i = 0; i < cloud.size(); i += 7) {
      const Jet a = apply_right_inverse(s, f, cloud.points[i], 3);
      const Jet b = apply_right_inverse(s, extended, cloud.points[i], 3);
      CHECK(jet_max_diff(a, b) < 1e-9);
    }
  }

  SECTION("linearity in the input") {
    const RightInverseOperator s =
        build_right_inverse(d, make_directional_operator({0.0, 1.0}, Complex(0.5, 0.5)), kQuad);
    const Expression f = mul(var(1), var(2));
    const Expression g = sin(add(var(1), var(2)));
    const Complex a(2.0, 0.0), b(0.0, -1.5);
    const Expression combo = add(mul(cnum(a), f), mul(cnum(b), g));
    for (double x1 : {0.3, 0.9}) {
      const Vec x{x1, std::exp(-1.0 / x1) / 2};
      const Complex lhs = apply_right_inverse(s, combo, x, 0).value();
      const Complex rhs = a * apply_right_inverse(s, f, x, 0).value() +
                          b * apply_right_inverse(s, g, x, 0).value();
      CHECK(std::abs(lhs - rhs) < 1e-10);
    }
  }
}

TEST_CASE("operator application") {
  SECTION("first derivative of a square") {
    const Jet j = apply_operator(make_directional_operator({1.0, 0.0}, Complex(0.0, 0.0)),
                                 pow_int(var(1), 2), Vec{1.3, 0.0}, 0);
    CHECK(std::abs(j.value() - Complex(2.6, 0.0)) < 1e-14);
  }

  SECTION("second axis-2 derivative of a cube") {
    OperatorProduct op;
    op.factors.push_back({{0.0, 1.0}, {Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(1.0, 0.0)}});
    const Jet j = apply_operator(op, pow_int(var(2), 3), Vec{0.0, 2.0}, 2);
    CHECK(std::abs(j.value() - Complex(12.0, 0.0)) < 1e-13);
  }

  SECTION("insufficient jet order is rejected") {
    OperatorProduct op;
    op.factors.push_back({{0.0, 1.0}, {Complex(0.0, 0.0), Complex(0.0, 0.0), Complex(1.0, 0.0)}});
    CHECK_THROWS_AS(apply_operator(op, cnum(1.0), Vec{0.0, 0.0}, 1), InsufficientOrderError);
  }

  SECTION("the defining residual: (D_v - lambda) after S is the identity") {
    const NormalSetDescriptor d = fixtures::k1_e2();
    const DirectionalOperator op = make_directional_operator({0.0, 1.0}, Complex(2.0, 1.0));
    const RightInverseOperator s = build_right_inverse(d, op, kQuad);
    const Expression f = mul(exp(var(1)), sin(var(2)));
    const SmoothFunction sf = right_inverse_function(s, SmoothFunction::symbolic(f));
    const SampleCloud cloud = sample_set(d, 3);
    for (std::size_t i = 0; i < cloud.size(); i += 5) {
      const Complex lhs = apply_operator(op, sf, cloud.points[i], 0).value();
      CHECK(std::abs(lhs - f.eval(cloud.points[i])) < 1e-8);
    }
  }
}

TEST_CASE("polynomial factorization") {
  SECTION("quadratics with real and imaginary roots") {
    const std::vector<Complex> real_pair =
        factor_polynomial({Complex(-1.0, 0.0), Complex(0.0, 0.0), Complex(1.0, 0.0)});
    REQUIRE(real_pair.size() == 2);
    CHECK(std::abs(real_pair[0] - Complex(-1.0, 0.0)) < 1e-12);
    CHECK(std::abs(real_pair[1] - Complex(1.0, 0.0)) < 1e-12);

    const std::vector<Complex> imag_pair =
        factor_polynomial({Complex(1.0, 0.0), Complex(0.0, 0.0), Complex(1.0, 0.0)});
    REQUIRE(imag_pair.size() == 2);
    CHECK(std::abs(imag_pair[0] - Complex(0.0, -1.0)) < 1e-12);
    CHECK(std::abs(imag_pair[1] - Complex(0.0, 1.0)) < 1e-12);
  }

  SECTION("planted cubic roots re-expand within 1e-8") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<Complex> roots;
      for (int i = 0; i < 3; ++i) roots.emplace_back(dist(rng), dist(rng));
      const Complex leading(dist(rng) + 3.0, dist(rng));
      const std::vector<Complex> coeffs = expand_from_roots(roots, leading);
      const std::vector<Complex> found = factor_polynomial(coeffs);
      const std::vector<Complex> expanded = expand_from_roots(found, leading);
      double scale = 0.0, err = 0.0;
      for (std::size_t i = 0; i < coeffs.size(); ++i) {
        scale = std::max(scale, std::abs(coeffs[i]));
        err = std::max(err, std::abs(expanded[i] - coeffs[i]));
      }
      CHECK(err <= 1e-8 * scale);
    }
  }

  SECTION("repeated roots still re-expand cleanly") {
    const std::vector<Complex> coeffs = expand_from_roots(
        {Complex(0.5, 0.0), Complex(0.5, 0.0), Complex(-1.0, 0.0)}, Complex(1.0, 0.0));
    const std::vector<Complex> found = factor_polynomial(coeffs);
    const std::vector<Complex> expanded = expand_from_roots(found, Complex(1.0, 0.0));
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      CHECK(std::abs(expanded[i] - coeffs[i]) < 1e-8);
  }

  SECTION("degenerate inputs are rejected") {
    CHECK_THROWS_AS(factor_polynomial({Complex(1.0, 0.0)}), ConfigError);
    CHECK_THROWS_AS(factor_polynomial({Complex(1.0, 0.0), Complex(0.0, 0.0)}), ConfigError);
  }
}

TEST_CASE("product pipelines") {
  const NormalSetDescriptor k1e2 = fixtures::k1_e2();

  SECTION("a single linear factor reproduces the plain construction") {
    const OperatorProduct op = single({0.0, 1.0}, Complex(0.7, -0.2));
    const ComposedRightInverse composed = build_product_inverse({k1e2}, op, kQuad);
    const RightInverseOperator plain = build_right_inverse(
        k1e2, make_directional_operator({0.0, 1.0}, Complex(0.7, -0.2)), kQuad);
    REQUIRE(composed.stages.size() == 1);
    CHECK(composed.provenance() == plain.provenance());
  }

  SECTION("one quadratic factor equals its two linear factors, stage for stage") {
    OperatorProduct quadratic;  // (t - 1)(t - 2) = 2 - 3t + t^2
    quadratic.factors.push_back(
        {{0.0, 1.0}, {Complex(2.0, 0.0), Complex(-3.0, 0.0), Complex(1.0, 0.0)}});
    OperatorProduct split;
    split.factors.push_back({{0.0, 1.0}, {Complex(-1.0, 0.0), Complex(1.0, 0.0)}});
    split.factors.push_back({{0.0, 1.0}, {Complex(-2.0, 0.0), Complex(1.0, 0.0)}});
    const ComposedRightInverse a = build_product_inverse({k1e2}, quadratic, kQuad);
    const ComposedRightInverse b = build_product_inverse({k1e2}, split, kQuad);
    CHECK(a.provenance() == b.provenance());
  }

  SECTION("quadratic factor in one direction: residual vanishes") {
    OperatorProduct op;
    op.factors.push_back(
        {{0.0, 1.0}, {Complex(2.0, 0.0), Complex(-3.0, 0.0), Complex(1.0, 0.0)}});
    const ComposedRightInverse s = build_product_inverse({k1e2}, op, kQuad);
    const Expression f = sin(add(var(1), var(2)));
    const SmoothFunction sf = right_inverse_function(s, SmoothFunction::symbolic(f));
    for (double x1 : {0.4, 0.8}) {
      const Vec x{x1, std::exp(-1.0 / x1) / 3};
      const Complex lhs = apply_operator(op, sf, x, 2).value();
      CHECK(std::abs(lhs - f.eval(x)) < 1e-6);
    }
  }

  SECTION("factor order does not change the residual") {
    OperatorProduct forward, backward;
    forward.factors.push_back({{0.0, 1.0}, {Complex(-1.0, 0.0), Complex(1.0, 0.0)}});
    forward.factors.push_back({{0.0, 1.0}, {Complex(-2.0, 0.0), Complex(1.0, 0.0)}});
    backward.factors.push_back({{0.0, 1.0}, {Complex(-2.0, 0.0), Complex(1.0, 0.0)}});
    backward.factors.push_back({{0.0, 1.0}, {Complex(-1.0, 0.0), Complex(1.0, 0.0)}});
    const Expression f = mul(var(1), var(2));
    const Vec x{0.7, std::exp(-1.0 / 0.7) / 2};
    for (const OperatorProduct& op : {forward, backward}) {
      const ComposedRightInverse s = build_product_inverse({k1e2}, op, kQuad);
      const SmoothFunction sf = right_inverse_function(s, SmoothFunction::symbolic(f));
      const Complex lhs = apply_operator(op, sf, x, 2).value();
      CHECK(std::abs(lhs - f.eval(x)) < 1e-6);
    }
  }

  SECTION("two directions on the doubly fibered set") {
    OperatorProduct op;  // P1(D_{e1}) = t, P2(D_{e2}) = t - i
    op.factors.push_back({{1.0, 0.0}, {Complex(0.0, 0.0), Complex(1.0, 0.0)}});
    op.factors.push_back({{0.0, 1.0}, {Complex(0.0, -1.0), Complex(1.0, 0.0)}});
    const ComposedRightInverse s =
        build_product_inverse({fixtures::k1_e1(), k1e2}, op, kQuad);
    REQUIRE(s.stages.size() == 2);
    const Expression f = mul(var(1), var(2));
    const SmoothFunction sf = right_inverse_function(s, SmoothFunction::symbolic(f));
    // a common refinement point: x1 on the e2 base grid, x2 on the e1 base grid
    const double top = std::exp(-1.0);
    const Vec x{0.5, 3.0 * top / 10.0};
    REQUIRE(point_in_set(k1e2, x, 1e-9));
    const Complex lhs = apply_operator(op, sf, x, 2).value();
    CHECK(std::abs(lhs - f.eval(x)) < 1e-6);
  }

  SECTION("descriptors of different sets are rejected") {
    OperatorProduct op;
    op.factors.push_back({{1.0, 0.0}, {Complex(0.0, 0.0), Complex(1.0, 0.0)}});
    op.factors.push_back({{0.0, 1.0}, {Complex(0.0, 0.0), Complex(1.0, 0.0)}});
    CHECK_THROWS_AS(build_product_inverse({fixtures::band_e1(), k1e2}, op, kQuad),
                    DescriptorError);
  }

  SECTION("missing direction is rejected") {
    OperatorProduct op;
    op.factors.push_back({{1.0, 0.0}, {Complex(0.0, 0.0), Complex(1.0, 0.0)}});
    CHECK_THROWS_AS(build_product_inverse({k1e2}, op, kQuad), ConfigError);
  }
}
