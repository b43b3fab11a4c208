#include <catch2/catch_amalgamated.hpp>

#include "rinverse/transforms.hpp"

#include "oracles.hpp"

using namespace rinverse;

TEST_CASE("orthogonal map construction") {
  SECTION("e1 gives the identity") {
    const OrthogonalMap a = orthogonal_map_to({1.0, 0.0, 0.0});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(a.matrix(i, j) == (i == j ? 1.0 : 0.0));
  }

  SECTION("e2 in the plane swaps the axes up to sign") {
    const OrthogonalMap a = orthogonal_map_to({0.0, 1.0});
    CHECK(a.matrix(0, 0) == Catch::Approx(0.0).margin(1e-15));
    CHECK(a.matrix(1, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(std::abs(a.matrix(0, 1)) == Catch::Approx(1.0).margin(1e-15));
    CHECK(a.defect() < 1e-12);
  }

  SECTION("diagonal direction") {
    const double c = 1.0 / std::sqrt(2.0);
    const OrthogonalMap a = orthogonal_map_to({c, c});
    const Vec image = a.apply({1.0, 0.0});
    CHECK(norm(axpy(-1.0, Vec{c, c}, image)) < 1e-12);
    CHECK(a.defect() < 1e-12);
  }

  SECTION("100 random unit directions across dimensions") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + trial % 4;
      const Vec v = oracles::random_unit(rng, n);
      const OrthogonalMap a = orthogonal_map_to(v);
      CHECK(a.defect() <= 1e-12);
      Vec e1(n, 0.0);
      e1[0] = 1.0;
      CHECK(norm(axpy(-1.0, v, a.apply(e1))) <= 1e-12);
    }
  }

  SECTION("non-unit input is rejected") {
    CHECK_THROWS_AS(orthogonal_map_to({1.0, 1.0}), NumericError);
  }
}

TEST_CASE("flattening an axis-aligned descriptor") {
  SECTION("zero surface flattens to the identity shift") {
    const Flattening flat = flattening_map(fixtures::k1_e2());
    CHECK(flat.shift.is_identity());
    CHECK(flat.flattened.zero_surface());
  }

  SECTION("parabolic surface on axis 1") {
    std::vector<Vec> base{{0.0, -0.5}, {0.0, 0.0}, {0.0, 0.5}};
    const Expression gamma = pow_int(var(2), 2);
    const NormalSetDescriptor d =
        make_descriptor({1.0, 0.0}, base, BoundSpec(cnum(-1.0)), BoundSpec(cnum(1.0)), gamma);
    const Flattening flat = flattening_map(d);
    const SmoothMap phi = SmoothMap::shift(flat.shift);
    for (double x2 : {-0.4, 0.1, 0.7}) {
      const Vec x{0.3, x2};
      const Vec y = phi.apply(x);
      CHECK(y[0] == Catch::Approx(0.3 + x2 * x2).margin(1e-15));
      CHECK(y[1] == x2);
      const Vec back = phi.inverse().apply(y);
      CHECK(norm(axpy(-1.0, x, back)) < 1e-15);
    }
  }

  SECTION("the sqrt(2)-power band flattens to bounds 0 and rexp") {
    const NormalSetDescriptor d = fixtures::k2();
    const Flattening flat = flattening_map(d);
    CHECK(flat.flattened.zero_surface());
    for (std::size_t i = 0; i < flat.flattened.base_samples.size(); ++i) {
      CHECK(flat.flattened.phi_at(i) == Catch::Approx(0.0).margin(1e-14));
      const double x1 = flat.flattened.base_samples[i][0];
      CHECK(flat.flattened.psi_at(i) ==
            Catch::Approx(std::exp(-1.0 / x1)).margin(1e-14));
    }
    // the shift moves flattened samples onto the original set
    const SampleCloud flat_cloud = sample_set(flat.flattened, 3);
    const SmoothMap phi = SmoothMap::shift(flat.shift);
    for (const Vec& z : flat_cloud.points) CHECK(point_in_set(d, phi.apply(z), 1e-9));
  }

  SECTION("non-axis directions are rejected") {
    CHECK_THROWS_AS(flattening_map(fixtures::rotated_box()), ConfigError);
  }
}

TEST_CASE("map application and expression pullback") {
  SECTION("identity leaves expressions alone") {
    const Expression f = Expression::parse("(mul (var 1) (sin (var 2)))");
    CHECK(pullback_expression(f, SmoothMap::identity(2)).to_string() == f.to_string());
  }

  SECTION("shift pullback of a coordinate") {
    const SmoothMap m = SmoothMap::shift(make_shift_map(2, 0, pow_int(var(2), 2)));
    const Expression pulled = pullback_expression(var(1), m);
    std::mt19937 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      const Vec p = oracles::random_point(rng);
      CHECK(std::abs(pulled.eval(p) - Complex(p[0] + p[1] * p[1], 0.0)) < 1e-15);
    }
  }

  SECTION("jets of pullbacks match finite differences") {
    std::mt19937 rng(11);
    const std::vector<Expression> corpus = oracles::smooth_corpus();
    for (int trial = 0; trial < 5; ++trial) {
      const Expression& f = corpus[trial % corpus.size()];
      const SmoothMap m =
          (trial % 2 == 0)
              ? SmoothMap::orthogonal(orthogonal_map_to(oracles::random_unit(rng, 2)))
              : SmoothMap::shift(make_shift_map(2, trial % 2, mul(cnum(0.3), sin(var(2 - trial % 2)))));
      const Expression pulled = pullback_expression(f, m);
      const Vec p = oracles::random_point(rng, -0.5, 0.5);
      const Jet j = pulled.jet(p, 2);
      for (std::size_t pos = 0; pos < j.size(); ++pos) {
        const MultiIndex& a = j.layout().index(pos);
        const Complex fd = oracles::finite_difference(pulled, p, a);
        const double scale = std::max(1.0, std::abs(fd));
        CHECK(std::abs(j.derivative_value(a) - fd) / scale < 1e-5);
      }
    }
  }

  SECTION("round trip through the inverse map") {
    std::mt19937 rng(13);
    const SmoothMap a = SmoothMap::orthogonal(orthogonal_map_to(oracles::random_unit(rng, 2)));
    const SmoothMap s = SmoothMap::shift(make_shift_map(2, 0, mul(cnum(0.4), cos(var(2)))));
    const SmoothMap chain = SmoothMap::chain({a, s});
    const Expression f = Expression::parse("(mul (exp (var 1)) (sin (var 2)))");
    const Expression round =
        pullback_expression(pullback_expression(f, chain), chain.inverse());
    for (int gx = 0; gx < 5; ++gx)
      for (int gy = 0; gy < 5; ++gy) {
        const Vec p{-1.0 + 0.5 * gx, -1.0 + 0.5 * gy};
        CHECK(std::abs(round.eval(p) - f.eval(p)) < 1e-12);
        CHECK(norm(axpy(-1.0, p, chain.inverse().apply(chain.apply(p)))) < 1e-12);
      }
  }
}

TEST_CASE("restriction of compositions to clouds") {
  const NormalSetDescriptor d = fixtures::k1_e2();
  const SampleCloud cloud = sample_set(d, 3);

  SECTION("constants restrict to constant jets") {
    const std::vector<Jet> jets =
        restrict_composition(cnum(Complex(2.0, -1.0)), SmoothMap::identity(2), cloud, 2);
    for (const Jet& j : jets) {
      CHECK(j.value() == Complex(2.0, -1.0));
      for (std::size_t pos = 1; pos < j.size(); ++pos) CHECK(j[pos] == Complex(0.0, 0.0));
    }
  }

  SECTION("a coordinate through an orthogonal map has the matrix row as gradient") {
    const OrthogonalMap a = orthogonal_map_to({0.0, 1.0});
    const std::vector<Jet> jets =
        restrict_composition(var(1), SmoothMap::orthogonal(a), cloud, 1);
    for (std::size_t i = 0; i < jets.size(); ++i) {
      CHECK(std::abs(jets[i].coeff(MultiIndex({1, 0})) - Complex(a.matrix(0, 0), 0.0)) < 1e-14);
      CHECK(std::abs(jets[i].coeff(MultiIndex({0, 1})) - Complex(a.matrix(0, 1), 0.0)) < 1e-14);
    }
  }

  SECTION("flat inputs stay flat under composition") {
    // vanishes identically on a neighborhood of the image of the cloud
    const Expression flat = smoothstep(sub(var(1), cnum(5.0)), 4);
    const SmoothMap m = SmoothMap::shift(make_shift_map(2, 0, mul(cnum(0.2), sin(var(2)))));
    const std::vector<Jet> jets = restrict_composition(flat, m, cloud, 3);
    for (const Jet& j : jets)
      for (std::size_t pos = 0; pos < j.size(); ++pos) CHECK(j[pos] == Complex(0.0, 0.0));
  }
}

TEST_CASE("commutation of directional operators with compositions") {
  const std::vector<Expression> corpus = oracles::smooth_corpus();
  const Complex lambda(0.7, -0.4);

  SECTION("axis shifts") {
    const SmoothMap psi = SmoothMap::shift(make_shift_map(2, 0, mul(cnum(0.5), sin(var(2)))));
    for (const Expression& f : corpus) {
      const Expression composed = pullback_expression(f, psi);
      const Expression rhs = pullback_expression(sub(f.derivative(0), mul(cnum(lambda), f)), psi);
      for (int gx = 0; gx < 4; ++gx)
        for (int gy = 0; gy < 4; ++gy) {
          const Vec p{-0.6 + 0.4 * gx, -0.6 + 0.4 * gy};
          const Jet g = composed.jet(p, 3);
          const Jet lhs = jet_sub(jet_derivative(g, 0), jet_scale(jet_truncate(g, 2), lambda));
          CHECK(jet_max_diff(lhs, rhs.jet(p, 2)) < 1e-12);
        }
    }
  }

  SECTION("orthogonal maps") {
    std::mt19937 rng(17);
    const Vec v = oracles::random_unit(rng, 2);
    const SmoothMap inv = SmoothMap::orthogonal(orthogonal_map_to(v)).inverse();
    for (const Expression& f : corpus) {
      const Expression composed = pullback_expression(f, inv);
      const Expression rhs = pullback_expression(sub(f.derivative(0), mul(cnum(lambda), f)), inv);
      for (int gx = 0; gx < 4; ++gx)
        for (int gy = 0; gy < 4; ++gy) {
          const Vec p{-0.6 + 0.4 * gx, -0.6 + 0.4 * gy};
          const Jet g = composed.jet(p, 3);
          const Jet lhs = jet_sub(jet_directional(g, v), jet_scale(jet_truncate(g, 2), lambda));
          CHECK(jet_max_diff(lhs, rhs.jet(p, 2)) < 1e-12);
        }
    }
  }
}

TEST_CASE("smooth map serialization shapes") {
  const SmoothMap s = SmoothMap::shift(make_shift_map(2, 1, sin(var(1))));
  CHECK(s.as_shift().axis == 1);
  CHECK(s.kind() == SmoothMap::Kind::Shift);
  const SmoothMap chain = SmoothMap::chain({s, s.inverse()});
  std::mt19937 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec p = oracles::random_point(rng);
    CHECK(norm(axpy(-1.0, p, chain.apply(p))) < 1e-15);
  }
  // coordinate expressions agree with direct application
  const std::vector<Expression> coords = chain.coordinate_expressions();
  for (int trial = 0; trial < 5; ++trial) {
    const Vec p = oracles::random_point(rng);
    for (int i = 0; i < 2; ++i)
      CHECK(std::abs(coords[i].eval(p) - Complex(chain.apply(p)[i], 0.0)) < 1e-14);
  }
}
