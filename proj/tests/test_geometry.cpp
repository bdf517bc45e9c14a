#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/LU>
#include <doctest.h>

#include "nlbvp/geometry.hpp"

using namespace nlbvp;

namespace {

// Dense sampling of the boundary polygon.
double sampled_boundary_distance(const DomainSpec& d, const Point& p) {
  double best = 1e300;
  const auto& poly = d.polygon();
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& a = poly[k];
    const Point& b = poly[(k + 1) % poly.size()];
    for (int i = 0; i <= 200; ++i) best = std::min(best, (p - (a + (b - a) * (i / 200.0))).norm());
  }
  return best;
}

double angle_of(const Point& v) { return std::atan2(v.y(), v.x()); }

}  // namespace

TEST_CASE("canonical domain corners and rays") {
  const double w0 = kPi / 3.0;
  for (DomainShape shape : {DomainShape::PolylineKite, DomainShape::LensSpline}) {
    const DomainSpec d = build_canonical_domain(w0, 1.0, shape);
    CHECK(d.corners().g1 == Point(0.0, 0.0));
    CHECK(d.corners().g2 == Point(1.0, 0.0));
    CHECK(d.corners().eps == doctest::Approx(0.15));
    // Gamma1 is the upper curve and leaves g1 at angle +omega0.
    const Point a = d.gamma1().at(0.01);
    CHECK(a.y() > 0.0);
    const Point near1 = d.gamma1().polyline()[1];
    if ((near1 - d.corners().g1).norm() < d.corners().eps)
      CHECK(angle_of(near1) == doctest::Approx(w0).epsilon(1e-12));
    const Point b = d.gamma2().at(0.5);
    CHECK(b.y() < 0.0);
    // Points on the corner rays at distance eps/2.
    const double r = d.corners().eps / 2;
    const Point up(r * std::cos(w0), r * std::sin(w0));
    CHECK(d.distance_to_boundary(up) < 1e-12);
    const Point up2 = Point(1.0, 0.0) + Point(-r * std::cos(w0), r * std::sin(w0));
    CHECK(d.distance_to_boundary(up2) < 1e-12);
  }
}

TEST_CASE("canonical domain rejects bad angles") {
  CHECK_THROWS_AS(build_canonical_domain(3.2, 1.0, DomainShape::PolylineKite), Error);
  CHECK_THROWS_AS(build_canonical_domain(0.0, 1.0, DomainShape::PolylineKite), Error);
  CHECK_THROWS_AS(build_canonical_domain(1.0, -1.0, DomainShape::PolylineKite), Error);
  CHECK_NOTHROW(build_canonical_domain(kPi / 2 - 0.2, 1.0, DomainShape::PolylineKite));
}

TEST_CASE("rho") {
  const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  CHECK(rho(d, d.corners().g1) == 0.0);
  CHECK(rho(d, Point(0.5, 0.0)) == doctest::Approx(0.5));
  CHECK(rho(d, Point(0.25, 0.0)) == doctest::Approx(0.25));
  CHECK(rho(d, Point(0.9, 0.1)) == doctest::Approx(std::hypot(0.1, 0.1)));
}

TEST_CASE("winding test agrees with the ray test") {
  std::mt19937_64 rng(7);
  for (DomainShape shape : {DomainShape::PolylineKite, DomainShape::LensSpline}) {
    const DomainSpec d = build_canonical_domain(1.1, 1.0, shape);
    std::uniform_real_distribution<double> ux(-0.2, 1.2), uy(-0.8, 0.8);
    int inside = 0;
    for (int i = 0; i < 1000; ++i) {
      const Point p(ux(rng), uy(rng));
      const bool w = d.contains(p);
      CHECK(w == d.contains_by_ray(p));
      inside += w;
    }
    CHECK(inside > 100);
  }
}

TEST_CASE("corner rotation map is an exact rotation within eps") {
  for (double w0 : {0.6, kPi / 3, 2.0}) {
    const DomainSpec d = build_canonical_domain(w0, 1.0, DomainShape::PolylineKite);
    for (CurveId src : {CurveId::Gamma1, CurveId::Gamma2}) {
      const DiffeoMap map = build_corner_rotation_map(d, src);
      CHECK(map.kind() == MapKind::CornerRotationBlend);
      CHECK(map(d.corners().g1) == d.corners().g1);
      CHECK(map(d.corners().g2) == d.corners().g2);
      const double eps = d.corners().eps;
      const double side = src == CurveId::Gamma1 ? 1.0 : -1.0;
      for (int j = 0; j < 2; ++j) {
        const Point g = d.corners().corner(j);
        const double dir = j == 0 ? 1.0 : -1.0;  // bisector is +-x
        for (int k = 1; k <= 50; ++k) {
          const double r = eps * k / 50.0 * 0.999;
          const Point y = g + r * Point(dir * std::cos(w0), side * std::sin(w0));
          // Rotation by -side*dir*w0 about g.
          const double a = -side * dir * w0;
          const Point rel = y - g;
          const Point rot = g + Point(std::cos(a) * rel.x() - std::sin(a) * rel.y(),
                                      std::sin(a) * rel.x() + std::cos(a) * rel.y());
          const Point img = map(y);
          CHECK((img - rot).norm() <= 1e-15);
          CHECK(std::abs(img.y()) <= 1e-15);
          CHECK((img - g).norm() == doctest::Approx(r).epsilon(1e-14));
        }
      }
    }
  }
}

TEST_CASE("corner rotation: polar example and containment") {
  const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  const DiffeoMap map = build_corner_rotation_map(d, CurveId::Gamma1);
  const double eps = d.corners().eps;
  const Point y = d.from_polar(0, -kPi / 3, eps / 2);
  const LocalPolar p = d.polar(0, map(y));
  CHECK(std::abs(p.omega) < 1e-14);
  CHECK(p.r == doctest::Approx(eps / 2));

  const Point mid = d.gamma1().at(0.5);
  const Point img = map(mid);
  CHECK(d.contains(img));
  CHECK(sampled_boundary_distance(d, img) > 1e-3);

  for (int k = 0; k <= 400; ++k) {
    const Point q = map(d.gamma1().at(k / 400.0));
    CHECK(d.contains(q, 1e-12));
  }
}

TEST_CASE("Jacobian determinants are bounded away from zero") {
  const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::LensSpline);
  std::vector<DiffeoMap> maps{build_corner_rotation_map(d, CurveId::Gamma1),
                              build_corner_rotation_map(d, CurveId::Gamma2),
                              build_interior_contraction_map(d, 0.5)};
  for (const auto& map : maps) {
    for (const auto* curve : {&d.gamma1(), &d.gamma2()}) {
      for (int k = 0; k <= 500; ++k) {
        const Point y = curve->at(k / 500.0);
        const Eigen::Matrix2d J = map.jacobian(y);
        CHECK(std::abs(J.determinant()) >= 1e-6);
        // Central differences.
        const double e = 1e-6;
        for (int c = 0; c < 2; ++c) {
          Point dy = Point::Zero();
          dy(c) = e;
          const Point fd = (map(y + dy) - map(y - dy)) / (2 * e);
          CHECK((fd - J.col(c)).norm() <= 1e-5);
        }
      }
    }
  }
}

TEST_CASE("interior contraction") {
  const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  const DiffeoMap map = build_interior_contraction_map(d, 0.5);
  CHECK(map.kind() == MapKind::InteriorContraction);
  CHECK(map.ratio() == 0.5);
  CHECK(map.margin() > 0.0);
  CHECK((map(d.star_center()) - d.star_center()).norm() == 0.0);
  const Point img = map(d.gamma1().at(0.5));
  CHECK(sampled_boundary_distance(d, img) >= map.margin() - 1e-12);
  CHECK(d.contains(img));
  for (int k = 0; k <= 200; ++k)
    CHECK(sampled_boundary_distance(d, map(d.gamma1().at(k / 200.0))) >= map.margin() - 1e-3);

  CHECK_THROWS_AS(build_interior_contraction_map(d, 0.999), Error);
  CHECK_THROWS_AS(build_interior_contraction_map(d, 0.0), Error);
  CHECK_THROWS_AS(build_interior_contraction_map(d, 1.0), Error);
}

TEST_CASE("cutoff invariants") {
  const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  const double plateau = 0.15, delta = 0.3;
  const CutoffXi xi = build_cutoff(d.corners(), delta, plateau);
  CHECK(xi(d.corners().g1) == 1.0);
  CHECK(xi(d.corners().g2) == 1.0);
  CHECK(rho(d, d.centroid()) > delta);
  CHECK(xi(d.centroid()) == 0.0);
  CHECK(xi.smoothness_order() >= 2);

  const double mid = xi.profile(0.5 * (plateau + delta));
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);

  double prev = 1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double r = 0.5 * i / 10000.0;
    const double v = xi.profile(r);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v <= prev);
    if (r <= plateau) CHECK(v == 1.0);
    if (r >= delta) CHECK(v == 0.0);
    prev = v;
  }

  // Bounded second differences across the transition and its endpoints.
  const double step = 1e-4;
  double max_second = 0.0;
  for (int i = 1; i < 5000; ++i) {
    const double r = 0.1 + 0.25 * i / 5000.0;
    const double s = (xi.profile(r + step) - 2 * xi.profile(r) + xi.profile(r - step)) / (step * step);
    max_second = std::max(max_second, std::abs(s));
  }
  // The quintic profile has |f''| <= 10/sqrt(3) / (delta - plateau)^2.
  CHECK(max_second <= 10.0 / std::sqrt(3.0) / ((delta - plateau) * (delta - plateau)) * 1.01);

  CHECK_THROWS_AS(build_cutoff(d.corners(), 0.2, 0.2), Error);
  CHECK_THROWS_AS(build_cutoff(d.corners(), 0.6, 0.2), Error);
  CHECK_THROWS_AS(build_cutoff(d.corners(), 0.3, 0.1), Error);
}

TEST_CASE("smoothstep") {
  CHECK(smoothstep5(-1.0) == 0.0);
  CHECK(smoothstep5(0.5) == doctest::Approx(0.5));
  CHECK(smoothstep5(2.0) == 1.0);
  for (int i = 1; i < 100; ++i) {
    const double x = i / 100.0, e = 1e-6;
    CHECK(smoothstep5_derivative(x) ==
          doctest::Approx((smoothstep5(x + e) - smoothstep5(x - e)) / (2 * e)).epsilon(1e-6));
  }
}

TEST_CASE("corner config validation") {
  CornerConfig c;
  CHECK_NOTHROW(c.validate());
  c.eps = 0.6;
  CHECK_THROWS_AS(c.validate(), Error);
  c.eps = 0.1;
  c.omega0 = 3.5;
  CHECK_THROWS_AS(c.validate(), Error);
}
