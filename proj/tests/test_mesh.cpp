#include <cmath>
#include <map>
#include <set>

#include <doctest.h>

#include "nlbvp/mesh.hpp"

using namespace nlbvp;

namespace {

const DomainSpec& kite() {
  static const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  return d;
}

const Mesh& coarse() {
  static const Mesh m = generate_graded_mesh(kite(), 0.1, 2.0);
  return m;
}

double shoelace(const std::vector<Point>& poly) {
  double a = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point& p = poly[k];
    const Point& q = poly[(k + 1) % poly.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

double signed_area(const Mesh& m, const std::array<int, 3>& t) {
  const Point a = m.vertices[t[1]] - m.vertices[t[0]];
  const Point b = m.vertices[t[2]] - m.vertices[t[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

}  // namespace

TEST_CASE("mesh is a conforming triangulation of the domain") {
  const Mesh& m = coarse();
  const DomainSpec& d = kite();
  REQUIRE(m.num_vertices() > 50);
  CHECK(m.markers.size() == m.num_vertices());

  double total = 0.0;
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : m.triangles) {
    CHECK(signed_area(m, t) > 0.0);
    total += signed_area(m, t);
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  }
  CHECK(total == doctest::Approx(shoelace(d.polygon())).epsilon(1e-12));

  // Euler characteristic of a disk, every edge shared by at most two triangles.
  const long v = static_cast<long>(m.num_vertices());
  const long e = static_cast<long>(edges.size());
  const long f = static_cast<long>(m.num_triangles());
  CHECK(v - e + f == 1);
  std::set<int> boundary_vertices;
  for (const auto& [key, count] : edges) {
    CHECK(count <= 2);
    if (count == 1) {
      boundary_vertices.insert(key.first);
      boundary_vertices.insert(key.second);
    }
  }
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const bool on_boundary = boundary_vertices.count(static_cast<int>(i)) > 0;
    CHECK(on_boundary == is_boundary(m.markers[i]));
    if (on_boundary) CHECK(d.distance_to_boundary(m.vertices[i]) < 1e-12);
  }
}

TEST_CASE("mesh markers and corners") {
  const Mesh& m = coarse();
  CHECK(m.vertices[0] == kite().corners().g1);
  CHECK(m.vertices[1] == kite().corners().g2);
  CHECK(m.markers[0] == VertexMarker::CornerG1);
  CHECK(m.markers[1] == VertexMarker::CornerG2);
  int corners = 0;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    corners += is_corner(m.markers[i]);
    if (m.markers[i] == VertexMarker::Gamma1) CHECK(m.vertices[i].y() > 0.0);
    if (m.markers[i] == VertexMarker::Gamma2) CHECK(m.vertices[i].y() < 0.0);
  }
  CHECK(corners == 2);
  CHECK(m.angle_sum_at(0) == doctest::Approx(2 * kPi / 3).epsilon(1e-6));
  CHECK(m.angle_sum_at(1) == doctest::Approx(2 * kPi / 3).epsilon(1e-6));
}

TEST_CASE("minimum angle bound") {
  CHECK(coarse().min_angle_deg() >= 20.0);
  const Mesh q = generate_graded_mesh(kite(), 0.1, 1.0);
  CHECK(q.min_angle_deg() >= 20.0);
  const DomainSpec lens = build_canonical_domain(1.2, 1.0, DomainShape::LensSpline);
  CHECK(generate_graded_mesh(lens, 0.1, 2.0).min_angle_deg() >= 20.0);
}

TEST_CASE("grading shrinks the first ring at the corners") {
  const Mesh uniform = generate_graded_mesh(kite(), 0.05, 1.0);
  const Mesh graded = generate_graded_mesh(kite(), 0.05, 2.0);
  for (int j = 0; j < 2; ++j)
    CHECK(graded.first_ring_diameter(j) <= 0.6 * uniform.first_ring_diameter(j));
  CHECK(graded.num_vertices() > uniform.num_vertices());
  CHECK(graded.num_vertices() > 2 * coarse().num_vertices());
}

TEST_CASE("graded size field") {
  CHECK(graded_size(0.1, 1.0, 1.2, 0.3) == doctest::Approx(0.1));
  CHECK(graded_size(0.1, 2.0, 1.0, 0.25) == doctest::Approx(0.1 * 0.5));
  // Floor h^beta / D^(beta - 1).
  CHECK(graded_size(0.1, 2.0, 1.0, 0.0) == doctest::Approx(0.01));
}

TEST_CASE("mesh generation is deterministic") {
  const Mesh again = generate_graded_mesh(kite(), 0.1, 2.0);
  CHECK(again.vertices == coarse().vertices);
  CHECK(again.triangles == coarse().triangles);
  CHECK(again.id() == coarse().id());
}

TEST_CASE("mesh preconditions") {
  CHECK_THROWS_AS(generate_graded_mesh(kite(), 0.2, 2.0), Error);
  CHECK_THROWS_AS(generate_graded_mesh(kite(), 0.1, 0.5), Error);
  CHECK_THROWS_AS(generate_graded_mesh(kite(), -0.1, 2.0), Error);
}

TEST_CASE("point location and interpolation") {
  const Mesh& m = coarse();
  const PointLocator loc(m);
  std::vector<double> lin(m.num_vertices());
  for (std::size_t i = 0; i < m.num_vertices(); ++i)
    lin[i] = 2.0 * m.vertices[i].x() - 3.0 * m.vertices[i].y() + 0.5;
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    const auto l = loc.locate(m.vertices[i]);
    REQUIRE(l.has_value());
    const auto& tri = m.triangles[l->triangle];
    for (int k = 0; k < 3; ++k)
      if (tri[k] == static_cast<int>(i)) CHECK(l->bary[k] == 1.0);
  }
  for (std::size_t t = 0; t < m.num_triangles(); t += 7) {
    const Point c = m.centroid(t);
    const auto l = loc.locate(c);
    REQUIRE(l.has_value());
    CHECK(loc.interpolate(lin, *l) == doctest::Approx(2.0 * c.x() - 3.0 * c.y() + 0.5));
  }
  CHECK_FALSE(loc.locate(Point(3.0, 3.0)).has_value());
}

TEST_CASE("marker names") {
  for (VertexMarker m : {VertexMarker::Interior, VertexMarker::Gamma1, VertexMarker::Gamma2,
                         VertexMarker::CornerG1, VertexMarker::CornerG2})
    CHECK(parse_marker(to_string(m)) == m);
  CHECK_THROWS_AS(parse_marker("edge"), Error);
}
