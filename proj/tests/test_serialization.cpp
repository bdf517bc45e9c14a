#include <filesystem>

#include <doctest.h>

#include "nlbvp/serialization.hpp"

using namespace nlbvp;

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("complex values") {
  CHECK(complex_from_json(Json(0.25)) == Complex(0.25, 0.0));
  CHECK(complex_from_json(Json::array({0.1, -2.0})) == Complex(0.1, -2.0));
  const Complex z(0.1, 1.0 / 3.0);
  CHECK(complex_from_json(complex_to_json(z)) == z);
  CHECK_THROWS(complex_from_json(Json("x")));
  CHECK(point_from_json(point_to_json(Point(0.3, -0.7))) == Point(0.3, -0.7));
}

TEST_CASE("geometry document round trip") {
  for (DomainShape shape : {DomainShape::PolylineKite, DomainShape::LensSpline}) {
    const DomainSpec d = build_canonical_domain(1.1, 2.0, shape);
    const std::vector<DiffeoMap> maps{build_corner_rotation_map(d, CurveId::Gamma1),
                                      build_interior_contraction_map(d, 0.5)};
    const CutoffXi xi = build_cutoff(d.corners(), 0.6, 0.3);
    const Json doc = geometry_document(d, maps, xi);
    CHECK(doc.at("version") == kDocumentVersion);
    CHECK(doc.contains("corners"));
    CHECK(doc.contains("curves"));
    CHECK(doc.contains("maps"));
    CHECK(doc.contains("cutoff"));

    const DomainSpec back = domain_from_document(doc);
    CHECK(back.polygon() == d.polygon());
    CHECK(domain_hash(back) == domain_hash(d));
    const auto maps_back = maps_from_document(back, doc);
    REQUIRE(maps_back.size() == 2);
    const Point y = d.gamma1().at(0.3);
    CHECK((maps_back[0](y) - maps[0](y)).norm() == 0.0);
    CHECK((maps_back[1](y) - maps[1](y)).norm() == 0.0);
    const auto xi_back = cutoff_from_document(back, doc);
    REQUIRE(xi_back.has_value());
    CHECK((*xi_back)(Point(0.4, 0.05)) == xi(Point(0.4, 0.05)));
    CHECK(geometry_document(back, maps_back, xi_back).dump() == doc.dump());
  }
}

TEST_CASE("domain hash separates domains") {
  const DomainSpec a = build_canonical_domain(1.0, 1.0, DomainShape::PolylineKite);
  const DomainSpec b = build_canonical_domain(1.0001, 1.0, DomainShape::PolylineKite);
  CHECK(domain_hash(a) != domain_hash(b));
  CHECK(domain_hash(a).size() == 16);
}

TEST_CASE("rejects malformed documents") {
  CHECK_THROWS_AS(domain_from_document(Json::object()), Error);
  Json doc = geometry_document(build_canonical_domain(1.0, 1.0, DomainShape::PolylineKite));
  doc["version"] = 99;
  CHECK_THROWS_AS(domain_from_document(doc), Error);
}

TEST_CASE("mesh JSON and cache") {
  const DomainSpec d = build_canonical_domain(kPi / 3, 1.0, DomainShape::PolylineKite);
  const Mesh m = generate_graded_mesh(d, 0.1, 2.0);
  const Mesh back = mesh_from_json(mesh_to_json(m));
  CHECK(back.vertices == m.vertices);
  CHECK(back.triangles == m.triangles);
  CHECK(back.markers == m.markers);
  CHECK(back.h == m.h);
  CHECK(back.beta == m.beta);
  CHECK(back.domain_hash == m.domain_hash);

  const auto dir = std::filesystem::temp_directory_path() / "nlbvp_test_cache";
  std::filesystem::remove_all(dir);
  MeshCache cache(dir);
  CHECK(cache.enabled());
  const Mesh cold = cache.get_or_build(d, 0.1, 2.0);
  CHECK(std::filesystem::exists(cache.path_for(d, 0.1, 2.0)));
  const Mesh warm = cache.get_or_build(d, 0.1, 2.0);
  CHECK(cold.vertices == m.vertices);
  CHECK(warm.vertices == m.vertices);
  CHECK(warm.triangles == m.triangles);
  CHECK(cache.path_for(d, 0.1, 2.0) != cache.path_for(d, 0.05, 2.0));
  std::filesystem::remove_all(dir);

  CHECK_FALSE(MeshCache().enabled());
}
