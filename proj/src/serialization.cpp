#include "nlbvp/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace nlbvp {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string fnv1a_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

Json point_to_json(const Point& p) { return Json::array({p.x(), p.y()}); }

Point point_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::Config, "point must be [x, y]");
  return Point(j[0].get<double>(), j[1].get<double>());
}

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from_json(const Json& j) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (j.is_array() && j.size() == 2) return Complex(j[0].get<double>(), j[1].get<double>());
  fail(ErrorKind::Config, "complex value must be a number or [re, im]");
}

namespace {

Json curve_to_json(const BoundaryCurve& curve) {
  Json pts = Json::array();
  for (const auto& p : curve.control_points()) pts.push_back(point_to_json(p));
  return {{"kind", curve.kind() == BoundaryCurve::Kind::Polyline ? "polyline" : "bezier-lens"},
          {"control", pts}};
}

BoundaryCurve curve_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  BoundaryCurve::Kind k;
  if (kind == "polyline")
    k = BoundaryCurve::Kind::Polyline;
  else if (kind == "bezier-lens")
    k = BoundaryCurve::Kind::BezierLens;
  else
    fail(ErrorKind::Config, "unknown curve kind '" + kind + "'");
  std::vector<Point> pts;
  for (const auto& p : j.at("control")) pts.push_back(point_from_json(p));
  return BoundaryCurve(k, std::move(pts));
}

Json domain_json(const DomainSpec& domain) {
  const auto& c = domain.corners();
  return {{"corners",
           {{"omega0", c.omega0},
            {"g1", point_to_json(c.g1)},
            {"g2", point_to_json(c.g2)},
            {"eps", c.eps}}},
          {"shape", to_string(domain.shape())},
          {"curves", {{"gamma1", curve_to_json(domain.gamma1())},
                      {"gamma2", curve_to_json(domain.gamma2())}}},
          {"star_center", point_to_json(domain.star_center())}};
}

Json map_to_json(const DiffeoMap& map) {
  Json params;
  if (map.kind() == MapKind::CornerRotationBlend) {
    params = {{"source", *map.source() == CurveId::Gamma1 ? "gamma1" : "gamma2"},
              {"rotation_angle", map.rotation_angle()},
              {"blend_radius", map.blend_radius()},
              {"inward_fraction", map.inward_fraction()}};
  } else {
    params = {{"ratio", map.ratio()},
              {"center", point_to_json(map.center())},
              {"margin", map.margin()}};
  }
  return {{"kind", to_string(map.kind())}, {"params", params}};
}

}  // namespace

Json geometry_document(const DomainSpec& domain, const std::vector<DiffeoMap>& maps,
                       const std::optional<CutoffXi>& cutoff) {
  Json doc = domain_json(domain);
  doc["version"] = kDocumentVersion;
  Json m = Json::array();
  for (const auto& map : maps) m.push_back(map_to_json(map));
  doc["maps"] = m;
  if (cutoff)
    doc["cutoff"] = {{"delta", cutoff->delta()}, {"plateau", cutoff->plateau()}};
  else
    doc["cutoff"] = nullptr;
  return doc;
}

DomainSpec domain_from_document(const Json& doc) {
  try {
    if (doc.contains("version") && doc.at("version").get<int>() != kDocumentVersion)
      fail(ErrorKind::Config, "unsupported geometry document version");
    const Json& c = doc.at("corners");
    CornerConfig corners;
    corners.omega0 = c.at("omega0").get<double>();
    corners.g1 = point_from_json(c.at("g1"));
    corners.g2 = point_from_json(c.at("g2"));
    corners.eps = c.at("eps").get<double>();
    return DomainSpec(corners, curve_from_json(doc.at("curves").at("gamma1")),
                      curve_from_json(doc.at("curves").at("gamma2")),
                      point_from_json(doc.at("star_center")),
                      parse_shape(doc.at("shape").get<std::string>()));
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed geometry document: ") + e.what());
  }
}

std::vector<DiffeoMap> maps_from_document(const DomainSpec& domain, const Json& doc) {
  std::vector<DiffeoMap> maps;
  if (!doc.contains("maps")) return maps;
  try {
    for (const auto& m : doc.at("maps")) {
      const std::string kind = m.at("kind").get<std::string>();
      const Json& p = m.at("params");
      if (kind == to_string(MapKind::CornerRotationBlend)) {
        const std::string src = p.at("source").get<std::string>();
        if (src != "gamma1" && src != "gamma2")
          fail(ErrorKind::Config, "unknown map source '" + src + "'");
        maps.push_back(build_corner_rotation_map(
            domain, src == "gamma1" ? CurveId::Gamma1 : CurveId::Gamma2,
            p.at("blend_radius").get<double>(), p.at("inward_fraction").get<double>()));
      } else if (kind == to_string(MapKind::InteriorContraction)) {
        maps.push_back(build_interior_contraction_map(domain, p.at("ratio").get<double>()));
      } else {
        fail(ErrorKind::Config, "unknown map kind '" + kind + "'");
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed map entry: ") + e.what());
  }
  return maps;
}

std::optional<CutoffXi> cutoff_from_document(const DomainSpec& domain, const Json& doc) {
  if (!doc.contains("cutoff") || doc.at("cutoff").is_null()) return std::nullopt;
  const Json& c = doc.at("cutoff");
  return build_cutoff(domain.corners(), c.at("delta").get<double>(),
                      c.at("plateau").get<double>());
}

std::string domain_hash(const DomainSpec& domain) { return fnv1a_hex(domain_json(domain).dump()); }

Json mesh_to_json(const Mesh& mesh) {
  Json v = Json::array(), t = Json::array(), m = Json::array();
  for (const auto& p : mesh.vertices) v.push_back(point_to_json(p));
  for (const auto& tri : mesh.triangles) t.push_back({tri[0], tri[1], tri[2]});
  for (auto marker : mesh.markers) m.push_back(to_string(marker));
  return {{"version", kDocumentVersion}, {"h", mesh.h},          {"beta", mesh.beta},
          {"domain_hash", mesh.domain_hash}, {"vertices", v},    {"triangles", t},
          {"markers", m}};
}

Mesh mesh_from_json(const Json& j) {
  try {
    if (j.at("version").get<int>() != kDocumentVersion)
      fail(ErrorKind::Config, "unsupported mesh file version");
    Mesh mesh;
    mesh.h = j.at("h").get<double>();
    mesh.beta = j.at("beta").get<double>();
    mesh.domain_hash = j.at("domain_hash").get<std::string>();
    for (const auto& p : j.at("vertices")) mesh.vertices.push_back(point_from_json(p));
    for (const auto& t : j.at("triangles"))
      mesh.triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
    for (const auto& m : j.at("markers")) mesh.markers.push_back(parse_marker(m.get<std::string>()));
    if (mesh.markers.size() != mesh.vertices.size())
      fail(ErrorKind::Config, "mesh file marker count does not match vertex count");
    const int n = static_cast<int>(mesh.vertices.size());
    for (const auto& t : mesh.triangles)
      for (int v : t)
        if (v < 0 || v >= n) fail(ErrorKind::Config, "mesh file triangle index out of range");
    return mesh;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed mesh file: ") + e.what());
  }
}

std::filesystem::path MeshCache::path_for(const DomainSpec& domain, double h, double beta) const {
  std::ostringstream key;
  key.precision(17);
  key << domain_hash(domain) << ":h=" << h << ":beta=" << beta;
  return dir_ / ("mesh-" + fnv1a_hex(key.str()) + ".json");
}

Mesh MeshCache::get_or_build(const DomainSpec& domain, double h, double beta) {
  if (!enabled()) return generate_graded_mesh(domain, h, beta);
  const auto path = path_for(domain, h, beta);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    Json j;
    try {
      in >> j;
    } catch (const Json::exception&) {
      j = nullptr;
    }
    if (!j.is_null()) {
      Mesh mesh = mesh_from_json(j);
      if (mesh.domain_hash == domain_hash(domain) && mesh.h == h && mesh.beta == beta) return mesh;
    }
  }
  Mesh mesh = generate_graded_mesh(domain, h, beta);
  std::filesystem::create_directories(dir_);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    out << mesh_to_json(mesh).dump();
  }
  std::filesystem::rename(tmp, path);
  return mesh;
}

}  // namespace nlbvp
