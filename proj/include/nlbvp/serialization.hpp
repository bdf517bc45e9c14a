#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nlbvp/geometry.hpp"
#include "nlbvp/mesh.hpp"

namespace nlbvp {

using Json = nlohmann::json;

inline constexpr int kDocumentVersion = 1;

std::uint64_t fnv1a(std::string_view bytes);
/// 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

Json point_to_json(const Point& p);
Point point_from_json(const Json& j);
Json complex_to_json(Complex z);
/// Accepts a number or a [re, im] pair.
Complex complex_from_json(const Json& j);

/// Geometry document: version, corners, curves, star center, maps, cutoff.
Json geometry_document(const DomainSpec& domain, const std::vector<DiffeoMap>& maps = {},
                       const std::optional<CutoffXi>& cutoff = std::nullopt);
DomainSpec domain_from_document(const Json& doc);
/// Rebuilds (and re-verifies) the maps listed in a geometry document.
std::vector<DiffeoMap> maps_from_document(const DomainSpec& domain, const Json& doc);
std::optional<CutoffXi> cutoff_from_document(const DomainSpec& domain, const Json& doc);

/// Hash of the domain part of the geometry document.
std::string domain_hash(const DomainSpec& domain);

Json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const Json& j);

/// JSON mesh files keyed by (domain hash, h, beta). An empty directory
/// disables caching.
class MeshCache {
 public:
  explicit MeshCache(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

  Mesh get_or_build(const DomainSpec& domain, double h, double beta);
  std::filesystem::path path_for(const DomainSpec& domain, double h, double beta) const;
  bool enabled() const { return !dir_.empty(); }

 private:
  std::filesystem::path dir_;
};

}  // namespace nlbvp
