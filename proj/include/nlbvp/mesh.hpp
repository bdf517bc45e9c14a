#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "nlbvp/geometry.hpp"

namespace nlbvp {

enum class VertexMarker { Interior, Gamma1, Gamma2, CornerG1, CornerG2 };

std::string to_string(VertexMarker marker);
VertexMarker parse_marker(const std::string& name);

inline bool is_boundary(VertexMarker m) { return m != VertexMarker::Interior; }
inline bool is_corner(VertexMarker m) {
  return m == VertexMarker::CornerG1 || m == VertexMarker::CornerG2;
}

/// Conforming P1 triangulation. Triangles are counter-clockwise; vertex 0 is
/// g1 and vertex 1 is g2.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<VertexMarker> markers;
  double h = 0.0;
  double beta = 1.0;
  std::string domain_hash;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  int corner_vertex(int j) const { return j; }

  double area(std::size_t t) const;
  Point centroid(std::size_t t) const;
  double diameter(std::size_t t) const;
  /// Smallest interior angle over all triangles, degrees.
  double min_angle_deg() const;
  /// Sum of the triangle angles at vertex v, radians.
  double angle_sum_at(int v) const;
  /// Largest diameter among triangles touching vertex v.
  double first_ring_diameter(int v) const;
  /// Identifier combining the domain hash and the mesh parameters.
  std::string id() const;
};

/// Target edge length h (rho / D)^(1 - 1/beta), floored at h^beta / D^(beta-1),
/// where D is the domain diameter.
double graded_size(const DomainSpec& domain, double h, double beta, const Point& p);
double graded_size(double h, double beta, double diameter, double rho);

struct MeshOptions {
  double min_angle_deg = 20.5;
  std::size_t max_vertices = 400000;
};

/// Delaunay refinement of the boundary polygon with the graded size field.
/// Requires 0 < h <= eps and beta >= 1.
Mesh generate_graded_mesh(const DomainSpec& domain, double h, double beta,
                          const MeshOptions& options = {});

struct Location {
  int triangle = -1;
  std::array<double, 3> bary{0.0, 0.0, 0.0};
};

/// Bucketed point location returning barycentric coordinates.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  /// Triangle containing p (within a relative tolerance). Points coinciding
  /// with a mesh vertex get the exact weight 1 on that vertex.
  std::optional<Location> locate(const Point& p) const;

  /// P1 interpolation of nodal values at p.
  template <typename Vec>
  auto interpolate(const Vec& values, const Location& loc) const {
    const auto& tri = mesh_.triangles[loc.triangle];
    return loc.bary[0] * values[tri[0]] + loc.bary[1] * values[tri[1]] +
           loc.bary[2] * values[tri[2]];
  }

 private:
  const Mesh& mesh_;
  Point origin_;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  double tol_ = 0.0;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace nlbvp
