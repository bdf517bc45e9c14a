#include "nlbvp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "nlbvp/serialization.hpp"

namespace nlbvp {

std::string to_string(VertexMarker marker) {
  switch (marker) {
    case VertexMarker::Interior: return "interior";
    case VertexMarker::Gamma1: return "gamma1";
    case VertexMarker::Gamma2: return "gamma2";
    case VertexMarker::CornerG1: return "corner-g1";
    case VertexMarker::CornerG2: return "corner-g2";
  }
  return "interior";
}

VertexMarker parse_marker(const std::string& name) {
  for (auto m : {VertexMarker::Interior, VertexMarker::Gamma1, VertexMarker::Gamma2,
                 VertexMarker::CornerG1, VertexMarker::CornerG2})
    if (to_string(m) == name) return m;
  fail(ErrorKind::Config, "unknown vertex marker '" + name + "'");
}

namespace {

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

double orient(const Point& a, const Point& b, const Point& c) { return cross(b - a, c - a); }

// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
double incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const long double adx = a.x() - d.x(), ady = a.y() - d.y();
  const long double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const long double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return static_cast<double>(adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
                             ad * (bdx * cdy - bdy * cdx));
}

Point circumcenter(const Point& a, const Point& b, const Point& c) {
  const Point ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  return a + Point(ac.y() * ab2 - ab.y() * ac2, ab.x() * ac2 - ac.x() * ab2) / d;
}

double min_angle(const Point& a, const Point& b, const Point& c) {
  auto angle = [](const Point& p, const Point& q, const Point& r) {
    const Point u = q - p, v = r - p;
    return std::atan2(std::abs(cross(u, v)), u.dot(v));
  };
  return std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
}

struct Triangle {
  std::array<int, 3> v;
  std::array<int, 3> nb;  // neighbor across the edge opposite v[k]
  bool alive = true;
  bool inside = false;
};

struct Segment {
  int a, b;
  CurveId curve;
  bool alive = true;
};

VertexMarker curve_marker(CurveId id) {
  return id == CurveId::Gamma1 ? VertexMarker::Gamma1 : VertexMarker::Gamma2;
}

class Refiner {
 public:
  Refiner(const DomainSpec& domain, double h, double beta, const MeshOptions& options)
      : domain_(domain), h_(h), beta_(beta), diameter_(domain.diameter()), options_(options) {
    min_angle_rad_ = options.min_angle_deg * kPi / 180.0;
  }

  Mesh run() {
    build_super_triangle();
    seed_boundary();
    refine();
    return extract();
  }

 private:
  double size_at(const Point& p) const {
    return graded_size(h_, beta_, diameter_, rho(domain_, p));
  }

  void build_super_triangle() {
    const auto& poly = domain_.polygon();
    Point lo = poly.front(), hi = poly.front();
    for (const auto& p : poly) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Point mid = 0.5 * (lo + hi);
    const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y());
    vertices_.push_back(mid + Point(-40.0 * span, -30.0 * span));
    vertices_.push_back(mid + Point(40.0 * span, -30.0 * span));
    vertices_.push_back(mid + Point(0.0, 40.0 * span));
    markers_.assign(3, VertexMarker::Interior);
    triangles_.push_back(Triangle{{0, 1, 2}, {-1, -1, -1}, true, false});
  }

  // Boundary vertices placed with density 1/size along each polygon edge.
  void seed_boundary() {
    const auto& poly = domain_.polygon();
    const auto& curve = domain_.polygon_curve();
    const std::size_t n = poly.size();
    const std::size_t g2 = domain_.g2_index();

    std::vector<int> poly_vertex(n);
    poly_vertex[0] = insert(poly[0], VertexMarker::CornerG1);
    poly_vertex[g2] = insert(poly[g2], VertexMarker::CornerG2);
    for (std::size_t k = 1; k < n; ++k) {
      if (k == g2) continue;
      poly_vertex[k] = insert(poly[k], curve_marker(curve[k]));
    }

    constexpr int kSamples = 2000;
    for (std::size_t k = 0; k < n; ++k) {
      const Point a = poly[k], b = poly[(k + 1) % n];
      const double len = (b - a).norm();
      std::vector<double> cumulative(kSamples + 1, 0.0);
      for (int i = 0; i < kSamples; ++i) {
        const Point m = a + (b - a) * ((i + 0.5) / kSamples);
        cumulative[i + 1] = cumulative[i] + len / kSamples / size_at(m);
      }
      const int pieces = std::max(1, static_cast<int>(std::ceil(cumulative.back() - 1e-9)));
      int prev = poly_vertex[k];
      for (int p = 1; p < pieces; ++p) {
        const double target = cumulative.back() * p / pieces;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
        const std::size_t i = static_cast<std::size_t>(it - cumulative.begin());
        const double f = (target - cumulative[i - 1]) / (cumulative[i] - cumulative[i - 1]);
        const double s = (static_cast<double>(i - 1) + f) / kSamples;
        const int v = insert(a + (b - a) * s, curve_marker(curve[k]));
        segments_.push_back(Segment{prev, v, curve[k]});
        prev = v;
      }
      segments_.push_back(Segment{prev, poly_vertex[(k + 1) % n], curve[k]});
    }
  }

  bool encroaches(const Segment& s, const Point& p) const {
    const Point& a = vertices_[s.a];
    const Point& b = vertices_[s.b];
    return (a - p).dot(b - p) <= 1e-12 * (b - a).squaredNorm();
  }

  bool encroached(int s) const {
    const Segment& seg = segments_[s];
    const Point& a = vertices_[seg.a];
    const Point& b = vertices_[seg.b];
    const Point mid = 0.5 * (a + b);
    const double r = 0.5 * (b - a).norm() * (1.0 + 1e-9);
    for (std::size_t v = 3; v < vertices_.size(); ++v) {
      if (static_cast<int>(v) == seg.a || static_cast<int>(v) == seg.b) continue;
      if ((vertices_[v] - mid).norm() > r) continue;
      if (encroaches(seg, vertices_[v])) return true;
    }
    return false;
  }

  bool is_edge(int a, int b) const {
    for (const auto& tri : triangles_) {
      if (!tri.alive) continue;
      const auto& v = tri.v;
      const bool has_a = v[0] == a || v[1] == a || v[2] == a;
      const bool has_b = v[0] == b || v[1] == b || v[2] == b;
      if (has_a && has_b) return true;
    }
    return false;
  }

  // Scaled signed distance of p from the edge opposite v[k]; negative outside.
  double edge_side(const Triangle& tri, int k, const Point& p) const {
    const Point& a = vertices_[tri.v[(k + 1) % 3]];
    const Point& b = vertices_[tri.v[(k + 2) % 3]];
    return orient(a, b, p) / (b - a).squaredNorm();
  }

  int locate(const Point& p, int hint) const {
    constexpr double kSlack = 1e-13;
    int t = hint;
    if (t < 0 || !triangles_[t].alive) {
      for (std::size_t i = triangles_.size(); i-- > 0;)
        if (triangles_[i].alive) {
          t = static_cast<int>(i);
          break;
        }
    }
    const std::size_t limit = 4 * triangles_.size() + 16;
    for (std::size_t step = 0; step < limit; ++step) {
      const auto& tri = triangles_[t];
      int next = -1;
      for (int k = 0; k < 3; ++k) {
        if (edge_side(tri, k, p) < -kSlack) {
          next = tri.nb[k];
          break;
        }
      }
      if (next < 0) return t;
      t = next;
    }
    int best = -1;
    double best_side = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      const auto& tri = triangles_[i];
      if (!tri.alive) continue;
      const double side = std::min({edge_side(tri, 0, p), edge_side(tri, 1, p), edge_side(tri, 2, p)});
      if (side > best_side) {
        best_side = side;
        best = static_cast<int>(i);
      }
    }
    if (best < 0 || best_side < -1e-9)
      fail(ErrorKind::Geometry, "mesh point location failed during refinement");
    return best;
  }

  int new_triangle(const Triangle& tri) {
    if (!free_.empty()) {
      const int t = free_.back();
      free_.pop_back();
      triangles_[t] = tri;
      return t;
    }
    triangles_.push_back(tri);
    return static_cast<int>(triangles_.size() - 1);
  }

  // Bowyer-Watson insertion. Returns the new vertex index.
  int insert(const Point& p, VertexMarker marker) {
    const int start = locate(p, last_triangle_);
    const int v = static_cast<int>(vertices_.size());
    vertices_.push_back(p);
    markers_.push_back(marker);

    std::vector<int> cavity{start};
    std::vector<char> in_cavity(triangles_.size(), 0);
    in_cavity[start] = 1;
    for (std::size_t i = 0; i < cavity.size(); ++i) {
      const auto& tri = triangles_[cavity[i]];
      for (int k = 0; k < 3; ++k) {
        const int n = tri.nb[k];
        if (n < 0 || in_cavity[n]) continue;
        const auto& o = triangles_[n];
        if (incircle(vertices_[o.v[0]], vertices_[o.v[1]], vertices_[o.v[2]], p) > 0.0) {
          in_cavity[n] = 1;
          cavity.push_back(n);
        }
      }
    }

    struct Edge {
      int a, b, outside;
    };
    std::vector<Edge> boundary;
    // Shrink the cavity until it is star-shaped from p.
    for (;;) {
      boundary.clear();
      int offender = -1;
      for (int t : cavity) {
        if (!in_cavity[t]) continue;
        const auto& tri = triangles_[t];
        for (int k = 0; k < 3; ++k) {
          const int n = tri.nb[k];
          if (n >= 0 && in_cavity[n]) continue;
          const int a = tri.v[(k + 1) % 3], b = tri.v[(k + 2) % 3];
          if (orient(vertices_[a], vertices_[b], p) <= 0.0 && t != start) offender = t;
          boundary.push_back({a, b, n});
        }
      }
      if (offender < 0) break;
      in_cavity[offender] = 0;
    }

    std::vector<int> created;
    created.reserve(boundary.size());
    for (const auto& e : boundary) {
      const int t = new_triangle(Triangle{{e.a, e.b, v}, {-1, -1, e.outside}, true, false});
      if (t >= static_cast<int>(in_cavity.size())) in_cavity.resize(t + 1, 0);
      created.push_back(t);
      if (e.outside >= 0) {
        auto& o = triangles_[e.outside];
        for (int k = 0; k < 3; ++k) {
          const int oa = o.v[(k + 1) % 3], ob = o.v[(k + 2) % 3];
          if (oa == e.b && ob == e.a) o.nb[k] = t;
        }
      }
    }
    for (std::size_t i = 0; i < boundary.size(); ++i) {
      for (std::size_t j = 0; j < boundary.size(); ++j) {
        if (boundary[j].a == boundary[i].b) triangles_[created[i]].nb[0] = created[j];
        if (boundary[j].b == boundary[i].a) triangles_[created[i]].nb[1] = created[j];
      }
    }
    for (int t : cavity) {
      if (!in_cavity[t]) continue;
      triangles_[t].alive = false;
      free_.push_back(t);
    }
    // Freed slots can be reused by later insertions only.
    for (int t : created) {
      auto& tri = triangles_[t];
      tri.inside = tri.v[0] >= 3 && tri.v[1] >= 3 && tri.v[2] >= 3 &&
                   domain_.contains(
                       (vertices_[tri.v[0]] + vertices_[tri.v[1]] + vertices_[tri.v[2]]) / 3.0);
      queue_.push_back(t);
    }
    last_triangle_ = created.empty() ? -1 : created.back();
    return v;
  }

  bool bad(int t) const {
    const auto& tri = triangles_[t];
    const Point& a = vertices_[tri.v[0]];
    const Point& b = vertices_[tri.v[1]];
    const Point& c = vertices_[tri.v[2]];
    if (min_angle(a, b, c) < min_angle_rad_) return true;
    const double longest = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
    return longest > size_at((a + b + c) / 3.0);
  }

  void split_segment(int s) {
    const Segment seg = segments_[s];
    segments_[s].alive = false;
    const Point mid = 0.5 * (vertices_[seg.a] + vertices_[seg.b]);
    const int v = insert(mid, curve_marker(seg.curve));
    segments_.push_back(Segment{seg.a, v, seg.curve});
    segments_.push_back(Segment{v, seg.b, seg.curve});
    pending_.push_back(static_cast<int>(segments_.size() - 2));
    pending_.push_back(static_cast<int>(segments_.size() - 1));
    for (std::size_t o = 0; o + 2 < segments_.size(); ++o)
      if (segments_[o].alive && encroaches(segments_[o], mid)) pending_.push_back(static_cast<int>(o));
  }

  void check_vertex_budget() const {
    if (vertices_.size() > options_.max_vertices)
      fail(ErrorKind::Geometry,
           "degenerate domain: mesh refinement exceeded the vertex budget (angle too small "
           "for the minimum-angle bound at h = " +
               std::to_string(h_) + ")");
  }

  void refine() {
    for (std::size_t s = 0; s < segments_.size(); ++s) pending_.push_back(static_cast<int>(s));
    for (;;) {
      while (!pending_.empty()) {
        const int s = pending_.front();
        pending_.pop_front();
        if (segments_[s].alive && encroached(s)) split_segment(s);
        check_vertex_budget();
      }
      if (queue_.empty()) {
        // Every subsegment must be an edge of the triangulation.
        for (std::size_t s = 0; s < segments_.size(); ++s)
          if (segments_[s].alive && !is_edge(segments_[s].a, segments_[s].b))
            split_segment(static_cast<int>(s));
        if (pending_.empty() && queue_.empty()) break;
        continue;
      }
      const int t = queue_.front();
      queue_.pop_front();
      if (!triangles_[t].alive || !triangles_[t].inside || !bad(t)) continue;
      const auto& tri = triangles_[t];
      const Point c = circumcenter(vertices_[tri.v[0]], vertices_[tri.v[1]], vertices_[tri.v[2]]);
      bool split_any = false;
      for (std::size_t s = 0; s < segments_.size(); ++s) {
        if (segments_[s].alive && encroaches(segments_[s], c)) {
          split_segment(static_cast<int>(s));
          split_any = true;
        }
      }
      if (split_any) {
        if (triangles_[t].alive) queue_.push_back(t);
        continue;
      }
      if (!domain_.contains(c)) continue;
      insert(c, VertexMarker::Interior);
      check_vertex_budget();
    }
  }

  Mesh extract() const {
    Mesh mesh;
    mesh.h = h_;
    mesh.beta = beta_;
    std::vector<int> remap(vertices_.size(), -1);
    for (std::size_t v = 3; v < vertices_.size(); ++v) {
      remap[v] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back(vertices_[v]);
      mesh.markers.push_back(markers_[v]);
    }
    for (const auto& tri : triangles_) {
      if (!tri.alive || !tri.inside) continue;
      mesh.triangles.push_back({remap[tri.v[0]], remap[tri.v[1]], remap[tri.v[2]]});
    }
    std::sort(mesh.triangles.begin(), mesh.triangles.end());

    const double angle = mesh.min_angle_deg();
    if (angle < 20.0)
      fail(ErrorKind::Geometry, "degenerate domain: minimum mesh angle " + std::to_string(angle) +
                                    " deg below 20 deg at h = " + std::to_string(h_));
    return mesh;
  }

  const DomainSpec& domain_;
  double h_, beta_, diameter_;
  MeshOptions options_;
  double min_angle_rad_ = 0.0;

  std::vector<Point> vertices_;
  std::vector<VertexMarker> markers_;
  std::vector<Triangle> triangles_;
  std::vector<int> free_;
  std::vector<Segment> segments_;
  std::deque<int> pending_;
  std::deque<int> queue_;
  int last_triangle_ = 0;
};

}  // namespace

double Mesh::area(std::size_t t) const {
  const auto& tri = triangles[t];
  return 0.5 * orient(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

Point Mesh::centroid(std::size_t t) const {
  const auto& tri = triangles[t];
  return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
}

double Mesh::diameter(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point &a = vertices[tri[0]], &b = vertices[tri[1]], &c = vertices[tri[2]];
  return std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
}

double Mesh::min_angle_deg() const {
  double best = 180.0;
  for (const auto& tri : triangles)
    best = std::min(best, min_angle(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]));
  return best * 180.0 / kPi;
}

double Mesh::angle_sum_at(int v) const {
  double sum = 0.0;
  for (const auto& tri : triangles) {
    for (int k = 0; k < 3; ++k) {
      if (tri[k] != v) continue;
      const Point u = vertices[tri[(k + 1) % 3]] - vertices[v];
      const Point w = vertices[tri[(k + 2) % 3]] - vertices[v];
      sum += std::atan2(std::abs(cross(u, w)), u.dot(w));
    }
  }
  return sum;
}

double Mesh::first_ring_diameter(int v) const {
  double d = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    if (tri[0] == v || tri[1] == v || tri[2] == v) d = std::max(d, diameter(t));
  }
  return d;
}

std::string Mesh::id() const {
  std::ostringstream os;
  os.precision(17);
  os << domain_hash << ":h=" << h << ":beta=" << beta;
  return fnv1a_hex(os.str());
}

double graded_size(const DomainSpec& domain, double h, double beta, const Point& p) {
  return graded_size(h, beta, domain.diameter(), rho(domain, p));
}

double graded_size(double h, double beta, double diameter, double r) {
  const double d = diameter;
  const double graded = h * std::pow(r / d, 1.0 - 1.0 / beta);
  const double floor = h * std::pow(h / d, beta - 1.0);
  return std::max(graded, floor);
}

Mesh generate_graded_mesh(const DomainSpec& domain, double h, double beta,
                          const MeshOptions& options) {
  if (!(h > 0.0)) fail(ErrorKind::Config, "mesh size h must be positive");
  if (!(beta >= 1.0)) fail(ErrorKind::Config, "grading exponent beta must be >= 1");
  const double eps = domain.corners().eps;
  if (h > eps)
    fail(ErrorKind::Config, "mesh size h = " + std::to_string(h) +
                                " exceeds the corner-neighborhood radius eps = " +
                                std::to_string(eps));
  Refiner refiner(domain, h, beta, options);
  Mesh mesh = refiner.run();
  mesh.domain_hash = domain_hash(domain);
  return mesh;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(mesh) {
  Point lo = mesh.vertices.front(), hi = mesh.vertices.front();
  for (const auto& p : mesh.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double span = std::max(hi.x() - lo.x(), hi.y() - lo.y());
  tol_ = 1e-12 * span;
  const double n = std::sqrt(static_cast<double>(std::max<std::size_t>(mesh.num_triangles(), 1)));
  cell_ = span / std::max(1.0, std::floor(n / 2.0));
  origin_ = lo - Point::Constant(tol_ + 1e-3 * cell_);
  nx_ = static_cast<int>((hi.x() - origin_.x()) / cell_) + 2;
  ny_ = static_cast<int>((hi.y() - origin_.y()) / cell_) + 2;
  buckets_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    Point tlo = mesh.vertices[tri[0]], thi = tlo;
    for (int k = 1; k < 3; ++k) {
      tlo = tlo.cwiseMin(mesh.vertices[tri[k]]);
      thi = thi.cwiseMax(mesh.vertices[tri[k]]);
    }
    const int i0 = static_cast<int>((tlo.x() - origin_.x() - tol_) / cell_);
    const int i1 = static_cast<int>((thi.x() - origin_.x() + tol_) / cell_);
    const int j0 = static_cast<int>((tlo.y() - origin_.y() - tol_) / cell_);
    const int j1 = static_cast<int>((thi.y() - origin_.y() + tol_) / cell_);
    for (int i = std::max(0, i0); i <= std::min(nx_ - 1, i1); ++i)
      for (int j = std::max(0, j0); j <= std::min(ny_ - 1, j1); ++j)
        buckets_[static_cast<std::size_t>(j) * nx_ + i].push_back(static_cast<int>(t));
  }
}

std::optional<Location> PointLocator::locate(const Point& p) const {
  const int i = static_cast<int>((p.x() - origin_.x()) / cell_);
  const int j = static_cast<int>((p.y() - origin_.y()) / cell_);
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return std::nullopt;
  const auto& bucket = buckets_[static_cast<std::size_t>(j) * nx_ + i];

  Location best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int t : bucket) {
    const auto& tri = mesh_.triangles[t];
    for (int k = 0; k < 3; ++k) {
      if ((mesh_.vertices[tri[k]] - p).norm() <= tol_) {
        Location loc;
        loc.triangle = t;
        loc.bary[k] = 1.0;
        return loc;
      }
    }
    const Point& a = mesh_.vertices[tri[0]];
    const Point& b = mesh_.vertices[tri[1]];
    const Point& c = mesh_.vertices[tri[2]];
    const double det = orient(a, b, c);
    const std::array<double, 3> w{orient(p, b, c) / det, orient(a, p, c) / det,
                                  orient(a, b, p) / det};
    const double m = std::min({w[0], w[1], w[2]});
    if (m > best_min) {
      best_min = m;
      best.triangle = t;
      best.bary = w;
    }
  }
  if (best.triangle < 0) return std::nullopt;
  if (best_min < -1e-9) return std::nullopt;
  double sum = 0.0;
  for (auto& w : best.bary) {
    w = std::max(w, 0.0);
    sum += w;
  }
  for (auto& w : best.bary) w /= sum;
  return best;
}

}  // namespace nlbvp
